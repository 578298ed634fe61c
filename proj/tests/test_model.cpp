#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mim/model.hpp"

#include <cmath>
#include <numeric>

using namespace mim;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.torus.N = 16;
    cfg.torus.N0 = 256;
    cfg.params.rho = 1.0 / 32;
    return cfg;
}

MultiIndex idx(const std::string& s) { return MultiIndex::parse(s); }

const ModelRealization& shared_model() {
    static ModelRealization m = sample_model(small_config(), 7);
    return m;
}

const StationaryModel& shared_stationary() {
    static StationaryModel s = stationary_model(shared_model(), small_config().centering_cutoff);
    return s;
}

std::vector<GridPoint> base_points() { return {{0, 0}, {37, 3}, {-20, 9}, {101, -5}, {200, 14}, {5, 1}, {64, 8}, {13, 12}}; }

}  // namespace

TEST_CASE("zero cell variance matches an independent quadrature") {
    ModelConfig cfg;
    CHECK(zero_cell_variance(cfg.torus, cfg.params) == doctest::Approx(0.7800682439685706).epsilon(1e-8));
    cfg.params.rho = 1.0 / 64;
    CHECK(zero_cell_variance(cfg.torus, cfg.params) == doctest::Approx(0.78006794).epsilon(1e-6));
}

TEST_CASE("periodic sector solves the heat equation up to the band limit") {
    const auto& m = shared_model();
    CHECK(m.pde_residual() <= 1e-10);
    CHECK(m.pi.count(idx("0|")));
    CHECK(m.pi.at(MultiIndex::poly(SpaceIndex::zero(1))).max_abs() == 1.0);
    // the zero-mode constant sits only in Pi_0
    CHECK(m.pi.at(idx("0|")).mean() == doctest::Approx(m.zero_mode).epsilon(1e-12));
    CHECK(std::abs(m.pi.at(idx("1|")).mean()) < 1e-12);
}

TEST_CASE("space-time counterterm is the negative mean") {
    const auto& m = shared_model();
    MultiIndex b = MultiIndex::cubic(1);
    b.add(SpaceIndex::zero(1));
    CHECK(std::abs(m.pi_minus.at(b).mean()) < 1e-10);
    CHECK(m.c.count(1));
    // c_2 is not renormalized
    CHECK(m.c.count(2) ? m.c.at(2) == 0.0 : true);
}

TEST_CASE("fixed and closed-form counterterm policies") {
    auto cfg = small_config();
    cfg.policy = CounterTermPolicy::fixed;
    cfg.fixed_c[1] = -2.5;
    auto m = sample_model(cfg, 3);
    CHECK(m.c.at(1) == -2.5);
    cfg.policy = CounterTermPolicy::closed_form;
    auto m2 = sample_model(cfg, 3);
    CHECK(m2.c.at(1) == doctest::Approx(c1_closed_form(cfg.torus, cfg.params)));
}

TEST_CASE("Monte Carlo counterterm agrees with the lattice sum") {
    auto cfg = small_config();
    const int members = 64;
    std::vector<double> c;
    for (int i = 0; i < members; ++i) {
        std::mt19937_64 rng(1000 + i);
        Field xi = sample_noise(cfg.torus, cfg.params, rng);
        double z = sample_zero_mode(cfg, rng);
        Field pi0 = heat_solve(mollify(xi, cfg.params.rho));
        double s = 0;
        for (double v : pi0.values()) s += (v + z) * (v + z);
        c.push_back(-3 * s / static_cast<double>(pi0.size()));
    }
    double mean = std::accumulate(c.begin(), c.end(), 0.0) / members, var = 0;
    for (double v : c) var += (v - mean) * (v - mean);
    double se = std::sqrt(var / (members - 1) / members);
    CHECK(std::abs(mean - c1_closed_form(cfg.torus, cfg.params)) <= 5 * se);
}

TEST_CASE("recentering at the origin reproduces the identity and the polynomial block") {
    const auto& s = shared_stationary();
    auto pts = base_points();
    Centering c = center(s, pts);
    Centering o = center(s, {{0, 0}});
    Endo<double> g0 = gamma_at(c, 0, o);
    CHECK((g0 - Endo<double>::identity(g0.row_keys())).max_norm() < 1e-12);
    StructureCheck st = structure_check(s, c, o);
    CHECK(st.row_zero < 1e-12);
    CHECK(st.pp_block < 1e-12);
    CHECK(st.triangularity <= 1e-8);
    CHECK(st.sector <= 1e-8);
}

TEST_CASE("re-expansion reproduces the reference and both routes agree") {
    const auto& s = shared_stationary();
    auto pts = base_points();
    Centering c = center(s, pts);
    for (size_t j : {size_t(1), size_t(3)}) {
        auto cf = centered_fields(s, c, j);
        CHECK(reexpansion_defect(s, c, j, cf) <= 1e-8);
        auto direct = centered_fields_direct(s, pts[j]);
        for (const auto& b : s.rows) {
            Field a = cf.at(b).sample(), d = direct.at(b).sample();
            CHECK((a - d).max_abs() <= 1e-6 * std::max(1.0, a.max_abs()));
        }
    }
}

TEST_CASE("recomputed transitions form a group") {
    const auto& s = shared_stationary();
    GroupCheck g = gamma_group_check(s, {37, 3}, {-20, 9}, {101, -5});
    CHECK(g.identity <= 1e-6);
    CHECK(g.group <= 1e-6);
    CHECK(g.cocycle <= 1e-6);
}

TEST_CASE("centered values vanish to the right order at the base point") {
    const auto& s = shared_stationary();
    auto pts = base_points();
    Centering c = center(s, pts);
    auto cf = centered_fields(s, c, 2);
    for (const auto& b : s.rows) {
        double hb = to_double(homogeneity(b, s.params));
        std::vector<SpaceIndex> low;
        for (const auto& n : s.pp)
            if (n.weight() < hb - 1e-9) low.push_back(n);
        if (low.empty()) continue;
        auto jets = cf.at(b).jets_at(low, {pts[2]});
        for (const auto& n : low) CHECK(std::abs(jets.at(n)[0]) <= 1e-8 * std::max(1.0, cf.at(b).sample().max_abs()));
    }
}

TEST_CASE("convolved centered values are consistent with the fields") {
    const auto& s = shared_stationary();
    auto pts = base_points();
    Centering c = center(s, pts);
    std::vector<double> rs{0.1, 0.2};
    auto cc = centered_convolutions(s, c, rs);
    auto cf = centered_fields(s, c, 4);
    for (const auto& b : s.rows) {
        auto direct = cf.at(b).convolve_at(rs, {pts[4]});
        for (double r : rs)
            CHECK(cc.pi.at(b).at(r)[4] == doctest::Approx(direct.at(r)[0]).epsilon(1e-8).scale(1.0));
    }
}

TEST_CASE("Malliavin derivative") {
    const auto& m = shared_model();
    const auto& s = shared_stationary();
    auto pts = base_points();
    Centering c = center(s, pts);
    SUBCASE("zero direction gives zero derivative") {
        Field zero(m.spec, 0.0);
        auto dm = delta_model(m, zero);
        for (const auto& [b, f] : dm.delta_pi) CHECK(f.max_abs() == 0.0);
    }
    SUBCASE("directional derivative matches a difference quotient") {
        std::mt19937_64 rng(99);
        Field dir = white_noise(m.spec, rng);
        auto dm = delta_model(m, dir);
        // rebuild with the same counterterms and the perturbed noise
        auto cfg = small_config();
        cfg.policy = CounterTermPolicy::fixed;
        cfg.fixed_c = m.c;
        double h = 1e-6;
        std::mt19937_64 rng0(7);
        Field xi = sample_noise(cfg.torus, cfg.params, rng0);
        auto mp = build_model(xi + dir * h, m.zero_mode, cfg);
        auto mm = build_model(xi - dir * h, m.zero_mode, cfg);
        for (const auto& b : {idx("0|"), idx("1|"), idx("1|(0,0):1")}) {
            Field fd = (mp.pi.at(b) - mm.pi.at(b)) * (0.5 / h);
            CHECK((fd - dm.delta_pi.at(b)).max_abs() <= 1e-5 * std::max(1.0, fd.max_abs()));
        }
    }
    SUBCASE("robust identity holds and the identity control fails") {
        std::mt19937_64 rng(5);
        Field dir = white_noise(m.spec, rng);
        auto sd = stationary_delta(s, dir);
        auto dg = dgamma_entries(s, sd, c);
        RobustIdentity r = check_robust_identity(s, sd, c, dg);
        CHECK(r.residual <= 1e-6);
        CHECK(r.control > 1e3 * std::max(r.residual, 1e-16));
    }
}

TEST_CASE("log-log fit and scale grids") {
    std::vector<double> x{1, 2, 4, 8}, y;
    for (double v : x) y.push_back(3 * std::pow(v, 1.25));
    SlopeFit f = fit_loglog(x, y);
    CHECK(f.slope == doctest::Approx(1.25));
    CHECK(f.stderr_slope < 1e-10);
    CHECK(fit_loglog(x, {0, 0, 0, 0}).exact_zero);
    ModelParams p;
    auto rs = default_scales(p);
    CHECK(rs.size() == 5);
    CHECK(rs.front() == doctest::Approx(1.0 / 16));
    CHECK(rs.back() == doctest::Approx(1.0 / 8));
    p.rho = 1.0 / 32;
    CHECK_THROWS(default_scales(p));
    TorusSpec t;
    t.N = 16;
    t.N0 = 256;
    CHECK(lattice_points(t, 64, 8).size() == 8);
}

TEST_CASE("parity classes") {
    CHECK(odd_in_law(idx("0|")));
    CHECK(odd_in_law(idx("2|")));
    CHECK(odd_in_law(idx("1|")));
    CHECK_FALSE(odd_in_law(idx("1|(0,0):1")));
    CHECK(odd_in_law(idx("1|(0,1):1")));
    CHECK(odd_in_law(idx("1|(0,0):2")));
    // Pi^- = 1
    CHECK_FALSE(odd_in_law(idx("1|(0,0):3")));
    CHECK(odd_in_law(idx("1|(0,0):2,(0,1):1")));
}
