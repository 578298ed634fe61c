#include "mim/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mim {

void CheckReport::at_most(const std::string& name, double value, double bound, const std::string& detail) {
    items.push_back({name, value, bound, std::isfinite(value) && value <= bound, detail});
}

void CheckReport::at_least(const std::string& name, double value, double bound, const std::string& detail) {
    items.push_back({name, value, bound, std::isfinite(value) && value >= bound, detail});
}

void CheckReport::require(const std::string& name, bool ok, const std::string& detail) {
    items.push_back({name, ok ? 1.0 : 0.0, 1.0, ok, detail});
}

void CheckReport::merge(const CheckReport& o) { items.insert(items.end(), o.items.begin(), o.items.end()); }

bool CheckReport::passed() const {
    for (const auto& a : items)
        if (!a.passed) return false;
    return true;
}

nlohmann::json CheckReport::to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : items) {
        nlohmann::json e{{"name", a.name}, {"value", a.value}, {"bound", a.bound}, {"passed", a.passed}};
        if (!a.detail.empty()) e["detail"] = a.detail;
        j.push_back(e);
    }
    return j;
}

Field default_direction(const TorusSpec& s) {
    const double tp = 2 * std::numbers::pi;
    const double T = s.period(0), L = s.L;
    return Field::from_function(s, [&](const std::vector<double>& y) {
        double v = 0.5 * std::sin(tp * y[0] / T);
        for (size_t i = 1; i < y.size(); ++i) v += std::cos(tp * (y[0] / T + y[i] / L)) + 0.5 * std::cos(tp * y[i] / L);
        return v;
    });
}

RenormMeasurement measure_renorm(const ModelConfig& cfg, int members, std::uint64_t seed, int halvings) {
    RenormMeasurement out;
    MultiIndex diag = MultiIndex::cubic(1);
    diag.add(SpaceIndex::zero(cfg.params.d));
    // only the sector up to Pi^-_{delta_3 + delta_0} is needed for c_1
    ModelConfig small = cfg;
    small.cutoff = to_double(precedence(diag, cfg.params)) + 1e-3;
    small.policy = CounterTermPolicy::space_time;

    std::vector<ModelConfig> ladder;
    std::vector<double> sd;
    for (int j = 0; j <= halvings; ++j) {
        ModelConfig c = small;
        c.params.rho = cfg.params.rho / std::pow(2.0, j);
        out.rhos.push_back(c.params.rho);
        out.ladder_oracle.push_back(c1_closed_form(c.torus, c.params, c.zero_mode));
        sd.push_back(c.zero_mode ? std::sqrt(zero_cell_variance(c.torus, c.params)) : 0.0);
        ladder.push_back(c);
    }
    std::vector<std::vector<double>> samples(ladder.size());
    for (int i = 0; i < members; ++i) {
        std::mt19937_64 rng(member_seed(seed, static_cast<std::uint64_t>(i)));
        Field xi = sample_noise(cfg.torus, cfg.params, rng);
        std::normal_distribution<double> g(0.0, 1.0);
        double z = cfg.zero_mode ? g(rng) : 0.0;
        for (size_t j = 0; j < ladder.size(); ++j) {
            ModelRealization m = build_model(xi, sd[j] * z, ladder[j]);
            samples[j].push_back(m.c.at(1));
        }
    }
    for (const auto& s : samples) out.ladder_mc.push_back(mean_estimate(s));
    out.c1_mc = out.ladder_mc.front();
    out.c1_oracle = out.ladder_oracle.front();
    return out;
}

namespace {

GridPoint origin_point(const TorusSpec& s) { return GridPoint(static_cast<size_t>(s.rank()), 0); }

double field_scale(const Centering& c) {
    double s = 1.0;
    for (const auto& [b, row] : c.G.rows())
        for (const auto& [g, v] : row) s = std::max(s, CoeffTraits<Batch>::norm(v));
    return s;
}

}  // namespace

ExactMeasurement measure_exact(const ModelConfig& cfg, std::uint64_t seed, const std::vector<GridPoint>& points) {
    ExactMeasurement e;
    ModelRealization m = sample_model(cfg, seed);
    e.heat = m.pde_residual();
    {
        const Field& f = m.pi.at(MultiIndex::zero());
        double t = std::pow(cfg.params.rho * 8, 4), u = std::pow(cfg.params.L / 16, 4);
        Field lhs = semigroup(semigroup(f, t), u), rhs = semigroup(f, t + u);
        e.semigroup = (lhs - rhs).max_abs() / std::max(f.max_abs(), 1e-300);
    }
    StationaryModel s = stationary_model(m, cfg.centering_cutoff);
    Centering c = center(s, points);
    Centering o = center(s, {origin_point(m.spec)});
    for (size_t j = 0; j < c.size(); ++j) {
        auto cf = centered_fields(s, c, j);
        e.reexpansion = std::max(e.reexpansion, reexpansion_defect(s, c, j, cf));
        if (j < 3) {
            auto direct = centered_fields_direct(s, c.points[j]);
            for (const auto& b : s.rows) {
                Field a = cf.at(b).sample(), d = direct.at(b).sample();
                e.route_agreement = std::max(e.route_agreement, (a - d).max_abs() / std::max(1.0, a.max_abs()));
            }
        }
    }
    for (size_t j = 0; j + 2 < std::min<size_t>(points.size(), 5); ++j) {
        GroupCheck g = gamma_group_check(s, points[j], points[j + 1], points[j + 2]);
        e.group = std::max({e.group, g.group, g.identity});
        e.cocycle = std::max(e.cocycle, g.cocycle);
    }
    for (size_t j = 0; j < c.size(); ++j) {
        if (c.points[j] != origin_point(m.spec)) continue;
        Endo<double> g0 = gamma_at(c, j, o);
        e.identity_at_origin = std::max(e.identity_at_origin, (g0 - Endo<double>::identity(g0.row_keys())).max_norm());
    }
    StructureCheck st = structure_check(s, c, o);
    e.row_zero = st.row_zero;
    e.pp_block = st.pp_block;
    StationaryDelta sd = stationary_delta(s, default_direction(m.spec));
    RobustIdentity r = check_robust_identity(s, sd, c, dgamma_entries(s, sd, c));
    e.robust = r.residual;
    e.robust_control = r.control;
    return e;
}

TriangularMeasurement measure_triangular(const ModelConfig& cfg, std::uint64_t seed, const std::vector<GridPoint>& points) {
    TriangularMeasurement t;
    t.points = points.size();
    ModelRealization m = sample_model(cfg, seed);
    StationaryModel s = stationary_model(m, cfg.centering_cutoff);
    const ModelParams& p = s.params;
    Centering c = center(s, points);
    Centering o = center(s, {origin_point(m.spec)});
    const double scale = field_scale(c);
    StructureCheck st = structure_check(s, c, o);
    t.gamma_consistency = st.triangularity;
    t.sector = st.sector;
    for (size_t j = 0; j < c.size(); ++j) {
        Endo<double> g = gamma_at(c, j, o);
        for (const auto& [b, row] : g.rows())
            for (const auto& [col, v] : row) {
                if (b == col) continue;
                double a = std::abs(v) / scale;
                if (homogeneity(col, p) >= homogeneity(b, p)) t.gamma_homogeneity = std::max(t.gamma_homogeneity, a);
                if (precedence(col, p) >= precedence(b, p)) t.gamma_precedence = std::max(t.gamma_precedence, a);
            }
    }
    StationaryDelta sd = stationary_delta(s, default_direction(m.spec));
    Endo<Batch> dg = dgamma_entries(s, sd, c);
    Endo<Batch> full = dgamma_full(s, c, dg);
    double dscale = 1e-300;
    for (const auto& [b, row] : dg.rows())
        for (const auto& [col, v] : row) dscale = std::max(dscale, CoeffTraits<Batch>::norm(v));
    const double bound = 2 + p.s_d();
    for (const auto* e : {&dg, &full})
        for (const auto& [b, row] : e->rows())
            for (const auto& [col, v] : row) {
                double a = CoeffTraits<Batch>::norm(v) / dscale;
                if (precedence(col, p) >= precedence(b, p)) t.dgamma_precedence = std::max(t.dgamma_precedence, a);
                if (b.is_zero() && !(col.is_pp() && col.pp_index().weight() < bound))
                    t.dgamma_row_zero = std::max(t.dgamma_row_zero, a);
                if (col.poly_length() == 0) t.dgamma_constants = std::max(t.dgamma_constants, a);
            }
    return t;
}

std::vector<DecayMeasurement> measure_decay(const ModelConfig& cfg, std::uint64_t seed, const std::vector<GridPoint>& points,
                                            const std::vector<double>& rs, const std::vector<MultiIndex>& betas) {
    ModelRealization m = sample_model(cfg, seed);
    StationaryModel s = stationary_model(m, cfg.centering_cutoff);
    Centering c = center(s, points);
    StationaryDelta sd = stationary_delta(s, default_direction(m.spec));
    Endo<Batch> dg = dgamma_entries(s, sd, c);
    std::vector<DecayMeasurement> out;
    for (const auto& b : betas) out.push_back({b, modelled_decay_fit(s, sd, c, dg, b, rs)});
    return out;
}

KernelMeasurement measure_change_of_kernel(const TorusSpec& s, const ModelParams& p, std::uint64_t seed, double r) {
    KernelMeasurement k;
    Field f = band_limit(sample_noise(s, p, seed));
    SchwartzKernel psi = SchwartzKernel::modified(0.5);
    std::vector<int> x{s.N0 / 3, s.N / 5};
    double direct = kernel_convolve(f, psi, r, x).value;
    double scale = kernel_convolve_field(f, psi, r).rms();
    k.relative_error = std::abs(change_of_kernel(f, psi, r, x, 1).value - direct) / scale;
    k.monotone = true;
    for (int nodes : {8, 16, 32, 64, 128}) {
        Quadrature q;
        q.nodes = nodes;
        q.fail_tol = 1e300;
        double err = std::abs(change_of_kernel(f, psi, r, x, 1, q).value - direct) / scale;
        if (!k.refinement_errors.empty() && !(err < k.refinement_errors.back())) k.monotone = false;
        k.nodes.push_back(nodes);
        k.refinement_errors.push_back(err);
    }
    return k;
}

std::vector<GridPoint> spread_points(const TorusSpec& s, int count, std::uint64_t seed) {
    std::vector<GridPoint> pts{origin_point(s)};
    std::mt19937_64 rng(seed);
    auto shape = s.shape();
    while (static_cast<int>(pts.size()) < count) {
        GridPoint x;
        for (int n : shape) x.push_back(std::uniform_int_distribution<int>(-n / 2, n / 2 - 1)(rng));
        if (std::find(pts.begin(), pts.end(), x) == pts.end()) pts.push_back(x);
    }
    return pts;
}

}  // namespace mim
