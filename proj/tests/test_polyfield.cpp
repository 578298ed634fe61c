#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mim/algebra.hpp"
#include "mim/polyfield.hpp"

#include <cmath>
#include <numbers>

using namespace mim;

namespace {

constexpr double kPi = std::numbers::pi;

TorusSpec grid() {
    TorusSpec s;
    s.N = 16;
    s.N0 = 128;
    return s;
}

Field smooth_random(const TorusSpec& s, std::uint64_t seed) {
    ModelParams p;
    return semigroup(sample_noise(s, p, seed), 1e-4);
}

// L applied to sum (y-a)^m u_m by the product rule, sampled on the fundamental cell.
Field heat_of(const PolyField& u) {
    const auto& s = u.spec();
    Field out(s);
    SpaceIndex e0 = SpaceIndex::unit(s.d, 0);
    for (const auto& [m, f] : u.terms()) {
        Field lf = apply_heat(f);
        std::vector<Field> d1;
        for (int i = 1; i <= s.d; ++i) d1.push_back(spectral_derivative(f, SpaceIndex::unit(s.d, i)));
        for (size_t k = 0; k < out.size(); ++k) {
            auto y = point_coords(s, f.unflat(k));
            for (size_t a = 0; a < y.size(); ++a) y[a] -= u.anchor()[a];
            double v = monomial(y, m) * lf[k];
            if (m[0] > 0) v += m[0] * monomial(y, m - e0) * f[k];
            for (int i = 1; i <= s.d; ++i) {
                int mi = m[i];
                SpaceIndex ei = SpaceIndex::unit(s.d, i);
                if (mi >= 2) v -= mi * (mi - 1) * monomial(y, m - ei - ei) * f[k];
                if (mi >= 1) v -= 2 * mi * monomial(y, m - ei) * d1[static_cast<size_t>(i - 1)][k];
            }
            out[k] += v;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("heat inverse of polynomially weighted fields") {
    auto s = grid();
    Field f = smooth_random(s, 1);
    for (auto m : {SpaceIndex({0, 1}), SpaceIndex({0, 2}), SpaceIndex({1, 0}), SpaceIndex({1, 1}), SpaceIndex({0, 3})}) {
        for (std::vector<double> a : {std::vector<double>{0.0, 0.0}, std::vector<double>{0.3, 0.6}}) {
            PolyField in(s, a);
            in.add_term(m, f);
            PolyField u = in.heat_inverse();
            Field lhs = heat_of(u);
            Field rhs = in.sample();
            CHECK((lhs - rhs).max_abs() <= 1e-9 * rhs.max_abs());
        }
    }
}

TEST_CASE("heat inverse does not depend on the anchor") {
    auto s = grid();
    Field f = smooth_random(s, 2);
    PolyField a(s, {0.0, 0.0});
    a.add_term(SpaceIndex({0, 2}), f);
    PolyField b = a.reanchored({0.25, 0.4});
    CHECK((a.sample() - b.sample()).max_abs() <= 1e-12 * a.sample().max_abs());
    Field ua = a.heat_inverse().sample();
    Field ub = b.heat_inverse().sample();
    CHECK((ua - ub).max_abs() <= 1e-9 * ua.max_abs());
}

TEST_CASE("products and linear combinations") {
    auto s = grid();
    Field f = smooth_random(s, 3), g = smooth_random(s, 4);
    PolyField a = PolyField::monomial(s, {0.0, 0.0}, SpaceIndex({0, 1})) * PolyField::periodic(f);
    PolyField b = PolyField::monomial(s, {0.1, 0.2}, SpaceIndex({1, 0})) * PolyField::periodic(g, {0.1, 0.2});
    Field pa = a.sample(), pb = b.sample();
    CHECK(((a * b).sample() - pa * pb).max_abs() <= 1e-12 * (pa * pb).max_abs());
    CHECK(((a + b).sample() - (pa + pb)).max_abs() <= 1e-12 * (pa + pb).max_abs());
    CHECK(((a - b * 2.0).sample() - (pa - pb * 2.0)).max_abs() <= 1e-12 * pa.max_abs());
    CHECK(a.degree() == 1);
    CHECK(b.degree() == 2);
}

TEST_CASE("jets of a weighted trigonometric mode") {
    auto s = grid();
    double q0 = 2 * kPi, q1 = 4 * kPi;
    Field f = Field::from_function(s, [&](const auto& y) { return std::cos(q0 * y[0] + q1 * y[1]); });
    std::vector<double> a{0.05, 0.1};
    PolyField u(s, a);
    u.add_term(SpaceIndex({0, 1}), f);
    std::vector<GridPoint> pts{{3, 5}, {70, 11}, {-4, 19}};
    auto jets = u.jets_at({SpaceIndex({0, 0}), SpaceIndex({0, 1}), SpaceIndex({0, 2}), SpaceIndex({1, 0})}, pts);
    for (size_t p = 0; p < pts.size(); ++p) {
        auto y = point_coords(s, pts[p]);
        double ph = q0 * y[0] + q1 * y[1], w = y[1] - a[1];
        CHECK(jets[SpaceIndex({0, 0})][p] == doctest::Approx(w * std::cos(ph)).epsilon(1e-10));
        CHECK(jets[SpaceIndex({0, 1})][p] == doctest::Approx(std::cos(ph) - w * q1 * std::sin(ph)).epsilon(1e-10));
        CHECK(jets[SpaceIndex({0, 2})][p] ==
              doctest::Approx((-2 * q1 * std::sin(ph) - w * q1 * q1 * std::cos(ph)) / 2).epsilon(1e-10));
        CHECK(jets[SpaceIndex({1, 0})][p] == doctest::Approx(-w * q0 * std::sin(ph)).epsilon(1e-10));
    }
}

TEST_CASE("semigroup kernel moments") {
    double t = 0.37;
    CHECK(semigroup_moment(1, SpaceIndex({0, 0}), t) == doctest::Approx(1.0));
    for (auto k : {SpaceIndex({1, 0}), SpaceIndex({0, 1}), SpaceIndex({0, 2}), SpaceIndex({1, 1}), SpaceIndex({0, 3})})
        CHECK(std::abs(semigroup_moment(1, k, t)) < 1e-14);
    CHECK(semigroup_moment(1, SpaceIndex({2, 0}), t) == doctest::Approx(2 * t));
    CHECK(semigroup_moment(1, SpaceIndex({0, 4}), t) == doctest::Approx(-24 * t));
    // d = 2: int w1^2 w2^2 psi = d^2_{q1} d^2_{q2} exp(-t (q1^2+q2^2)^2) at 0 = -8 t
    CHECK(semigroup_moment(2, SpaceIndex({0, 2, 2}), t) == doctest::Approx(-8 * t));
}

TEST_CASE("convolution of weighted modes against closed forms") {
    auto s = grid();
    double q0 = 2 * kPi, q1 = 4 * kPi;
    std::vector<GridPoint> pts{{3, 5}, {70, 11}};
    std::vector<double> rs{0.12, 0.2};
    {
        Field f = Field::from_function(s, [&](const auto& y) { return std::cos(q1 * y[1]); });
        PolyField u(s, {0.0, 0.0});
        u.add_term(SpaceIndex({0, 1}), f);
        auto c = u.convolve_at(rs, pts);
        for (double r : rs) {
            double t = std::pow(r, 4);
            for (size_t p = 0; p < pts.size(); ++p) {
                double x1 = point_coords(s, pts[p])[1];
                double expect = std::exp(-t * std::pow(q1, 4)) *
                                (x1 * std::cos(q1 * x1) - 4 * t * std::pow(q1, 3) * std::sin(q1 * x1));
                CHECK(c[r][p] == doctest::Approx(expect).epsilon(1e-10));
            }
        }
    }
    {
        Field f = Field::from_function(s, [&](const auto& y) { return std::cos(q0 * y[0]); });
        PolyField u(s, {0.0, 0.0});
        u.add_term(SpaceIndex({1, 0}), f);
        auto c = u.convolve_at(rs, pts);
        for (double r : rs) {
            double t = std::pow(r, 4);
            for (size_t p = 0; p < pts.size(); ++p) {
                double x0 = point_coords(s, pts[p])[0];
                double expect = std::exp(-t * q0 * q0) * (x0 * std::cos(q0 * x0) - 2 * t * q0 * std::sin(q0 * x0));
                CHECK(c[r][p] == doctest::Approx(expect).epsilon(1e-10));
            }
        }
    }
    // a pure polynomial convolves to its moments
    PolyField mono = PolyField::monomial(s, {0.0, 0.0}, SpaceIndex({0, 4}));
    double r = 0.15, t = std::pow(r, 4);
    auto c = mono.convolve_at({r}, {{0, 0}});
    CHECK(c[r][0] == doctest::Approx(-24 * t).epsilon(1e-10));
}
