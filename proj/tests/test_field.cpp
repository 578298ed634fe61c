#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mim/field.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mim;

namespace {

constexpr double kPi = std::numbers::pi;

TorusSpec small() {
    TorusSpec s;
    s.N = 16;
    s.N0 = 64;
    return s;
}

Field rough(const TorusSpec& s, std::uint64_t seed) {
    ModelParams p;
    return sample_noise(s, p, seed);
}

// direct trigonometric sum, used as an oracle for the spectral code
double mode(const std::vector<double>& y, int k0, int k1, double L) {
    return std::cos(2 * kPi * k0 * y[0] / (L * L) + 2 * kPi * k1 * y[1] / L);
}

}  // namespace

TEST_CASE("torus validation") {
    TorusSpec s;
    CHECK(s.validate().empty());
    s.N = 24;
    CHECK_FALSE(s.validate().empty());
    s = small();
    s.N0 = 1;
    CHECK_FALSE(s.validate().empty());
}

TEST_CASE("Plancherel") {
    auto s = small();
    Field f = rough(s, 3);
    Spectrum sp = fft(f);
    double parseval = 0;
    for (size_t i = 0; i < sp.size(); ++i) parseval += sp.multiplicity(i) * std::norm(sp.data()[i]);
    CHECK(std::abs(parseval - f.rms() * f.rms()) <= 1e-10 * f.rms() * f.rms());
    Field back = ifft(sp);
    CHECK((back - f).max_abs() <= 1e-12 * f.max_abs());
}

TEST_CASE("heat solve inverts the heat operator up to the mean") {
    auto s = small();
    Field f = band_limit(rough(s, 5) * rough(s, 6));
    Field u = heat_solve(f);
    Field res = apply_heat(u) - f;
    for (auto& v : res.values()) v += f.mean();
    CHECK(res.max_abs() <= 1e-10 * f.max_abs());
    CHECK(std::abs(u.mean()) <= 1e-12 * u.max_abs());
}

TEST_CASE("semigroup law and commuting multipliers") {
    auto s = small();
    Field f = rough(s, 7);
    double t1 = 3e-5, t2 = 7e-5;
    Field a = semigroup(semigroup(f, t1), t2);
    Field b = semigroup(f, t1 + t2);
    CHECK((a - b).max_abs() <= 1e-10 * f.max_abs());
    Field c = heat_solve(mollify(f, 0.05));
    Field d = mollify(heat_solve(f), 0.05);
    CHECK((c - d).max_abs() <= 1e-12 * c.max_abs());
    SpaceIndex e1({0, 1});
    Field g = spectral_derivative(semigroup(f, t1), e1);
    Field h = semigroup(spectral_derivative(f, e1), t1);
    CHECK((g - h).max_abs() <= 1e-12 * g.max_abs());
}

TEST_CASE("spectral derivative of a trigonometric mode") {
    auto s = small();
    Field f = Field::from_function(s, [&](const auto& y) { return mode(y, 2, 3, s.L); });
    Field dx = spectral_derivative(f, SpaceIndex({0, 1}));
    Field dt = spectral_derivative(f, SpaceIndex({1, 0}));
    Field expect_x = Field::from_function(s, [&](const auto& y) {
        return -2 * kPi * 3 * std::sin(2 * kPi * 2 * y[0] + 2 * kPi * 3 * y[1]);
    });
    Field expect_t = Field::from_function(s, [&](const auto& y) {
        return -2 * kPi * 2 * std::sin(2 * kPi * 2 * y[0] + 2 * kPi * 3 * y[1]);
    });
    CHECK((dx - expect_x).max_abs() <= 1e-10 * expect_x.max_abs());
    CHECK((dt - expect_t).max_abs() <= 1e-10 * expect_t.max_abs());
}

TEST_CASE("heat solve of a mode against the closed form") {
    auto s = small();
    int k0 = 1, k1 = 2;
    Field f = Field::from_function(s, [&](const auto& y) { return mode(y, k0, k1, s.L); });
    Field u = heat_solve(f);
    double q0 = 2 * kPi * k0, q1 = 2 * kPi * k1;
    // u = Re(e^{iqy} / (i q0 + q1^2))
    double den = q0 * q0 + q1 * q1 * q1 * q1;
    Field expect = Field::from_function(s, [&](const auto& y) {
        double ph = q0 * y[0] + q1 * y[1];
        return (q1 * q1 * std::cos(ph) + q0 * std::sin(ph)) / den;
    });
    CHECK((u - expect).max_abs() <= 1e-12);
}

TEST_CASE("noise is deterministic, centered and has the prescribed covariance") {
    auto s = small();
    ModelParams p;
    Field a = sample_noise(s, p, 42), b = sample_noise(s, p, 42), c = sample_noise(s, p, 43);
    CHECK((a - b).max_abs() == 0.0);
    CHECK((a - c).max_abs() > 0.0);
    CHECK(std::abs(a.mean()) <= 1e-12 * a.max_abs());

    // E <xi, zeta>^2 = V |q|^{-2s} / 2 for zeta = cos(q y)
    int k0 = 1, k1 = 1;
    double q0 = 2 * kPi * k0, q1 = 2 * kPi * k1;
    double q4 = q0 * q0 + q1 * q1 * q1 * q1;
    double expect = s.volume() * std::pow(q4, -p.s_d() / 2) / 2;
    Field zeta = Field::from_function(s, [&](const auto& y) { return mode(y, k0, k1, s.L); });
    const int members = 2000;
    double acc = 0, acc2 = 0;
    std::mt19937_64 rng(9);
    for (int m = 0; m < members; ++m) {
        Field xi = sample_noise(s, p, rng);
        double pair = (xi * zeta).mean() * s.volume();
        acc += pair * pair;
        acc2 += pair * pair * pair * pair;
    }
    double mean = acc / members;
    double se = std::sqrt((acc2 / members - mean * mean) / members);
    CHECK(std::abs(mean - expect) <= 5 * se);
}

TEST_CASE("kernel convolution of a mode") {
    auto s = small();
    int k0 = 1, k1 = 2;
    Field f = Field::from_function(s, [&](const auto& y) { return mode(y, k0, k1, s.L); });
    double q0 = 2 * kPi * k0, q1 = 2 * kPi * k1, r = 0.15;
    double damp = std::exp(-(std::pow(r, 4) * (q0 * q0 + std::pow(q1, 4))));
    std::vector<int> x{5, 3};
    auto pv = kernel_convolve(f, SchwartzKernel::semigroup_kernel(), r, x);
    CHECK(pv.value == doctest::Approx(damp * mode(f.coords(x), k0, k1, s.L)).epsilon(1e-12));
    CHECK_FALSE(pv.below_resolution);
    CHECK(kernel_convolve(f, SchwartzKernel::semigroup_kernel(), 0.01, x).below_resolution);
}

TEST_CASE("change of kernel reproduces direct convolution") {
    TorusSpec s;
    s.N = 32;
    s.N0 = 256;
    Field f = rough(s, 11);
    std::vector<int> x{17, 9};
    for (const auto& psi : {SchwartzKernel::semigroup_kernel(), SchwartzKernel::modified(0.5)}) {
        for (double r : {0.08, 0.15}) {
            double direct = kernel_convolve(f, psi, r, x).value;
            double scale = kernel_convolve_field(f, psi, r).rms();
            for (int k : {0, 1, 2}) {
                auto rc = change_of_kernel(f, psi, r, x, k);
                CHECK(std::abs(rc.value - direct) <= 1e-3 * scale);
                CHECK(rc.residual_estimate < 1e-2);
            }
            // refinement lowers the error monotonically
            double prev = 1e300;
            for (int nodes : {8, 16, 32, 64, 128}) {
                Quadrature q;
                q.nodes = nodes;
                q.fail_tol = 1e9;
                double err = std::abs(change_of_kernel(f, psi, r, x, 1, q).value - direct);
                CHECK(err < prev);
                prev = err;
            }
        }
    }
}

TEST_CASE("change of kernel reports a failing rule") {
    TorusSpec s;
    s.N = 32;
    s.N0 = 256;
    Field f = rough(s, 12);
    Quadrature q;
    q.nodes = 4;
    q.fail_tol = 1e-6;
    CHECK_THROWS_AS(change_of_kernel(f, SchwartzKernel::semigroup_kernel(), 0.1, {0, 0}, 1, q), QuadratureError);
    CHECK_THROWS_AS(change_of_kernel(f, SchwartzKernel::semigroup_kernel(), 0.1, {0, 0}, -1), std::invalid_argument);
}

TEST_CASE("parabolic distance uses the minimal image") {
    TorusSpec s;
    CHECK(parabolic_distance(s, {0.0, 0.9}) == doctest::Approx(0.1));
    CHECK(parabolic_distance(s, {0.0625, 0.0}) == doctest::Approx(0.25));
    CHECK(parabolic_distance(s, {0.99, 0.0}) == doctest::Approx(std::sqrt(0.01)));
    CHECK(parabolic_distance({0.0, -0.3}) == doctest::Approx(0.3));
}

TEST_CASE("snapshot round trip and slice export") {
    auto s = small();
    Field f = rough(s, 21);
    std::stringstream ss;
    f.write_snapshot(ss);
    Field g = Field::read_snapshot(ss);
    CHECK(g.spec() == s);
    CHECK((g - f).max_abs() == 0.0);
    std::stringstream bad("garbage");
    CHECK_THROWS(Field::read_snapshot(bad));
    std::stringstream csv;
    f.write_slice_csv(csv, 0);
    std::string line;
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == s.N + 1);
}
