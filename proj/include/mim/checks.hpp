#pragma once

#include "mim/config.hpp"
#include "mim/stats.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace mim {

// One named comparison of a measured value against a bound.
struct Assertion {
    std::string name;
    double value = 0;
    double bound = 0;
    bool passed = false;
    std::string detail;
};

struct CheckReport {
    std::vector<Assertion> items;

    // passes iff value <= bound
    void at_most(const std::string& name, double value, double bound, const std::string& detail = "");
    // passes iff value >= bound
    void at_least(const std::string& name, double value, double bound, const std::string& detail = "");
    void require(const std::string& name, bool ok, const std::string& detail = "");
    void merge(const CheckReport& o);
    bool passed() const;
    nlohmann::json to_json() const;
};

// Smooth deterministic direction built from the lowest Fourier modes.
Field default_direction(const TorusSpec& s);

struct RenormMeasurement {
    Estimate c1_mc;
    double c1_oracle = 0;
    std::vector<double> rhos;
    // ensemble means with common random numbers, and the matching lattice sums
    std::vector<Estimate> ladder_mc;
    std::vector<double> ladder_oracle;
};
RenormMeasurement measure_renorm(const ModelConfig& cfg, int members, std::uint64_t seed, int halvings = 3);

struct ExactMeasurement {
    double heat = 0;
    double semigroup = 0;
    double reexpansion = 0;
    double route_agreement = 0;
    double group = 0;
    double cocycle = 0;
    double identity_at_origin = 0;
    double row_zero = 0;
    double pp_block = 0;
    double robust = 0;
    double robust_control = 0;
};
ExactMeasurement measure_exact(const ModelConfig& cfg, std::uint64_t seed, const std::vector<GridPoint>& points);

struct TriangularMeasurement {
    size_t points = 0;
    // Gamma: strict triangularity in homogeneity and precedence, sector statements
    double gamma_homogeneity = 0;
    double gamma_precedence = 0;
    double gamma_consistency = 0;
    double sector = 0;
    // dGamma: strict precedence triangularity, row 0 support, vanishing on 1 and z_3
    double dgamma_precedence = 0;
    double dgamma_row_zero = 0;
    double dgamma_constants = 0;
};
TriangularMeasurement measure_triangular(const ModelConfig& cfg, std::uint64_t seed, const std::vector<GridPoint>& points);

struct DecayMeasurement {
    MultiIndex beta;
    DecayFit fit;
};
std::vector<DecayMeasurement> measure_decay(const ModelConfig& cfg, std::uint64_t seed, const std::vector<GridPoint>& points,
                                            const std::vector<double>& rs, const std::vector<MultiIndex>& betas);

struct KernelMeasurement {
    double relative_error = 0;
    std::vector<int> nodes;
    std::vector<double> refinement_errors;
    bool monotone = false;
};
KernelMeasurement measure_change_of_kernel(const TorusSpec& s, const ModelParams& p, std::uint64_t seed, double r);

// spread-out base points, the first at the origin
std::vector<GridPoint> spread_points(const TorusSpec& s, int count, std::uint64_t seed);

}  // namespace mim
