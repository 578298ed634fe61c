#pragma once

#include "mim/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace mim {

// Splittable counter scheme: member i of master seed m gets an independent 64-bit stream seed.
std::uint64_t member_seed(std::uint64_t master, std::uint64_t member);

struct Estimate {
    double value = 0;
    double stderr = 0;
    int n = 0;
};

// mean and standard error of i.i.d. samples
Estimate mean_estimate(const std::vector<double>& xs);
// E^{1/p} from per-member samples of |X|^p, standard error by the delta method
Estimate root_moment_estimate(const std::vector<double>& abs_p, int p);

struct EnsembleOptions {
    int members = 256;
    std::uint64_t seed = 1;
    int moment_p = 2;
    std::vector<double> rs;
    // translation averaging lattice
    int time_stride = 4;
    int space_stride = 1;
    // base points tracked individually for base-point independence
    std::vector<GridPoint> fixed_points;
    // base points for the Gamma entry statistics
    std::vector<GridPoint> gamma_points;
    // worker threads across members
    int threads = 1;
    std::function<void(int)> progress;
};

struct EnsembleResult {
    std::vector<double> rs;
    int moment_p = 2;
    int members = 0;
    std::vector<MultiIndex> rows;
    // E^{1/p} |(Pi_{x beta})_r(x)|^p, averaged over the lattice and the ensemble
    std::map<MultiIndex, std::vector<Estimate>> pi, pi_minus;
    // the same per fixed base point: [beta][point][r]
    std::map<MultiIndex, std::vector<std::vector<Estimate>>> pi_fixed, pi_minus_fixed;
    // signed ensemble mean of (Pi^-_{0 beta})_r(0)
    std::map<MultiIndex, std::vector<Estimate>> origin_mean;
    // E^{1/p} |(Gamma*_x)_beta^gamma|^p per gamma point
    std::vector<GridPoint> gamma_points;
    std::map<std::pair<MultiIndex, MultiIndex>, std::vector<Estimate>> gamma;
    // per-member counterterms
    std::map<int, std::vector<double>> c;
};

EnsembleResult run_ensemble(const ModelConfig& cfg, const EnsembleOptions& opt);

// log-log slope of the estimates of beta against r
SlopeFit scaling_slope(const std::vector<double>& rs, const std::vector<Estimate>& v);

// base points at parabolic distance 2^k h from 0, h the spatial spacing
std::vector<GridPoint> dyadic_base_points(const TorusSpec& s, int count);

}  // namespace mim
