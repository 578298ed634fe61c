#pragma once

#include "mim/algebra.hpp"
#include "mim/polyfield.hpp"
#include "mim/recursion.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mim {

enum class CounterTermPolicy { space_time, closed_form, fixed };

struct ModelConfig {
    ModelParams params;
    TorusSpec torus;
    // precedence truncation of the zero-decorated sector stored on the grid
    double cutoff = 10.5;
    // homogeneity bound of the indices that get centered
    double centering_cutoff = 3.1;
    CounterTermPolicy policy = CounterTermPolicy::space_time;
    std::map<int, double> fixed_c;
    // add a Gaussian constant carrying the variance of the zero Fourier cell
    bool zero_mode = true;

    std::string validate() const;
};

struct ModelRealization {
    ModelParams params;
    TorusSpec spec;
    Field xi;  // mollified noise
    double zero_mode = 0;
    std::vector<MultiIndex> order;
    std::map<MultiIndex, Field> pi, pi_minus;
    std::map<int, double> c;

    // max over beta of |L pi - (P pi_minus - <pi_minus>)| / |pi_minus|, P the band limit
    double pde_residual() const;
};

std::vector<MultiIndex> periodic_sector(const ModelParams& p, double cutoff);

// int over the zero Fourier cell of |q|^{-2s} exp(-2 rho^4 |q|^4) / |q|^4 dq / (2 pi)^{1+d}
double zero_cell_variance(const TorusSpec& s, const ModelParams& p);
// -3 E Pi_0^2 under the lattice spectral measure; max_wavenumber >= 0 restricts all |k_a|
double c1_closed_form(const TorusSpec& s, const ModelParams& p, bool zero_mode = true, int max_wavenumber = -1);

ModelRealization build_model(const Field& xi_raw, double zero_mode, const ModelConfig& cfg);
ModelRealization sample_model(const ModelConfig& cfg, std::uint64_t seed);
double sample_zero_mode(const ModelConfig& cfg, std::mt19937_64& rng);

// Reference model on the covering space: Pi_{delta_n} = y^n, Pi_beta = L^{-1} Pi^-_beta in the torus gauge.
struct StationaryModel {
    ModelParams params;
    TorusSpec spec;
    std::vector<MultiIndex> rows;  // non-pp indices below the centering bound, precedence order
    std::vector<SpaceIndex> pp;    // n with |n| below the centering bound
    std::map<MultiIndex, PolyField> pi, pi_minus;
    std::map<int, double> c;
    Field xi;
};

std::vector<MultiIndex> centering_rows(const ModelParams& p, double bound);
std::vector<SpaceIndex> centering_pp(const ModelParams& p, double bound);
StationaryModel stationary_model(const ModelRealization& m, double bound);

// Re-expansion of a reference model around base points: reference = G Pi_x with Pi_x centered.
struct Centering {
    std::vector<GridPoint> points;
    std::vector<MultiIndex> rows;
    std::vector<SpaceIndex> pp;
    Endo<Batch> G;
    // K[gamma][n] = (1/n!) d^n Pi_{x gamma}(x)
    std::map<MultiIndex, std::map<SpaceIndex, Batch>> K;

    size_t size() const { return points.size(); }
};

class DegenerateJetError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

Centering center(const std::map<MultiIndex, PolyField>& reference, const std::vector<double>& reference_anchor,
                 const std::vector<MultiIndex>& rows, const std::vector<SpaceIndex>& pp, const ModelParams& p,
                 const std::vector<GridPoint>& points);
Centering center(const StationaryModel& m, const std::vector<GridPoint>& points);

Endo<double> slice(const Endo<Batch>& e, size_t j);
// all entries of row beta from the product formula using the final substitution columns
Endo<Batch> full_product_entries(const Centering& c, const ModelParams& p);

// Gamma*_x = G_0^{-1} G_x, the identity at the origin
Endo<double> gamma_at(const Centering& c, size_t j, const Centering& origin);

// Pi_x by subtracting re-expansion terms from the reference
std::map<MultiIndex, PolyField> centered_fields(const StationaryModel& m, const Centering& c, size_t j);
// Pi_x directly from the recursion with Pi_{x delta_n} = (y - x)^n and jet subtraction
std::map<MultiIndex, PolyField> centered_fields_direct(const StationaryModel& m, const GridPoint& x);

// max over beta of |Pi_beta - sum_gamma G_beta^gamma Pi_{x gamma}| / scale on the grid
double reexpansion_defect(const StationaryModel& m, const Centering& c, size_t j,
                          const std::map<MultiIndex, PolyField>& centered);

struct GroupCheck {
    double identity = 0;  // G_x^{-1} G_x recomputed at x' = x
    double group = 0;     // G_x^{-1} G_x' against direct re-expansion
    double cocycle = 0;
};
GroupCheck gamma_group_check(const StationaryModel& m, const GridPoint& x, const GridPoint& x1, const GridPoint& x2);

// translation-variant check of strict triangularity and of the sector statements
struct StructureCheck {
    double triangularity = 0;
    double sector = 0;
    double row_zero = 0;
    double pp_block = 0;
    double scale = 1;
};
StructureCheck structure_check(const StationaryModel& m, const Centering& c, const Centering& origin);

// values of (Pi_{x beta})_r(x) and (Pi^-_{x beta})_r(x) at every point of the centering
struct CenteredConvolutions {
    std::map<MultiIndex, std::map<double, Batch>> pi, pi_minus;
};
CenteredConvolutions centered_convolutions(const StationaryModel& m, const Centering& c, const std::vector<double>& rs);

// Malliavin derivative in a fixed direction
struct MalliavinData {
    Field direction;  // raw direction
    Field direction_rho;
    std::map<MultiIndex, Field> delta_pi, delta_pi_minus;
};
MalliavinData delta_model(const ModelRealization& m, const Field& direction);

struct StationaryDelta {
    Field direction_rho;
    std::map<MultiIndex, PolyField> delta_pi, delta_pi_minus;
};
StationaryDelta stationary_delta(const StationaryModel& m, const Field& direction);

Endo<Batch> dgamma_entries(const StationaryModel& m, const StationaryDelta& dm, const Centering& c);
// product-formula entries of every (beta, gamma) with the final columns, for triangularity checks
Endo<Batch> dgamma_full(const StationaryModel& m, const Centering& c, const Endo<Batch>& dg);

struct RobustIdentity {
    double residual = 0;  // relative to scale
    double control = 0;   // with the identity in place of dGamma, relative to scale
    double scale = 0;
};
RobustIdentity check_robust_identity(const StationaryModel& m, const StationaryDelta& dm, const Centering& c,
                                     const Endo<Batch>& dg);

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double stderr_slope = 0;
    bool exact_zero = false;
};
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct DecayFit {
    SlopeFit modelled;   // with dGamma
    SlopeFit control;    // dGamma replaced by zero
    std::vector<double> rs, modelled_rms, control_rms;
};
DecayFit modelled_decay_fit(const StationaryModel& m, const StationaryDelta& dm, const Centering& c,
                            const Endo<Batch>& dg, const MultiIndex& beta, const std::vector<double>& rs);

// r in [lo, hi] on the grid lo * 2^{j / per_octave}
std::vector<double> dyadic_scales(double lo, double hi, int per_octave);
// the default window [8 rho, L/8]; throws if fewer than 4 scales fit
std::vector<double> default_scales(const ModelParams& p);

// grid points on a sub-lattice with the given strides
std::vector<GridPoint> lattice_points(const TorusSpec& s, int time_stride, int space_stride);

// symmetry class of an index under y_1 -> -y_1 and xi -> -xi: odd iff the law of Pi^-_beta is odd
bool odd_in_law(const MultiIndex& b);

}  // namespace mim
