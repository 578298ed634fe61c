#pragma once

#include "mim/grading.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace mim {

using cplx = std::complex<double>;

// Periodic space-time lattice. Axis 0 is time with period L^2, axes 1..d are space with period L.
struct TorusSpec {
    int d = 1;
    double L = 1.0;
    int N = 32;
    int N0 = 4096;

    int rank() const { return d + 1; }
    std::vector<int> shape() const;
    size_t size() const;
    double period(int axis) const { return axis == 0 ? L * L : L; }
    double spacing(int axis) const { return period(axis) / (axis == 0 ? N0 : N); }
    double volume() const;
    std::string validate() const;
    bool operator==(const TorusSpec&) const = default;
};

// Real-valued lattice field, row-major with time as the slowest axis.
class Field {
public:
    Field() = default;
    explicit Field(const TorusSpec& s, double fill = 0.0) : spec_(s), v_(s.size(), fill) {}
    Field(const TorusSpec& s, std::vector<double> values);

    static Field from_function(const TorusSpec& s, const std::function<double(const std::vector<double>&)>& f);

    const TorusSpec& spec() const { return spec_; }
    size_t size() const { return v_.size(); }
    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }
    const std::vector<double>& values() const { return v_; }
    std::vector<double>& values() { return v_; }

    // grid multi-index <-> flat index
    size_t flat(const std::vector<int>& idx) const;
    std::vector<int> unflat(size_t i) const;
    // physical coordinates of a grid point
    std::vector<double> coords(const std::vector<int>& idx) const;
    double at(const std::vector<int>& idx) const { return v_[flat(idx)]; }

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(const Field& o);
    Field& operator*=(double a);
    Field& add_scaled(const Field& o, double a);
    Field operator+(const Field& o) const { Field r = *this; return r += o; }
    Field operator-(const Field& o) const { Field r = *this; return r -= o; }
    Field operator*(const Field& o) const { Field r = *this; return r *= o; }
    Field operator*(double a) const { Field r = *this; return r *= a; }

    double mean() const;
    double max_abs() const;
    // sqrt of the space-time average of the square
    double rms() const;

    // binary snapshot: header (d, N, N0, L, endianness tag) then row-major doubles
    void write_snapshot(std::ostream& os) const;
    static Field read_snapshot(std::istream& is);
    // CSV of the spatial slice at time index t (d = 1) or along axis 1 otherwise
    void write_slice_csv(std::ostream& os, int t) const;

private:
    TorusSpec spec_;
    std::vector<double> v_;
};

// Wave vector q = (q0, q1, ..., qd) in physical units.
struct WaveVector {
    std::vector<double> q;
    double space_sq() const;
    // |q|^4 = q0^2 + (sum qi^2)^2
    double norm4() const;
    double norm() const;
    bool is_zero() const;
};

// Half-complex spectrum of a real field, normalized as f_q = (1/G) sum_y f(y) e^{-iqy}.
class Spectrum {
public:
    explicit Spectrum(const TorusSpec& s);
    const TorusSpec& spec() const { return spec_; }
    std::vector<cplx>& data() { return c_; }
    const std::vector<cplx>& data() const { return c_; }
    size_t size() const { return c_.size(); }
    // integer wave numbers of entry i
    std::vector<int> wavenumbers(size_t i) const;
    WaveVector wave_vector(size_t i) const;
    // true if some axis sits at its Nyquist index
    bool nyquist(size_t i) const;
    // number of conjugate copies represented by entry i (1 or 2)
    int multiplicity(size_t i) const;

private:
    TorusSpec spec_;
    std::vector<int> half_shape_;
    std::vector<cplx> c_;
};

// Wave vectors and Nyquist flags of every half-spectrum entry, cached per grid.
struct ModeTable {
    size_t rank = 0;
    std::vector<double> q;      // entry i occupies q[i * rank, (i + 1) * rank)
    std::vector<char> nyquist;
    size_t size() const { return nyquist.size(); }
    void load(size_t i, WaveVector& w) const { w.q.assign(q.begin() + i * rank, q.begin() + (i + 1) * rank); }
};
const ModeTable& mode_table(const TorusSpec& s);

Spectrum fft(const Field& f);
Field ifft(const Spectrum& s);

using Symbol = std::function<cplx(const WaveVector&)>;

// Fourier multiplier; Nyquist planes are zeroed so all multipliers commute exactly.
Field apply_symbol(const Field& f, const Symbol& m);
// removes Nyquist content
Field band_limit(const Field& f);

Field white_noise(const TorusSpec& s, std::mt19937_64& rng);
// centered Gaussian field with E|xi_q|^2 = |q|^{-2s}/V, zero mode 0, band-limited
Field sample_noise(const TorusSpec& s, const ModelParams& p, std::mt19937_64& rng);
Field sample_noise(const TorusSpec& s, const ModelParams& p, std::uint64_t seed);

Field mollify(const Field& f, double rho);
// u with Lu = f - <f>, L = d_0 - Laplacian; zero mode of u is 0
Field heat_solve(const Field& f);
Field apply_heat(const Field& u);
Field semigroup(const Field& f, double t);
Field spectral_derivative(const Field& f, const SpaceIndex& n);

struct SchwartzKernel {
    std::string name;
    // Fourier symbol of the unit-scale kernel
    Symbol symbol;
    static SchwartzKernel semigroup_kernel();
    // the n-th derivative of the semigroup kernel
    static SchwartzKernel semigroup_derivative(const SpaceIndex& n);
    // exp(-|q|^4) (1 + a |q|^4): unit-integral but not a semigroup kernel
    static SchwartzKernel modified(double a);
    // symbol of psi_r at q
    cplx scaled(const WaveVector& q, double r) const;
    // |symbol| at the Nyquist frequency of the grid at scale r
    double nyquist_decay(const TorusSpec& s, double r) const;
};

struct PointValue {
    double value = 0;
    bool below_resolution = false;
};

bool below_resolution(const TorusSpec& s, double r);
Field kernel_convolve_field(const Field& f, const SchwartzKernel& psi, double r);
PointValue kernel_convolve(const Field& f, const SchwartzKernel& psi, double r, const std::vector<int>& x);

struct Quadrature {
    int nodes = 64;
    // t ranges over [r^4 e^{-log_span}, r^4]
    double log_span = 12.0;
    // relative discrepancy against the half-node rule above which evaluation fails
    double fail_tol = 1e-2;
};

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double residual) : std::runtime_error(what), residual(residual) {}
    double residual;
};

struct ChangeOfKernelResult {
    double value = 0;
    double residual_estimate = 0;
};

// reconstructs F_r(x) from semigroup-smoothed versions of F
ChangeOfKernelResult change_of_kernel(const Field& f, const SchwartzKernel& psi, double r, const std::vector<int>& x,
                                      int k, const Quadrature& quad = {});

// (x0^2 + (sum xi^2)^2)^{1/4} with minimal-image offsets
double parabolic_distance(const TorusSpec& s, const std::vector<double>& offset);
double parabolic_distance(const std::vector<double>& offset);

}  // namespace mim
