#include "mim/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>

namespace mim {

std::vector<int> TorusSpec::shape() const {
    std::vector<int> s(static_cast<size_t>(d + 1), N);
    s[0] = N0;
    return s;
}

size_t TorusSpec::size() const {
    size_t n = static_cast<size_t>(N0);
    for (int i = 0; i < d; ++i) n *= static_cast<size_t>(N);
    return n;
}

double TorusSpec::volume() const { return std::pow(L, d + 2); }

std::string TorusSpec::validate() const {
    auto pow2 = [](int n) { return n >= 2 && (n & (n - 1)) == 0; };
    if (d < 1) return "d must be positive";
    if (!(L > 0)) return "L must be positive";
    if (!pow2(N)) return "N must be a power of two";
    if (!pow2(N0)) return "N0 must be a power of two";
    return "";
}

Field::Field(const TorusSpec& s, std::vector<double> values) : spec_(s), v_(std::move(values)) {
    if (v_.size() != s.size()) throw std::invalid_argument("field size does not match the torus");
}

Field Field::from_function(const TorusSpec& s, const std::function<double(const std::vector<double>&)>& f) {
    Field out(s);
    for (size_t i = 0; i < out.size(); ++i) out.v_[i] = f(out.coords(out.unflat(i)));
    return out;
}

size_t Field::flat(const std::vector<int>& idx) const {
    auto sh = spec_.shape();
    size_t k = 0;
    for (size_t a = 0; a < sh.size(); ++a) {
        int i = ((idx[a] % sh[a]) + sh[a]) % sh[a];
        k = k * static_cast<size_t>(sh[a]) + static_cast<size_t>(i);
    }
    return k;
}

std::vector<int> Field::unflat(size_t i) const {
    auto sh = spec_.shape();
    std::vector<int> idx(sh.size());
    for (size_t a = sh.size(); a-- > 0;) {
        idx[a] = static_cast<int>(i % static_cast<size_t>(sh[a]));
        i /= static_cast<size_t>(sh[a]);
    }
    return idx;
}

std::vector<double> Field::coords(const std::vector<int>& idx) const {
    std::vector<double> x(idx.size());
    for (size_t a = 0; a < idx.size(); ++a) x[a] = idx[a] * spec_.spacing(static_cast<int>(a));
    return x;
}

Field& Field::operator+=(const Field& o) {
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
}
Field& Field::operator-=(const Field& o) {
    for (size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
}
Field& Field::operator*=(const Field& o) {
    for (size_t i = 0; i < v_.size(); ++i) v_[i] *= o.v_[i];
    return *this;
}
Field& Field::operator*=(double a) {
    for (auto& x : v_) x *= a;
    return *this;
}
Field& Field::add_scaled(const Field& o, double a) {
    for (size_t i = 0; i < v_.size(); ++i) v_[i] += a * o.v_[i];
    return *this;
}

double Field::mean() const {
    double s = 0;
    for (double x : v_) s += x;
    return v_.empty() ? 0.0 : s / static_cast<double>(v_.size());
}

double Field::max_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
}

double Field::rms() const {
    double s = 0;
    for (double x : v_) s += x * x;
    return v_.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v_.size()));
}

namespace {
constexpr std::uint32_t kSnapshotMagic = 0x4d494d46;  // "MIMF"
}

void Field::write_snapshot(std::ostream& os) const {
    std::uint32_t magic = kSnapshotMagic;
    std::uint8_t little = std::endian::native == std::endian::little ? 1 : 0;
    std::int32_t hdr[3] = {spec_.d, spec_.N, spec_.N0};
    os.write(reinterpret_cast<const char*>(&magic), sizeof magic);
    os.write(reinterpret_cast<const char*>(&little), sizeof little);
    os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    os.write(reinterpret_cast<const char*>(&spec_.L), sizeof spec_.L);
    os.write(reinterpret_cast<const char*>(v_.data()), static_cast<std::streamsize>(v_.size() * sizeof(double)));
}

Field Field::read_snapshot(std::istream& is) {
    std::uint32_t magic = 0;
    std::uint8_t little = 0;
    std::int32_t hdr[3];
    TorusSpec s;
    is.read(reinterpret_cast<char*>(&magic), sizeof magic);
    is.read(reinterpret_cast<char*>(&little), sizeof little);
    if (magic != kSnapshotMagic) throw std::runtime_error("not a field snapshot");
    if ((little == 1) != (std::endian::native == std::endian::little))
        throw std::runtime_error("snapshot endianness differs from this machine");
    is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
    is.read(reinterpret_cast<char*>(&s.L), sizeof s.L);
    s.d = hdr[0];
    s.N = hdr[1];
    s.N0 = hdr[2];
    std::vector<double> v(s.size());
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("truncated snapshot");
    return Field(s, std::move(v));
}

void Field::write_slice_csv(std::ostream& os, int t) const {
    os << "x,value\n";
    std::vector<int> idx(static_cast<size_t>(spec_.rank()), 0);
    idx[0] = t;
    for (int i = 0; i < spec_.N; ++i) {
        idx[1] = i;
        os << coords(idx)[1] << "," << at(idx) << "\n";
    }
}

double WaveVector::space_sq() const {
    double s = 0;
    for (size_t i = 1; i < q.size(); ++i) s += q[i] * q[i];
    return s;
}
double WaveVector::norm4() const {
    double s = space_sq();
    return q[0] * q[0] + s * s;
}
double WaveVector::norm() const { return std::pow(norm4(), 0.25); }
bool WaveVector::is_zero() const {
    return std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; });
}

Spectrum::Spectrum(const TorusSpec& s) : spec_(s), half_shape_(s.shape()) {
    half_shape_.back() = half_shape_.back() / 2 + 1;
    size_t n = 1;
    for (int h : half_shape_) n *= static_cast<size_t>(h);
    c_.assign(n, cplx(0, 0));
}

std::vector<int> Spectrum::wavenumbers(size_t i) const {
    std::vector<int> k(half_shape_.size());
    auto full = spec_.shape();
    for (size_t a = half_shape_.size(); a-- > 0;) {
        int j = static_cast<int>(i % static_cast<size_t>(half_shape_[a]));
        i /= static_cast<size_t>(half_shape_[a]);
        k[a] = (a + 1 == half_shape_.size()) ? j : (j <= full[a] / 2 ? j : j - full[a]);
    }
    return k;
}

WaveVector Spectrum::wave_vector(size_t i) const {
    auto k = wavenumbers(i);
    WaveVector w;
    w.q.resize(k.size());
    for (size_t a = 0; a < k.size(); ++a) w.q[a] = 2 * std::numbers::pi * k[a] / spec_.period(static_cast<int>(a));
    return w;
}

bool Spectrum::nyquist(size_t i) const {
    auto k = wavenumbers(i);
    auto full = spec_.shape();
    for (size_t a = 0; a < k.size(); ++a)
        if (std::abs(k[a]) == full[a] / 2) return true;
    return false;
}

int Spectrum::multiplicity(size_t i) const {
    int kl = wavenumbers(i).back();
    return (kl == 0 || kl == spec_.shape().back() / 2) ? 1 : 2;
}

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

const PlanPair& plans_for(const TorusSpec& s) {
    static std::map<std::vector<int>, PlanPair> cache;
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto sh = s.shape();
    auto it = cache.find(sh);
    if (it != cache.end()) return it->second;
    size_t n = s.size();
    size_t nh = n / static_cast<size_t>(sh.back()) * static_cast<size_t>(sh.back() / 2 + 1);
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(nh);
    PlanPair p;
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p.fwd = fftw_plan_dft_r2c(static_cast<int>(sh.size()), sh.data(), in, out, flags);
    p.bwd = fftw_plan_dft_c2r(static_cast<int>(sh.size()), sh.data(), out, in, flags | FFTW_DESTROY_INPUT);
    fftw_free(in);
    fftw_free(out);
    return cache.emplace(sh, p).first->second;
}

}  // namespace

Spectrum fft(const Field& f) {
    const auto& p = plans_for(f.spec());
    Spectrum s(f.spec());
    std::vector<double> in = f.values();
    fftw_execute_dft_r2c(p.fwd, in.data(), reinterpret_cast<fftw_complex*>(s.data().data()));
    double g = 1.0 / static_cast<double>(f.size());
    for (auto& c : s.data()) c *= g;
    return s;
}

Field ifft(const Spectrum& s) {
    const auto& p = plans_for(s.spec());
    std::vector<cplx> in = s.data();
    Field out(s.spec());
    fftw_execute_dft_c2r(p.bwd, reinterpret_cast<fftw_complex*>(in.data()), out.values().data());
    return out;
}

const ModeTable& mode_table(const TorusSpec& s) {
    static std::mutex mu;
    static std::map<std::pair<std::vector<int>, double>, ModeTable> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(s.shape(), s.L);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Spectrum sp(s);
    ModeTable t;
    t.rank = static_cast<size_t>(s.rank());
    t.q.reserve(sp.size() * t.rank);
    t.nyquist.resize(sp.size());
    for (size_t i = 0; i < sp.size(); ++i) {
        auto w = sp.wave_vector(i);
        t.q.insert(t.q.end(), w.q.begin(), w.q.end());
        t.nyquist[i] = sp.nyquist(i);
    }
    return cache.emplace(key, std::move(t)).first->second;
}

Field apply_symbol(const Field& f, const Symbol& m) {
    Spectrum s = fft(f);
    const ModeTable& t = mode_table(f.spec());
    WaveVector w;
    for (size_t i = 0; i < s.size(); ++i) {
        if (t.nyquist[i]) {
            s.data()[i] = 0;
            continue;
        }
        t.load(i, w);
        s.data()[i] *= m(w);
    }
    return ifft(s);
}

Field band_limit(const Field& f) {
    return apply_symbol(f, [](const WaveVector&) { return cplx(1, 0); });
}

Field white_noise(const TorusSpec& s, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(static_cast<double>(s.size()) / s.volume()));
    Field w(s);
    for (size_t i = 0; i < w.size(); ++i) w[i] = g(rng);
    return w;
}

Field sample_noise(const TorusSpec& s, const ModelParams& p, std::mt19937_64& rng) {
    double sreg = p.s_d();
    return apply_symbol(white_noise(s, rng), [sreg](const WaveVector& q) {
        if (q.is_zero()) return cplx(0, 0);
        return cplx(std::pow(q.norm4(), -sreg / 4), 0);
    });
}

Field sample_noise(const TorusSpec& s, const ModelParams& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_noise(s, p, rng);
}

Field mollify(const Field& f, double rho) {
    double r4 = std::pow(rho, 4);
    return apply_symbol(f, [r4](const WaveVector& q) { return cplx(std::exp(-r4 * q.norm4()), 0); });
}

Field heat_solve(const Field& f) {
    return apply_symbol(f, [](const WaveVector& q) {
        if (q.is_zero()) return cplx(0, 0);
        return 1.0 / cplx(q.space_sq(), q.q[0]);
    });
}

Field apply_heat(const Field& u) {
    return apply_symbol(u, [](const WaveVector& q) { return cplx(q.space_sq(), q.q[0]); });
}

Field semigroup(const Field& f, double t) {
    return apply_symbol(f, [t](const WaveVector& q) { return cplx(std::exp(-t * q.norm4()), 0); });
}

namespace {
cplx derivative_symbol(const WaveVector& q, const SpaceIndex& n) {
    cplx m(1, 0);
    for (size_t a = 0; a < n.c.size(); ++a)
        for (int k = 0; k < n.c[a]; ++k) m *= cplx(0, q.q[a]);
    return m;
}
}  // namespace

Field spectral_derivative(const Field& f, const SpaceIndex& n) {
    if (n.is_zero()) return f;
    return apply_symbol(f, [n](const WaveVector& q) { return derivative_symbol(q, n); });
}

SchwartzKernel SchwartzKernel::semigroup_kernel() {
    return {"semigroup", [](const WaveVector& q) { return cplx(std::exp(-q.norm4()), 0); }};
}

SchwartzKernel SchwartzKernel::semigroup_derivative(const SpaceIndex& n) {
    return {"semigroup_derivative" + n.to_string(),
            [n](const WaveVector& q) { return derivative_symbol(q, n) * std::exp(-q.norm4()); }};
}

SchwartzKernel SchwartzKernel::modified(double a) {
    return {"modified", [a](const WaveVector& q) {
                double q4 = q.norm4();
                return cplx(std::exp(-q4) * (1 + a * q4), 0);
            }};
}

cplx SchwartzKernel::scaled(const WaveVector& q, double r) const {
    WaveVector rq = q;
    rq.q[0] *= r * r;
    for (size_t i = 1; i < rq.q.size(); ++i) rq.q[i] *= r;
    return symbol(rq);
}

double SchwartzKernel::nyquist_decay(const TorusSpec& s, double r) const {
    WaveVector q;
    q.q.assign(static_cast<size_t>(s.rank()), 0.0);
    q.q[0] = std::numbers::pi * s.N0 / s.period(0);
    for (int i = 1; i <= s.d; ++i) q.q[static_cast<size_t>(i)] = std::numbers::pi * s.N / s.period(i);
    return std::abs(scaled(q, r));
}

bool below_resolution(const TorusSpec& s, double r) {
    // the semigroup kernel at scale r must be negligible at the Nyquist frequency of every axis
    auto k = SchwartzKernel::semigroup_kernel();
    for (int a = 0; a < s.rank(); ++a) {
        WaveVector q;
        q.q.assign(static_cast<size_t>(s.rank()), 0.0);
        q.q[static_cast<size_t>(a)] = std::numbers::pi / s.spacing(a);
        if (std::abs(k.scaled(q, r)) > 1e-6) return true;
    }
    return false;
}

Field kernel_convolve_field(const Field& f, const SchwartzKernel& psi, double r) {
    return apply_symbol(f, [&psi, r](const WaveVector& q) { return psi.scaled(q, r); });
}

PointValue kernel_convolve(const Field& f, const SchwartzKernel& psi, double r, const std::vector<int>& x) {
    PointValue pv;
    pv.value = kernel_convolve_field(f, psi, r).at(x);
    pv.below_resolution = below_resolution(f.spec(), r);
    return pv;
}

namespace {

// Symbol of the reconstruction: psi_r(q) [ sum_{j<=k} a^j/j! e^{-a} + (1/k!) int_0^1 du u^k a^{k+1} e^{-ua} ],
// with a = r^4 |q|^4 and the u-integral on a log-spaced trapezoid rule.
double reconstruction_factor(double a, int k, int nodes, double span) {
    double part = 0, term = 1, kf = 1;
    for (int j = 0; j <= k; ++j) {
        if (j > 0) term *= a / j;
        part += term;
    }
    part *= std::exp(-a);
    for (int j = 2; j <= k; ++j) kf *= j;
    double h = span / (nodes - 1), integral = 0;
    for (int i = 0; i < nodes; ++i) {
        double l = -span + i * h;
        double w = (i == 0 || i == nodes - 1) ? h / 2 : h;
        integral += w * std::exp((k + 1) * l) * std::pow(a, k + 1) * std::exp(-a * std::exp(l));
    }
    return part + integral / kf;
}

double reconstruct_at(const Spectrum& s, const SchwartzKernel& psi, double r, const std::vector<int>& x, int k,
                      int nodes, double span) {
    double r4 = std::pow(r, 4), acc = 0;
    std::vector<double> xc(x.size());
    for (size_t a = 0; a < x.size(); ++a) xc[a] = x[a] * s.spec().spacing(static_cast<int>(a));
    for (size_t i = 0; i < s.size(); ++i) {
        if (s.nyquist(i)) continue;
        WaveVector q = s.wave_vector(i);
        double phase = 0;
        for (size_t a = 0; a < xc.size(); ++a) phase += q.q[a] * xc[a];
        double f = reconstruction_factor(r4 * q.norm4(), k, nodes, span);
        cplx v = s.data()[i] * psi.scaled(q, r) * f * std::exp(cplx(0, phase));
        acc += s.multiplicity(i) * v.real();
    }
    return acc;
}

}  // namespace

ChangeOfKernelResult change_of_kernel(const Field& f, const SchwartzKernel& psi, double r, const std::vector<int>& x,
                                      int k, const Quadrature& quad) {
    if (k < 0) throw std::invalid_argument("k must be non-negative");
    if (quad.nodes < 4) throw std::invalid_argument("quadrature needs at least 4 nodes");
    Spectrum s = fft(f);
    ChangeOfKernelResult res;
    res.value = reconstruct_at(s, psi, r, x, k, quad.nodes, quad.log_span);
    double coarse = reconstruct_at(s, psi, r, x, k, quad.nodes / 2, quad.log_span);
    double scale = std::max(std::abs(res.value), f.rms() * 1e-12 + 1e-300);
    res.residual_estimate = std::abs(res.value - coarse) / scale;
    if (res.residual_estimate > quad.fail_tol)
        throw QuadratureError("change-of-kernel quadrature did not converge", res.residual_estimate);
    return res;
}

double parabolic_distance(const std::vector<double>& offset) {
    double s = 0;
    for (size_t i = 1; i < offset.size(); ++i) s += offset[i] * offset[i];
    return std::pow(offset[0] * offset[0] + s * s, 0.25);
}

double parabolic_distance(const TorusSpec& spec, const std::vector<double>& offset) {
    std::vector<double> o = offset;
    for (size_t a = 0; a < o.size(); ++a) {
        double per = spec.period(static_cast<int>(a));
        o[a] = o[a] - per * std::round(o[a] / per);
    }
    return parabolic_distance(o);
}

}  // namespace mim
