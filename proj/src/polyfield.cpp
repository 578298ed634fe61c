#include "mim/polyfield.hpp"

#include "mim/algebra.hpp"

#include <cmath>
#include <stdexcept>

namespace mim {

std::vector<double> point_coords(const TorusSpec& s, const GridPoint& x) {
    std::vector<double> c(x.size());
    for (size_t a = 0; a < x.size(); ++a) c[a] = x[a] * s.spacing(static_cast<int>(a));
    return c;
}

PolyField::PolyField(const TorusSpec& s, std::vector<double> anchor) : spec_(s), anchor_(std::move(anchor)) {
    if (anchor_.size() != static_cast<size_t>(s.rank())) throw std::invalid_argument("anchor has wrong dimension");
}

PolyField PolyField::periodic(const Field& f) {
    return periodic(f, std::vector<double>(static_cast<size_t>(f.spec().rank()), 0.0));
}

PolyField PolyField::periodic(const Field& f, std::vector<double> anchor) {
    PolyField p(f.spec(), std::move(anchor));
    p.add_term(SpaceIndex::zero(f.spec().d), f);
    return p;
}

PolyField PolyField::monomial(const TorusSpec& s, std::vector<double> anchor, const SpaceIndex& n) {
    PolyField p(s, std::move(anchor));
    p.add_term(n, Field(s, 1.0));
    return p;
}

int PolyField::degree() const {
    int w = 0;
    for (const auto& [m, f] : terms_) w = std::max(w, m.weight());
    return w;
}

void PolyField::add_term(const SpaceIndex& m, const Field& f, double scale) {
    auto it = terms_.find(m);
    if (it == terms_.end()) terms_.emplace(m, scale == 1.0 ? f : f * scale);
    else it->second.add_scaled(f, scale);
}

PolyField PolyField::reanchored(const std::vector<double>& anchor) const {
    if (anchor == anchor_) return *this;
    std::vector<double> shift(anchor.size());
    for (size_t a = 0; a < shift.size(); ++a) shift[a] = anchor[a] - anchor_[a];
    PolyField out(spec_, anchor);
    for (const auto& [m, f] : terms_)
        for (const auto& k : space_indices_up_to(spec_.d, m.weight())) {
            if (!k.leq(m)) continue;
            double c = static_cast<double>(binomial(m, k)) * mim::monomial(shift, m - k);
            if (c != 0.0) out.add_term(k, f, c);
        }
    return out;
}

PolyField& PolyField::operator+=(const PolyField& o) { return add_scaled(o, 1.0); }
PolyField& PolyField::operator-=(const PolyField& o) { return add_scaled(o, -1.0); }

PolyField& PolyField::add_scaled(const PolyField& o, double a) {
    if (anchor_.empty()) {
        *this = o * a;
        return *this;
    }
    PolyField src = o.anchor_ == anchor_ ? o : o.reanchored(anchor_);
    for (const auto& [m, f] : src.terms_) add_term(m, f, a);
    return *this;
}

PolyField PolyField::operator*(const PolyField& o) const {
    const PolyField other = o.anchor_ == anchor_ ? o : o.reanchored(anchor_);
    PolyField out(spec_, anchor_);
    for (const auto& [m1, f1] : terms_)
        for (const auto& [m2, f2] : other.terms_) out.add_term(m1 + m2, f1 * f2);
    return out;
}

PolyField PolyField::operator*(double a) const {
    PolyField out(spec_, anchor_);
    for (const auto& [m, f] : terms_) out.add_term(m, f, a);
    return out;
}

namespace {

SpaceIndex minus_axis(const SpaceIndex& m, int axis, int k) {
    SpaceIndex r = m;
    r.c[static_cast<size_t>(axis)] -= k;
    return r;
}

}  // namespace

// L(P g) = P Lg + [L, P] g with [L, P] g = (d_0 P) g - (Lap P) g - 2 grad P . grad g,
// so L^{-1}(P f) = P g - L^{-1}([L, P] g) for g = L^{-1} f; the recursion lowers the degree.
PolyField PolyField::heat_inverse() const {
    PolyField out(spec_, anchor_);
    for (const auto& [m, f] : terms_) {
        Field g = heat_solve(f);
        out.add_term(m, g);
        if (m.is_zero()) continue;
        PolyField comm(spec_, anchor_);
        if (m[0] > 0) comm.add_term(minus_axis(m, 0, 1), g, m[0]);
        for (int i = 1; i <= spec_.d; ++i) {
            int mi = m[i];
            if (mi >= 2) comm.add_term(minus_axis(m, i, 2), g, -mi * (mi - 1));
            if (mi >= 1) comm.add_term(minus_axis(m, i, 1), spectral_derivative(g, SpaceIndex::unit(spec_.d, i)), -2 * mi);
        }
        out -= comm.heat_inverse();
    }
    return out;
}

Field PolyField::sample() const {
    Field out(spec_);
    for (const auto& [m, f] : terms_) {
        for (size_t i = 0; i < out.size(); ++i) {
            auto y = point_coords(spec_, f.unflat(i));
            for (size_t a = 0; a < y.size(); ++a) y[a] -= anchor_[a];
            out[i] += mim::monomial(y, m) * f[i];
        }
    }
    return out;
}

std::vector<double> PolyField::value_at(const std::vector<GridPoint>& pts) const {
    return jets_at({SpaceIndex::zero(spec_.d)}, pts).begin()->second;
}

std::map<SpaceIndex, std::vector<double>> PolyField::jets_at(const std::vector<SpaceIndex>& ns,
                                                             const std::vector<GridPoint>& pts) const {
    std::map<SpaceIndex, std::vector<double>> out;
    for (const auto& n : ns) out[n].assign(pts.size(), 0.0);
    std::vector<std::vector<double>> rel(pts.size());
    for (size_t p = 0; p < pts.size(); ++p) {
        rel[p] = point_coords(spec_, pts[p]);
        for (size_t a = 0; a < rel[p].size(); ++a) rel[p][a] -= anchor_[a];
    }
    for (const auto& [m, f] : terms_) {
        std::map<SpaceIndex, Field> derivs;
        auto deriv = [&](const SpaceIndex& j) -> const Field& {
            auto it = derivs.find(j);
            if (it != derivs.end()) return it->second;
            Field d = j.is_zero() ? f : spectral_derivative(f, j);
            return derivs.emplace(j, std::move(d)).first->second;
        };
        for (const auto& n : ns) {
            auto& dst = out[n];
            for (const auto& k : space_indices_up_to(spec_.d, n.weight())) {
                if (!k.leq(n) || !k.leq(m)) continue;
                SpaceIndex j = n - k;
                const Field& dj = deriv(j);
                double scale = static_cast<double>(binomial(m, k)) / static_cast<double>(j.factorial());
                for (size_t p = 0; p < pts.size(); ++p)
                    dst[p] += scale * mim::monomial(rel[p], m - k) * dj.at(pts[p]);
            }
        }
    }
    return out;
}

namespace {

// Polynomial in q stored as exponent vector -> coefficient.
using QPoly = std::map<std::vector<int>, double>;

QPoly qpoly_derivative(const QPoly& p, size_t axis) {
    QPoly r;
    for (const auto& [e, c] : p) {
        if (e[axis] == 0) continue;
        auto e2 = e;
        e2[axis] -= 1;
        r[e2] += c * e[axis];
    }
    return r;
}

QPoly qpoly_mul(const QPoly& a, const QPoly& b) {
    QPoly r;
    for (const auto& [ea, ca] : a)
        for (const auto& [eb, cb] : b) {
            auto e = ea;
            for (size_t i = 0; i < e.size(); ++i) e[i] += eb[i];
            r[e] += ca * cb;
        }
    return r;
}

// Q_k with d^k exp(-t P) = Q_k exp(-t P), P = q0^2 + (sum qi^2)^2.
QPoly derivative_prefactor(int d, const SpaceIndex& k, double t) {
    size_t rank = static_cast<size_t>(d + 1);
    QPoly P;
    std::vector<int> e(rank, 0);
    e[0] = 2;
    P[e] = 1.0;
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j) {
            std::vector<int> f(rank, 0);
            f[static_cast<size_t>(i)] += 2;
            f[static_cast<size_t>(j)] += 2;
            P[f] += 1.0;
        }
    QPoly Q{{std::vector<int>(rank, 0), 1.0}};
    for (size_t a = 0; a < rank; ++a)
        for (int rep = 0; rep < k.c[a]; ++rep) {
            QPoly dP = qpoly_derivative(P, a);
            for (auto& [ex, c] : dP) c *= -t;
            QPoly next = qpoly_derivative(Q, a);
            for (const auto& [ex, c] : qpoly_mul(dP, Q)) next[ex] += c;
            Q = std::move(next);
        }
    return Q;
}

double qpoly_eval(const QPoly& p, const std::vector<double>& q) {
    double s = 0;
    for (const auto& [e, c] : p) {
        double v = c;
        for (size_t i = 0; i < e.size(); ++i)
            for (int j = 0; j < e[i]; ++j) v *= q[i];
        s += v;
    }
    return s;
}

cplx ipow(int n) {
    static const cplx tab[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
    return tab[((n % 4) + 4) % 4];
}

int plain_degree(const SpaceIndex& k) {
    int deg = 0;
    for (int c : k.c) deg += c;
    return deg;
}

}  // namespace

// int psi(w) w^k e^{-iqw} dw = i^{|k|} d^k psi^(q)
cplx semigroup_moment_symbol(const WaveVector& q, const SpaceIndex& k, double t) {
    int d = static_cast<int>(q.q.size()) - 1;
    QPoly Q = derivative_prefactor(d, k, t);
    return ipow(plain_degree(k)) * qpoly_eval(Q, q.q) * std::exp(-t * q.norm4());
}

double semigroup_moment(int d, const SpaceIndex& k, double t) {
    WaveVector q;
    q.q.assign(static_cast<size_t>(d + 1), 0.0);
    return semigroup_moment_symbol(q, k, t).real();
}

std::map<double, std::vector<double>> PolyField::convolve_at(const std::vector<double>& rs,
                                                             const std::vector<GridPoint>& pts) const {
    std::map<double, std::vector<double>> out;
    std::vector<std::vector<double>> rel(pts.size());
    for (size_t p = 0; p < pts.size(); ++p) {
        rel[p] = point_coords(spec_, pts[p]);
        for (size_t a = 0; a < rel[p].size(); ++a) rel[p][a] -= anchor_[a];
    }
    const ModeTable& table = mode_table(spec_);
    WaveVector q;
    std::map<double, std::vector<double>> decay;
    for (double r : rs) {
        out[r].assign(pts.size(), 0.0);
        auto& e = decay[r];
        e.resize(table.size());
        double t = std::pow(r, 4);
        for (size_t i = 0; i < table.size(); ++i) {
            table.load(i, q);
            e[i] = std::exp(-t * q.norm4());
        }
    }
    for (const auto& [m, f] : terms_) {
        Spectrum sp = fft(f);
        for (double r : rs) {
            auto& dst = out[r];
            double t = std::pow(r, 4);
            for (const auto& k : space_indices_up_to(spec_.d, m.weight())) {
                if (!k.leq(m)) continue;
                // int psi(x - y) (y - x)^k f(y) dy has symbol (-1)^{|k|} int psi(w) w^k e^{-iqw} dw
                int deg = plain_degree(k);
                cplx pre = (deg % 2 ? -1.0 : 1.0) * ipow(deg);
                QPoly Q = derivative_prefactor(spec_.d, k, t);
                Spectrum s2 = sp;
                for (size_t i = 0; i < s2.size(); ++i) {
                    if (table.nyquist[i]) {
                        s2.data()[i] = 0;
                        continue;
                    }
                    table.load(i, q);
                    double poly = k.is_zero() ? 1.0 : qpoly_eval(Q, q.q);
                    s2.data()[i] *= pre * poly * decay[r][i];
                }
                Field conv = ifft(s2);
                double b = static_cast<double>(binomial(m, k));
                for (size_t p = 0; p < pts.size(); ++p) dst[p] += b * mim::monomial(rel[p], m - k) * conv.at(pts[p]);
            }
        }
    }
    return out;
}

}  // namespace mim
