#pragma once

#include "mim/grading.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <valarray>
#include <vector>

namespace mim {

// Coefficient algebras: reals, exact rationals, and batches of lattice values.
template <class C>
struct CoeffTraits;

template <>
struct CoeffTraits<double> {
    static double zero() { return 0.0; }
    static double one() { return 1.0; }
    static bool is_zero(double v) { return v == 0.0; }
    static double norm(double v) { return std::abs(v); }
    static nlohmann::json to_json(double v) { return v; }
};

template <>
struct CoeffTraits<Rational> {
    static Rational zero() { return Rational(0); }
    static Rational one() { return Rational(1); }
    static bool is_zero(const Rational& v) { return v == Rational(0); }
    static double norm(const Rational& v) { return std::abs(to_double(v)); }
    static nlohmann::json to_json(const Rational& v) {
        return std::to_string(v.numerator()) + "/" + std::to_string(v.denominator());
    }
};

// A batch holds one value per base point; all operations are elementwise.
using Batch = std::valarray<double>;

template <>
struct CoeffTraits<Batch> {
    static Batch zero() { return Batch(); }
    static Batch one() { return Batch(1.0, 1); }
    static bool is_zero(const Batch& v) { return v.size() == 0 || (std::abs(v)).max() == 0.0; }
    static double norm(const Batch& v) { return v.size() == 0 ? 0.0 : (std::abs(v)).max(); }
    static nlohmann::json to_json(const Batch& v) { return std::vector<double>(std::begin(v), std::end(v)); }
};

// Formal power series over multi-indices, truncated in the precedence grading.
template <class C>
class Series {
public:
    using Traits = CoeffTraits<C>;

    Series(ModelParams p, double truncation) : p_(std::move(p)), trunc_(truncation) {}

    static Series unit(const ModelParams& p, double truncation) {
        Series s(p, truncation);
        s.set(MultiIndex::zero(), Traits::one());
        return s;
    }
    static Series monomial(const ModelParams& p, double truncation, const MultiIndex& b, C v = Traits::one()) {
        Series s(p, truncation);
        s.set(b, v);
        return s;
    }

    const ModelParams& params() const { return p_; }
    double truncation() const { return trunc_; }
    const std::map<MultiIndex, C>& coeffs() const { return c_; }

    bool admits(const MultiIndex& b) const { return to_double(precedence(b, p_)) < trunc_; }

    void set(const MultiIndex& b, C v) {
        if (!admits(b)) return;
        if (Traits::is_zero(v)) c_.erase(b);
        else c_[b] = std::move(v);
    }
    C get(const MultiIndex& b) const {
        auto it = c_.find(b);
        return it == c_.end() ? Traits::zero() : it->second;
    }

    Series operator+(const Series& o) const {
        Series r = *this;
        for (const auto& [b, v] : o.c_) {
            auto it = r.c_.find(b);
            if (it == r.c_.end()) r.set(b, v);
            else r.set(b, it->second + v);
        }
        return r;
    }
    Series operator-(const Series& o) const {
        Series r = *this;
        for (const auto& [b, v] : o.c_) {
            auto it = r.c_.find(b);
            if (it == r.c_.end()) r.set(b, -v);
            else r.set(b, it->second - v);
        }
        return r;
    }
    Series scaled(const C& f) const {
        Series r(p_, trunc_);
        for (const auto& [b, v] : c_) r.set(b, v * f);
        return r;
    }

    Series operator*(const Series& o) const {
        Series r(p_, std::min(trunc_, o.trunc_));
        std::map<MultiIndex, C> acc;
        for (const auto& [b1, v1] : c_)
            for (const auto& [b2, v2] : o.c_) {
                MultiIndex b = b1 + b2;
                if (!r.admits(b)) continue;
                auto it = acc.find(b);
                if (it == acc.end()) acc.emplace(b, v1 * v2);
                else it->second = it->second + v1 * v2;
            }
        for (auto& [b, v] : acc) r.set(b, std::move(v));
        return r;
    }

    double max_norm() const {
        double m = 0;
        for (const auto& [b, v] : c_) m = std::max(m, Traits::norm(v));
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [b, v] : c_) j[b.to_string()] = Traits::to_json(v);
        return j;
    }

private:
    ModelParams p_;
    double trunc_;
    std::map<MultiIndex, C> c_;
};

// c = sum_k c_k z_3^k
template <class C = double>
Series<C> embed_counterterm(const std::map<int, C>& c_values, const ModelParams& p, double truncation) {
    Series<C> s(p, truncation);
    for (const auto& [k, v] : c_values) {
        if (k <= 0) throw DomainError("counterterm degree must be positive");
        s.set(MultiIndex::cubic(k), v);
    }
    return s;
}

// (d/dz_n a)_beta = (beta(n)+1) a_{beta+delta_n}
template <class C>
Series<C> derivation_apply(const SpaceIndex& n, const Series<C>& a) {
    Series<C> r(a.params(), a.truncation());
    for (const auto& [b, v] : a.coeffs()) {
        int m = b.at(n);
        if (m == 0) continue;
        MultiIndex lower = b - MultiIndex::poly(n);
        r.set(lower, v * static_cast<C>(m));
    }
    return r;
}

// Column-finite matrix (beta, gamma) -> entry acting as (G a)_beta = sum_gamma G_beta^gamma a_gamma.
template <class C>
class Endo {
public:
    using Traits = CoeffTraits<C>;
    using Row = std::map<MultiIndex, C>;

    static Endo identity(const std::vector<MultiIndex>& rows) {
        Endo e;
        for (const auto& b : rows) e.set(b, b, Traits::one());
        return e;
    }

    void set(const MultiIndex& b, const MultiIndex& g, C v) {
        if (Traits::is_zero(v)) {
            auto it = rows_.find(b);
            if (it != rows_.end()) it->second.erase(g);
            rows_.try_emplace(b);
            return;
        }
        rows_[b][g] = std::move(v);
    }
    void ensure_row(const MultiIndex& b) { rows_.try_emplace(b); }

    C get(const MultiIndex& b, const MultiIndex& g) const {
        auto it = rows_.find(b);
        if (it == rows_.end()) return Traits::zero();
        auto jt = it->second.find(g);
        return jt == it->second.end() ? Traits::zero() : jt->second;
    }
    bool has_row(const MultiIndex& b) const { return rows_.count(b) > 0; }
    const std::map<MultiIndex, Row>& rows() const { return rows_; }
    std::vector<MultiIndex> row_keys() const {
        std::vector<MultiIndex> k;
        for (const auto& [b, r] : rows_) k.push_back(b);
        return k;
    }

    template <class S>
    Series<S> apply(const Series<S>& a) const {
        Series<S> r(a.params(), a.truncation());
        for (const auto& [b, row] : rows_) {
            S acc = CoeffTraits<S>::zero();
            bool any = false;
            for (const auto& [g, v] : row) {
                auto it = a.coeffs().find(g);
                if (it == a.coeffs().end()) continue;
                if (!any) { acc = v * it->second; any = true; }
                else acc = acc + v * it->second;
            }
            if (any) r.set(b, acc);
        }
        return r;
    }

    // (this o o)_beta^gamma = sum_eta this_beta^eta o_eta^gamma
    Endo compose(const Endo& o) const {
        Endo r;
        for (const auto& [b, row] : rows_) {
            r.ensure_row(b);
            std::map<MultiIndex, C> acc;
            for (const auto& [eta, v] : row) {
                auto it = o.rows_.find(eta);
                if (it == o.rows_.end()) continue;
                for (const auto& [g, w] : it->second) {
                    auto jt = acc.find(g);
                    if (jt == acc.end()) acc.emplace(g, v * w);
                    else jt->second = jt->second + v * w;
                }
            }
            for (auto& [g, v] : acc) r.set(b, g, std::move(v));
        }
        return r;
    }

    Endo operator-(const Endo& o) const {
        Endo r = *this;
        for (const auto& [b, row] : o.rows_) {
            r.ensure_row(b);
            for (const auto& [g, v] : row) r.add_to(b, g, -v);
        }
        return r;
    }

    // Inverse of a unitriangular matrix by the terminating Neumann series of its
    // strictly triangular part N: (1+N)^{-1} = sum_j (-N)^j.
    Endo inverse(int max_terms = 64) const {
        std::vector<MultiIndex> keys = row_keys();
        Endo id = identity(keys);
        Endo n = *this - id;
        Endo term = id, sum = id;
        for (int j = 1; j <= max_terms; ++j) {
            term = term.compose(n);
            term = term.negated();
            if (term.max_norm() == 0.0) return sum;
            sum = sum + term;
        }
        throw std::runtime_error("Neumann series did not terminate; matrix is not unitriangular");
    }

    Endo operator+(const Endo& o) const {
        Endo r = *this;
        for (const auto& [b, row] : o.rows_) {
            r.ensure_row(b);
            for (const auto& [g, v] : row) r.add_to(b, g, v);
        }
        return r;
    }

    Endo negated() const {
        Endo r;
        for (const auto& [b, row] : rows_) {
            r.ensure_row(b);
            for (const auto& [g, v] : row) r.set(b, g, -v);
        }
        return r;
    }

    void add_to(const MultiIndex& b, const MultiIndex& g, const C& v) {
        auto& row = rows_[b];
        auto it = row.find(g);
        if (it == row.end()) {
            if (!Traits::is_zero(v)) row.emplace(g, v);
            return;
        }
        it->second = it->second + v;
        if (Traits::is_zero(it->second)) row.erase(it);
    }

    double max_norm() const {
        double m = 0;
        for (const auto& [b, row] : rows_)
            for (const auto& [g, v] : row) m = std::max(m, Traits::norm(v));
        return m;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [b, row] : rows_) {
            nlohmann::json r = nlohmann::json::object();
            for (const auto& [g, v] : row) r[g.to_string()] = Traits::to_json(v);
            j[b.to_string()] = r;
        }
        return j;
    }

private:
    std::map<MultiIndex, Row> rows_;
};

// Max over samples of |G(ab) - (Ga)(Gb)| on the rows of G.
template <class C>
double multiplicativity_check(const Endo<C>& g, const std::vector<std::pair<Series<C>, Series<C>>>& samples) {
    double defect = 0;
    for (const auto& [a, b] : samples) {
        Series<C> lhs = g.apply(a * b);
        Series<C> rhs = g.apply(a) * g.apply(b);
        for (const auto& [beta, row] : g.rows()) {
            if (!lhs.admits(beta)) continue;
            defect = std::max(defect, CoeffTraits<C>::norm(lhs.get(beta) - rhs.get(beta)));
        }
    }
    return defect;
}

// Columns of an algebra endomorphism fixing z_3 and 1: phi[n] holds the image of z_n as
// a sparse map beta -> coefficient.
template <class C>
using SubstitutionColumns = std::map<SpaceIndex, std::map<MultiIndex, C>>;

namespace detail {
template <class C>
void product_rec(const std::vector<SpaceIndex>& factors, size_t j, const MultiIndex& remaining,
                 const SubstitutionColumns<C>& phi, const SubstitutionColumns<C>* dphi, int dslot,
                 const C& partial, bool have_partial, C& acc, bool& have_acc) {
    if (j == factors.size()) {
        if (!remaining.is_zero()) return;
        C v = have_partial ? partial : CoeffTraits<C>::one();
        if (!have_acc) { acc = v; have_acc = true; }
        else acc = acc + v;
        return;
    }
    const auto& src = (dphi && static_cast<int>(j) == dslot) ? *dphi : phi;
    auto it = src.find(factors[j]);
    if (it == src.end()) return;
    for (const auto& [bj, v] : it->second) {
        if (!bj.leq(remaining)) continue;
        if (bj.is_zero() && !(dphi && static_cast<int>(j) == dslot)) continue;
        C np = have_partial ? C(partial * v) : v;
        product_rec(factors, j + 1, remaining - bj, phi, dphi, dslot, np, true, acc, have_acc);
    }
}
}  // namespace detail

// [z^beta] z_3^{gamma(3)} prod_n phi_n^{gamma(n)}
template <class C>
bool product_entry(const MultiIndex& beta, const MultiIndex& gamma, const SubstitutionColumns<C>& phi, C& out) {
    if (gamma.count3() > beta.count3()) return false;
    MultiIndex rem = beta - MultiIndex::cubic(gamma.count3());
    std::vector<SpaceIndex> factors;
    for (const auto& [n, m] : gamma.poly_part())
        for (int i = 0; i < m; ++i) factors.push_back(n);
    C acc{};
    bool have = false;
    detail::product_rec<C>(factors, 0, rem, phi, nullptr, -1, C{}, false, acc, have);
    if (have) out = acc;
    return have;
}

// [z^beta] of D(z^gamma) for the derivation-like map D with D z_3 = 0, D z_n = dphi_n
// and Leibniz rule D(ab) = (Da)(Gb) + (Ga)(Db) relative to the endomorphism with columns phi.
template <class C>
bool leibniz_entry(const MultiIndex& beta, const MultiIndex& gamma, const SubstitutionColumns<C>& phi,
                   const SubstitutionColumns<C>& dphi, C& out) {
    if (gamma.count3() > beta.count3()) return false;
    MultiIndex rem = beta - MultiIndex::cubic(gamma.count3());
    std::vector<SpaceIndex> factors;
    for (const auto& [n, m] : gamma.poly_part())
        for (int i = 0; i < m; ++i) factors.push_back(n);
    C acc{};
    bool have = false;
    for (size_t slot = 0; slot < factors.size(); ++slot)
        detail::product_rec<C>(factors, 0, rem, phi, &dphi, static_cast<int>(slot), C{}, false, acc, have);
    if (have) out = acc;
    return have;
}

// The pure translation y -> y + x acting on all given rows.
Endo<double> translation_endo(const std::vector<double>& x, const std::vector<MultiIndex>& rows,
                              const std::vector<MultiIndex>& cols);

double monomial(const std::vector<double>& x, const SpaceIndex& n);

}  // namespace mim
