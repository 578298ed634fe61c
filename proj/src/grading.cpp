#include "mim/grading.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <sstream>

namespace mim {

Rational parse_decimal(const std::string& text) {
    std::string t;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch))) t.push_back(ch);
    if (t.empty()) throw std::invalid_argument("empty number");
    size_t i = 0;
    bool neg = false;
    if (t[i] == '+' || t[i] == '-') neg = (t[i++] == '-');
    long long num = 0, den = 1;
    bool digits = false;
    for (; i < t.size() && std::isdigit(static_cast<unsigned char>(t[i])); ++i) {
        num = num * 10 + (t[i] - '0');
        digits = true;
    }
    if (i < t.size() && t[i] == '.') {
        ++i;
        for (; i < t.size() && std::isdigit(static_cast<unsigned char>(t[i])); ++i) {
            num = num * 10 + (t[i] - '0');
            den *= 10;
            digits = true;
        }
    }
    if (!digits) throw std::invalid_argument("not a number: " + text);
    int ex = 0;
    if (i < t.size() && (t[i] == 'e' || t[i] == 'E')) {
        ex = std::stoi(t.substr(i + 1));
        i = t.size();
    }
    if (i != t.size()) throw std::invalid_argument("not a number: " + text);
    Rational r(neg ? -num : num, den);
    for (; ex > 0; --ex) r *= 10;
    for (; ex < 0; ++ex) r /= 10;
    return r;
}

Rational approximate_rational(double v, long long max_den) {
    // continued fraction convergents
    long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double x = v;
    for (int it = 0; it < 64; ++it) {
        double a = std::floor(x);
        long long ai = static_cast<long long>(a);
        long long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        if (k2 > max_den) break;
        h0 = h1; h1 = h2; k0 = k1; k1 = k2;
        double frac = x - a;
        if (std::abs(frac) < 1e-15 || std::abs(static_cast<double>(h1) / k1 - v) < 1e-15) break;
        x = 1.0 / frac;
    }
    return Rational(h1, k1);
}

SpaceIndex SpaceIndex::unit(int d, int axis) {
    SpaceIndex n = zero(d);
    n.c[static_cast<size_t>(axis)] = 1;
    return n;
}

int SpaceIndex::weight() const {
    int w = 0;
    for (size_t i = 0; i < c.size(); ++i) w += (i == 0 ? 2 : 1) * c[i];
    return w;
}

bool SpaceIndex::is_zero() const {
    return std::all_of(c.begin(), c.end(), [](int v) { return v == 0; });
}

bool SpaceIndex::leq(const SpaceIndex& o) const {
    for (size_t i = 0; i < c.size(); ++i)
        if (c[i] > o.c[i]) return false;
    return true;
}

long long SpaceIndex::factorial() const {
    long long f = 1;
    for (int v : c)
        for (int j = 2; j <= v; ++j) f *= j;
    return f;
}

SpaceIndex SpaceIndex::operator+(const SpaceIndex& o) const {
    SpaceIndex r = *this;
    for (size_t i = 0; i < c.size(); ++i) r.c[i] += o.c[i];
    return r;
}

SpaceIndex SpaceIndex::operator-(const SpaceIndex& o) const {
    SpaceIndex r = *this;
    for (size_t i = 0; i < c.size(); ++i) r.c[i] -= o.c[i];
    return r;
}

std::string SpaceIndex::to_string() const {
    std::string s = "(";
    for (size_t i = 0; i < c.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(c[i]);
    }
    return s + ")";
}

SpaceIndex SpaceIndex::parse(const std::string& text) {
    if (text.size() < 2 || text.front() != '(' || text.back() != ')')
        throw std::invalid_argument("bad space index: " + text);
    std::vector<int> comps;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t pos = 0;
        int v = std::stoi(item, &pos);
        if (v < 0) throw std::invalid_argument("negative component in " + text);
        comps.push_back(v);
    }
    if (comps.size() < 2) throw std::invalid_argument("space index needs 1+d >= 2 components: " + text);
    return SpaceIndex(comps);
}

long long binomial(int m, int n) {
    if (n < 0 || n > m) return 0;
    long long r = 1;
    for (int j = 1; j <= n; ++j) r = r * (m - n + j) / j;
    return r;
}

long long binomial(const SpaceIndex& m, const SpaceIndex& n) {
    long long r = 1;
    for (size_t i = 0; i < m.c.size(); ++i) {
        r *= binomial(m.c[i], n.c[i]);
        if (r == 0) return 0;
    }
    return r;
}

std::vector<SpaceIndex> space_indices_up_to(int d, int max_weight) {
    std::vector<SpaceIndex> out;
    if (max_weight < 0) return out;
    std::vector<int> cur(static_cast<size_t>(d + 1), 0);
    auto rec = [&](auto&& self, int axis, int budget) -> void {
        if (axis > d) {
            out.emplace_back(cur);
            return;
        }
        int step = axis == 0 ? 2 : 1;
        for (int v = 0; v * step <= budget; ++v) {
            cur[static_cast<size_t>(axis)] = v;
            self(self, axis + 1, budget - v * step);
        }
        cur[static_cast<size_t>(axis)] = 0;
    };
    rec(rec, 0, max_weight);
    std::sort(out.begin(), out.end(), [](const SpaceIndex& a, const SpaceIndex& b) {
        if (a.weight() != b.weight()) return a.weight() < b.weight();
        return a < b;
    });
    return out;
}

MultiIndex MultiIndex::cubic(int k) {
    MultiIndex b;
    b.count3_ = k;
    return b;
}

MultiIndex MultiIndex::poly(const SpaceIndex& n, int m) {
    MultiIndex b;
    if (m > 0) b.poly_[n] = m;
    return b;
}

int MultiIndex::at(const SpaceIndex& n) const {
    auto it = poly_.find(n);
    return it == poly_.end() ? 0 : it->second;
}

int MultiIndex::poly_length() const {
    int l = 0;
    for (const auto& [n, m] : poly_) l += m;
    return l;
}

bool MultiIndex::is_pp() const {
    return count3_ == 0 && poly_.size() == 1 && poly_.begin()->second == 1;
}

const SpaceIndex& MultiIndex::pp_index() const {
    if (!is_pp()) throw DomainError("not purely polynomial: " + to_string());
    return poly_.begin()->first;
}

SpaceIndex MultiIndex::poly_moment(int d) const {
    SpaceIndex s = SpaceIndex::zero(d);
    for (const auto& [n, m] : poly_)
        for (size_t i = 0; i < n.c.size(); ++i) s.c[i] += m * n.c[i];
    return s;
}

bool MultiIndex::zero_supported() const {
    for (const auto& [n, m] : poly_)
        if (!n.is_zero()) return false;
    return true;
}

bool MultiIndex::leq(const MultiIndex& o) const {
    if (count3_ > o.count3_) return false;
    for (const auto& [n, m] : poly_)
        if (m > o.at(n)) return false;
    return true;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const {
    MultiIndex r = *this;
    r.count3_ += o.count3_;
    for (const auto& [n, m] : o.poly_) r.poly_[n] += m;
    return r;
}

MultiIndex MultiIndex::operator-(const MultiIndex& o) const {
    if (!o.leq(*this)) throw DomainError("multi-index difference would be negative");
    MultiIndex r = *this;
    r.count3_ -= o.count3_;
    for (const auto& [n, m] : o.poly_) {
        auto it = r.poly_.find(n);
        it->second -= m;
        if (it->second == 0) r.poly_.erase(it);
    }
    return r;
}

MultiIndex& MultiIndex::add3(int k) {
    count3_ += k;
    if (count3_ < 0) throw DomainError("negative count of 3");
    return *this;
}

MultiIndex& MultiIndex::add(const SpaceIndex& n, int m) {
    int& v = poly_[n];
    v += m;
    if (v < 0) throw DomainError("negative decoration count");
    if (v == 0) poly_.erase(n);
    return *this;
}

std::string MultiIndex::to_string() const {
    std::string s = std::to_string(count3_) + "|";
    bool first = true;
    for (const auto& [n, m] : poly_) {
        if (!first) s += ",";
        first = false;
        s += n.to_string() + ":" + std::to_string(m);
    }
    return s;
}

MultiIndex MultiIndex::parse(const std::string& text) {
    auto bar = text.find('|');
    if (bar == std::string::npos) throw std::invalid_argument("multi-index needs 'k|...': " + text);
    MultiIndex b;
    size_t pos = 0;
    std::string head = text.substr(0, bar);
    b.count3_ = std::stoi(head, &pos);
    if (pos != head.size() || b.count3_ < 0) throw std::invalid_argument("bad count in " + text);
    std::string rest = text.substr(bar + 1);
    size_t i = 0;
    int dim = -1;
    while (i < rest.size()) {
        if (rest[i] == ',') { ++i; continue; }
        auto close = rest.find(')', i);
        if (rest[i] != '(' || close == std::string::npos) throw std::invalid_argument("bad decoration in " + text);
        SpaceIndex n = SpaceIndex::parse(rest.substr(i, close - i + 1));
        if (dim >= 0 && n.dim() != dim) throw std::invalid_argument("mixed dimensions in " + text);
        dim = n.dim();
        if (close + 1 >= rest.size() || rest[close + 1] != ':') throw std::invalid_argument("missing ':' in " + text);
        size_t j = close + 2, used = 0;
        int m = std::stoi(rest.substr(j), &used);
        if (m <= 0) throw std::invalid_argument("decoration counts must be positive in " + text);
        b.poly_[n] += m;
        i = j + used;
    }
    return b;
}

std::string ModelParams::validate() const {
    if (d < 1) return "d must be a positive integer";
    Rational a = alpha();
    if (!(a > Rational(-1) && a < Rational(0))) return "alpha = 2+s-D/2 must lie in (-1,0)";
    if (!(Rational(3) * a + D() / Rational(2) > Rational(0))) return "3 alpha + D/2 must be positive";
    if (D() < Rational(3)) return "D must be at least 3";
    if (!(rho > 0 && rho < L)) return "need 0 < rho < L";
    if (!(L > 0)) return "L must be positive";
    return {};
}

Rational homogeneity(const MultiIndex& b, const ModelParams& p) {
    Rational a = p.alpha();
    Rational h = a + Rational(2 * b.count3()) * (Rational(1) + a);
    for (const auto& [n, m] : b.poly_part()) h += Rational(m) * (Rational(n.weight()) - a);
    return h;
}

int noise_homogeneity(const MultiIndex& b) { return 2 * b.count3() - b.poly_length(); }

int poly_weight(const MultiIndex& b) {
    int w = 0;
    for (const auto& [n, m] : b.poly_part()) w += m * n.weight();
    return w;
}

Rational precedence(const MultiIndex& b, const ModelParams& p) {
    return homogeneity(b, p) + p.D() / Rational(2) * Rational(noise_homogeneity(b) + 1);
}

IndexClass classify(const MultiIndex& b) {
    if (b.is_zero()) return IndexClass::zero;
    if (b.is_pp()) return IndexClass::purely_polynomial;
    int nh = noise_homogeneity(b);
    if (b.count3() == 1 && b.poly_length() == 3) return IndexClass::cubic_poly_form;
    if (nh >= 0) return IndexClass::noise_nonneg;
    return IndexClass::unpopulated;
}

const char* class_name(IndexClass c) {
    switch (c) {
        case IndexClass::zero: return "zero";
        case IndexClass::purely_polynomial: return "purely_polynomial";
        case IndexClass::cubic_poly_form: return "cubic_poly_form";
        case IndexClass::noise_nonneg: return "noise_nonneg";
        case IndexClass::unpopulated: return "unpopulated";
    }
    return "?";
}

void sort_by_precedence(std::vector<MultiIndex>& v, const ModelParams& p) {
    std::stable_sort(v.begin(), v.end(), [&](const MultiIndex& a, const MultiIndex& b) {
        Rational pa = precedence(a, p), pb = precedence(b, p);
        if (pa != pb) return pa < pb;
        if (a.plain_length() != b.plain_length()) return a.plain_length() < b.plain_length();
        return a < b;
    });
}

void sort_by_homogeneity(std::vector<MultiIndex>& v, const ModelParams& p) {
    std::stable_sort(v.begin(), v.end(), [&](const MultiIndex& a, const MultiIndex& b) {
        Rational ha = homogeneity(a, p), hb = homogeneity(b, p);
        if (ha != hb) return ha < hb;
        if (a.plain_length() != b.plain_length()) return a.plain_length() < b.plain_length();
        return a < b;
    });
}

namespace {

// all multisets of size m drawn from cand (sorted), total weight <= budget
void multisets(const std::vector<SpaceIndex>& cand, size_t start, int m, int budget,
               std::vector<SpaceIndex>& cur, std::vector<std::vector<SpaceIndex>>& out) {
    if (m == 0) {
        out.push_back(cur);
        return;
    }
    for (size_t i = start; i < cand.size(); ++i) {
        int w = cand[i].weight();
        if (w * m > budget) continue;
        cur.push_back(cand[i]);
        multisets(cand, i, m - 1, budget - w, cur, out);
        cur.pop_back();
    }
}

}  // namespace

std::vector<MultiIndex> enumerate_populated(double cutoff, const ModelParams& p, const EnumerateOptions& opt) {
    const double a = p.alpha_d();
    const double half_D = 0.5 * (2 + p.d);
    const bool prec = opt.grading == Grading::precedence;
    // value of the grading with all decorations equal to 0
    auto base = [&](int k, int m) {
        double h = a + 2.0 * k * (1.0 + a) - m * a;
        if (prec) h += half_D * (2 * k - m + 1);
        return h;
    };
    auto kmin = [&](int k) {
        if (k == 0) return std::min(base(0, 0), base(0, 1));
        return prec ? base(k, 2 * k) : base(k, 0);
    };
    std::vector<MultiIndex> out;
    for (int k = 0;; ++k) {
        bool any = kmin(k) < cutoff || (k == 1 && base(1, 3) < cutoff);
        if (!any && k > 1) break;
        if (k > 10000) throw std::runtime_error("enumeration did not terminate");
        std::vector<int> ms;
        if (k == 0) ms = {0, 1};
        else {
            for (int m = 0; m <= 2 * k; ++m) ms.push_back(m);
            if (k == 1) ms.push_back(3);
        }
        for (int m : ms) {
            double b0 = base(k, m);
            if (!(b0 < cutoff)) continue;
            int budget = static_cast<int>(std::ceil(cutoff - b0)) + 1;
            std::vector<SpaceIndex> cand = space_indices_up_to(p.d, budget);
            if (opt.support) {
                std::vector<SpaceIndex> f;
                for (auto& n : cand)
                    if (opt.support->count(n)) f.push_back(n);
                cand.swap(f);
            }
            std::vector<std::vector<SpaceIndex>> sets;
            std::vector<SpaceIndex> cur;
            multisets(cand, 0, m, budget, cur, sets);
            for (auto& set : sets) {
                MultiIndex b = MultiIndex::cubic(k);
                for (auto& n : set) b.add(n);
                if (!populated(b)) continue;
                double v = to_double(prec ? precedence(b, p) : homogeneity(b, p));
                if (v < cutoff) out.push_back(b);
            }
        }
    }
    sort_by_precedence(out, p);
    return out;
}

std::vector<int> counterterm_range(const ModelParams& p) {
    std::vector<int> ks;
    Rational bound = Rational(1) / (Rational(1) + p.alpha());
    for (int k = 1; Rational(k) < bound; ++k) ks.push_back(k);
    return ks;
}

long long multinomial_sigma(const MultiIndex& b) {
    if (classify(b) != IndexClass::cubic_poly_form)
        throw DomainError("multinomial_sigma needs a cubic polynomial form, got " + b.to_string());
    long long f = 1;
    int total = 0;
    for (const auto& [n, m] : b.poly_part()) {
        for (int j = 1; j <= m; ++j) f *= j;
        total += m;
    }
    long long t = 1;
    for (int j = 2; j <= total; ++j) t *= j;
    return t / f;
}

}  // namespace mim
