#include "mim/recursion.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace mim {

void Term::canonicalize() {
    std::sort(pi.begin(), pi.end());
    std::sort(c.begin(), c.end());
    std::sort(poly.begin(), poly.end());
}

std::string symbol_name(const MultiIndex& b) { return b.is_zero() ? "0" : b.to_string(); }

namespace {

// Printing order: more Pi factors first, then lexicographic.
bool print_before(const Term& a, const Term& b) {
    size_t na = a.pi.size() + (a.delta ? 1 : 0), nb = b.pi.size() + (b.delta ? 1 : 0);
    if (na != nb) return na > nb;
    return a.signature() < b.signature();
}

template <class T, class F>
void power_groups(const std::vector<T>& v, F&& emit) {
    for (size_t i = 0; i < v.size();) {
        size_t j = i;
        while (j < v.size() && v[j] == v[i]) ++j;
        emit(v[i], static_cast<int>(j - i));
        i = j;
    }
}

const char* noise_name(Noise n) {
    switch (n) {
        case Noise::xi: return "xi";
        case Noise::dxi: return "dxi";
        default: return "none";
    }
}

}  // namespace

Expr Expr::from_terms(std::vector<Term> raw) {
    std::vector<Term> merged;
    for (auto& t : raw) {
        t.canonicalize();
        auto it = std::find_if(merged.begin(), merged.end(),
                               [&](const Term& m) { return m.signature() == t.signature(); });
        if (it == merged.end()) merged.push_back(t);
        else it->coeff += t.coeff;
    }
    std::erase_if(merged, [](const Term& t) { return t.coeff == 0; });
    std::sort(merged.begin(), merged.end(), print_before);
    return Expr{merged};
}

std::string Expr::to_string() const {
    if (terms.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& t : terms) {
        long long c = t.coeff;
        if (!first) os << (c < 0 ? " - " : " + ");
        else if (c < 0) os << "-";
        first = false;
        c = std::abs(c);
        std::vector<std::string> f;
        power_groups(t.c, [&](int k, int m) {
            f.push_back("c[" + std::to_string(k) + "]" + (m > 1 ? "^" + std::to_string(m) : ""));
        });
        power_groups(t.pi, [&](const MultiIndex& b, int m) {
            f.push_back("Pi[" + symbol_name(b) + "]" + (m > 1 ? "^" + std::to_string(m) : ""));
        });
        if (t.delta) f.push_back("dPi[" + symbol_name(*t.delta) + "]");
        if (t.noise != Noise::none) f.push_back(noise_name(t.noise));
        power_groups(t.poly, [&](const SpaceIndex& n, int m) {
            f.push_back("y^" + n.to_string() + (m > 1 ? "^" + std::to_string(m) : ""));
        });
        std::string body;
        for (size_t i = 0; i < f.size(); ++i) body += (i ? "*" : "") + f[i];
        if (body.empty()) os << c;
        else if (c == 1) os << body;
        else os << c << "*" << body;
    }
    return os.str();
}

nlohmann::json Expr::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : terms) {
        nlohmann::json j;
        j["coeff"] = t.coeff;
        j["pi"] = nlohmann::json::array();
        for (const auto& b : t.pi) j["pi"].push_back(b.to_string());
        j["delta"] = t.delta ? nlohmann::json(t.delta->to_string()) : nlohmann::json(nullptr);
        j["c"] = t.c;
        j["noise"] = noise_name(t.noise);
        j["poly"] = nlohmann::json::array();
        for (const auto& n : t.poly) j["poly"].push_back(n.to_string());
        arr.push_back(j);
    }
    return arr;
}

std::vector<MultiIndex> populated_below(const MultiIndex& beta) {
    std::vector<std::pair<SpaceIndex, int>> comps(beta.poly_part().begin(), beta.poly_part().end());
    std::vector<MultiIndex> out;
    std::function<void(size_t, MultiIndex)> rec = [&](size_t i, MultiIndex cur) {
        if (i == comps.size()) {
            for (int k = 0; k <= beta.count3(); ++k) {
                MultiIndex g = cur;
                g.add3(k);
                if (populated(g)) out.push_back(g);
            }
            return;
        }
        for (int m = 0; m <= comps[i].second; ++m) {
            MultiIndex g = cur;
            if (m) g.add(comps[i].first, m);
            rec(i + 1, g);
        }
    };
    rec(0, MultiIndex::zero());
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

void push_factor(Term& t, const MultiIndex& g, const ExprOptions& opt) {
    if (opt.substitute_pp && g.is_pp()) {
        if (!g.pp_index().is_zero()) t.poly.push_back(g.pp_index());
        return;
    }
    t.pi.push_back(g);
}

}  // namespace

Expr pi_minus_expr(const MultiIndex& beta, const ExprOptions& opt) {
    std::vector<Term> raw;
    if (beta.is_zero()) {
        Term t;
        t.noise = Noise::xi;
        raw.push_back(t);
    }
    if (beta.count3() >= 1) {
        MultiIndex rem = beta - MultiIndex::cubic(1);
        auto cand = populated_below(rem);
        std::set<MultiIndex> cset(cand.begin(), cand.end());
        for (size_t i = 0; i < cand.size(); ++i)
            for (size_t j = i; j < cand.size(); ++j) {
                MultiIndex s = cand[i] + cand[j];
                if (!s.leq(rem)) continue;
                MultiIndex g3 = rem - s;
                if (!cset.count(g3) || g3 < cand[j]) continue;
                const MultiIndex &g1 = cand[i], &g2 = cand[j];
                long long mult = (g1 == g2 && g2 == g3) ? 1 : (g1 == g2 || g2 == g3) ? 3 : 6;
                Term t;
                t.coeff = mult;
                push_factor(t, g1, opt);
                push_factor(t, g2, opt);
                push_factor(t, g3, opt);
                raw.push_back(t);
            }
    }
    for (int k = 1; k <= beta.count3(); ++k) {
        MultiIndex g = beta - MultiIndex::cubic(k);
        if (!populated(g)) continue;
        Term t;
        t.c.push_back(k);
        push_factor(t, g, opt);
        raw.push_back(t);
    }
    return Expr::from_terms(raw);
}

Expr delta_pi_minus_expr(const MultiIndex& beta, const ExprOptions& opt) {
    Expr base = pi_minus_expr(beta, opt);
    std::vector<Term> raw;
    for (const auto& t : base.terms) {
        if (t.noise == Noise::xi) {
            Term d = t;
            d.noise = Noise::dxi;
            raw.push_back(d);
            continue;
        }
        // Leibniz over the random factors; polynomial markers and constants are deterministic
        for (size_t i = 0; i < t.pi.size(); ++i) {
            if (i > 0 && t.pi[i] == t.pi[i - 1]) continue;
            long long m = std::count(t.pi.begin(), t.pi.end(), t.pi[i]);
            Term d = t;
            d.coeff = t.coeff * m;
            d.delta = t.pi[i];
            d.pi.erase(d.pi.begin() + static_cast<long>(i));
            raw.push_back(d);
        }
    }
    return Expr::from_terms(raw);
}

PolynomialPart polynomial_part(const MultiIndex& beta, int d) {
    if (classify(beta) != IndexClass::cubic_poly_form)
        throw DomainError("polynomial_part requires delta_3 plus three polynomial decorations");
    return {multinomial_sigma(beta), beta.poly_moment(d)};
}

namespace {

using TreeSum = std::map<std::string, long long>;

TreeSum tree_product(const std::vector<TreeSum>& factors) {
    // distribute; each summand is a multiset of children
    std::vector<std::pair<std::vector<std::string>, long long>> acc{{{}, 1}};
    for (const auto& f : factors) {
        std::vector<std::pair<std::vector<std::string>, long long>> next;
        for (const auto& [kids, c] : acc)
            for (const auto& [t, w] : f) {
                auto k2 = kids;
                k2.push_back(t);
                next.emplace_back(std::move(k2), c * w);
            }
        acc = std::move(next);
    }
    TreeSum out;
    for (auto& [kids, c] : acc) {
        std::sort(kids.begin(), kids.end());
        std::string s = "(";
        for (const auto& k : kids) s += k;
        s += ")";
        out[s] += c;
    }
    return out;
}

TreeSum tree_minus(const MultiIndex& beta);

TreeSum tree_plain(const MultiIndex& g) {
    TreeSum inner = tree_minus(g);
    TreeSum out;
    for (const auto& [t, c] : inner) out["I(" + t + ")"] += c;
    return out;
}

TreeSum tree_minus(const MultiIndex& beta) {
    if (beta.is_zero()) return {{"X", 1}};
    if (!populated(beta) || beta.is_pp()) throw UnsupportedError("no tree expansion for " + beta.to_string());
    if (beta.count3() > 2) throw UnsupportedError("tree dictionary covers at most two cubic factors");
    TreeSum out;
    for (const auto& t : pi_minus_expr(beta).terms) {
        if (!t.c.empty()) continue;  // counterterms are absorbed in the renormalized tree model
        if (!t.poly.empty()) throw UnsupportedError("polynomial decorations are not expanded into trees");
        std::vector<TreeSum> factors;
        for (const auto& g : t.pi) factors.push_back(tree_plain(g));
        for (const auto& [s, c] : tree_product(factors)) out[s] += t.coeff * c;
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
    return out;
}

}  // namespace

std::map<std::string, long long> tree_expand(const MultiIndex& beta) { return tree_minus(beta); }

bool DependencyReport::ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
}

nlohmann::json DependencyReport::to_json() const {
    nlohmann::json j;
    j["beta"] = beta.to_string();
    j["gammas"] = nlohmann::json::array();
    for (const auto& g : gammas) j["gammas"].push_back(g.to_string());
    j["ks"] = ks;
    j["noise"] = noise;
    j["diagonal"] = diagonal;
    j["checks"] = nlohmann::json::object();
    for (const auto& [name, pass] : checks) j["checks"][name] = pass;
    j["ok"] = ok();
    return j;
}

DependencyReport dependency_report(const MultiIndex& beta, const ModelParams& p) {
    DependencyReport r;
    r.beta = beta;
    Expr e = pi_minus_expr(beta);
    std::set<MultiIndex> gs;
    std::set<int> ks;
    for (const auto& t : e.terms) {
        for (const auto& g : t.pi) gs.insert(g);
        for (int k : t.c) ks.insert(k);
        if (t.noise == Noise::xi) r.noise = true;
    }
    r.gammas.assign(gs.begin(), gs.end());
    r.ks.assign(ks.begin(), ks.end());
    bool cubic_lower = true, hom_lower = true, k_bound = true;
    for (const auto& g : r.gammas) {
        cubic_lower &= g.count3() < beta.count3();
        hom_lower &= homogeneity(g, p) < homogeneity(beta, p);
    }
    for (int k : r.ks) k_bound &= k <= beta.count3();
    r.checks.emplace_back("cubic_count_lower", cubic_lower);
    r.checks.emplace_back("homogeneity_lower", hom_lower);
    r.checks.emplace_back("counterterm_degree_bounded", k_bound);
    MultiIndex diag = MultiIndex::cubic(beta.count3());
    diag.add(SpaceIndex::zero(p.d));
    if (beta.count3() >= 1 && beta == diag) {
        r.diagonal = std::find(r.ks.begin(), r.ks.end(), beta.count3()) != r.ks.end();
        bool strict = true;
        for (int k : r.ks)
            if (k != beta.count3()) strict &= k < beta.count3();
        r.checks.emplace_back("off_diagonal_counterterms_strict", strict);
    }
    return r;
}

int term_noise_count(const Term& t) {
    int n = 0;
    for (const auto& g : t.pi) n += noise_homogeneity(g) + 1;
    if (t.delta) n += noise_homogeneity(*t.delta) + 1;
    for (int k : t.c) n += 2 * k;
    if (t.noise != Noise::none) n += 1;
    return n;
}

Rational term_homogeneity(const Term& t, const ModelParams& p) {
    Rational a = p.alpha();
    Rational h = 0;
    for (const auto& g : t.pi) h += homogeneity(g, p);
    if (t.delta) h += homogeneity(*t.delta, p);
    for (int k : t.c) h += Rational(2 * k) * (Rational(1) + a) - Rational(2);
    if (t.noise != Noise::none) h += a - Rational(2);
    for (const auto& n : t.poly) h += Rational(n.weight());
    return h;
}

}  // namespace mim
