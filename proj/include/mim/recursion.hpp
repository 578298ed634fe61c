#pragma once

#include "mim/grading.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mim {

enum class Noise { none, xi, dxi };

// coeff * prod Pi[pi] * dPi[delta] * prod c[k] * noise * prod y^n
struct Term {
    long long coeff = 1;
    std::vector<MultiIndex> pi;
    std::optional<MultiIndex> delta;
    std::vector<int> c;
    Noise noise = Noise::none;
    // polynomial markers standing for substituted Pi[delta_n], n != 0
    std::vector<SpaceIndex> poly;

    // everything but the coefficient, canonically sorted
    auto signature() const { return std::tie(pi, delta, c, noise, poly); }
    void canonicalize();
    int delta_count() const { return (delta ? 1 : 0) + (noise == Noise::dxi ? 1 : 0); }
};

struct Expr {
    std::vector<Term> terms;

    bool empty() const { return terms.empty(); }
    std::string to_string() const;
    nlohmann::json to_json() const;
    // merges equal signatures, drops zero coefficients, sorts
    static Expr from_terms(std::vector<Term> raw);
};

struct ExprOptions {
    // replace Pi[delta_n] by the polynomial marker y^n (and by 1 for n = 0)
    bool substitute_pp = true;
};

class UnsupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Populated sub-multi-indices gamma <= beta.
std::vector<MultiIndex> populated_below(const MultiIndex& beta);

Expr pi_minus_expr(const MultiIndex& beta, const ExprOptions& opt = {});
Expr delta_pi_minus_expr(const MultiIndex& beta, const ExprOptions& opt = {});

struct PolynomialPart {
    long long sigma;
    SpaceIndex n;
};
PolynomialPart polynomial_part(const MultiIndex& beta, int d);

// canonical tree string -> multiplicity
std::map<std::string, long long> tree_expand(const MultiIndex& beta);

struct DependencyReport {
    MultiIndex beta;
    std::vector<MultiIndex> gammas;
    std::vector<int> ks;
    bool noise = false;
    bool diagonal = false;  // beta = k delta_3 + delta_0 carries c_k
    std::vector<std::pair<std::string, bool>> checks;

    bool ok() const;
    nlohmann::json to_json() const;
};

DependencyReport dependency_report(const MultiIndex& beta, const ModelParams& p);

// Bookkeeping weights of a term: noise count and homogeneity (exact).
int term_noise_count(const Term& t);
Rational term_homogeneity(const Term& t, const ModelParams& p);

std::string symbol_name(const MultiIndex& b);

}  // namespace mim
