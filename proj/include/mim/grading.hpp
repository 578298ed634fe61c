#pragma once

#include <boost/rational.hpp>

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mim {

using Rational = boost::rational<long long>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

// Exact parse of a decimal literal such as "-0.745" or "3e-2".
Rational parse_decimal(const std::string& text);
// Best rational approximation with bounded denominator.
Rational approximate_rational(double v, long long max_den = 1000000);

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Space-time index n = (n0, n1, ..., nd); n0 is the time component.
struct SpaceIndex {
    std::vector<int> c;

    SpaceIndex() = default;
    explicit SpaceIndex(std::vector<int> comps) : c(std::move(comps)) {}
    static SpaceIndex zero(int d) { return SpaceIndex(std::vector<int>(d + 1, 0)); }
    static SpaceIndex unit(int d, int axis);

    int dim() const { return static_cast<int>(c.size()) - 1; }
    // parabolic weight 2 n0 + n1 + ... + nd
    int weight() const;
    bool is_zero() const;
    bool leq(const SpaceIndex& o) const;
    long long factorial() const;

    SpaceIndex operator+(const SpaceIndex& o) const;
    SpaceIndex operator-(const SpaceIndex& o) const;
    int operator[](int i) const { return c[static_cast<size_t>(i)]; }

    std::string to_string() const;
    static SpaceIndex parse(const std::string& text);

    auto operator<=>(const SpaceIndex&) const = default;
    bool operator==(const SpaceIndex&) const = default;
};

// binom(m, n) = prod_i binom(m_i, n_i), zero unless n <= m.
long long binomial(const SpaceIndex& m, const SpaceIndex& n);
long long binomial(int m, int n);

// All space indices of dimension d with parabolic weight <= max_weight,
// ordered by (weight, lexicographic).
std::vector<SpaceIndex> space_indices_up_to(int d, int max_weight);

class MultiIndex {
public:
    MultiIndex() = default;

    static MultiIndex zero() { return {}; }
    static MultiIndex cubic(int k = 1);
    static MultiIndex poly(const SpaceIndex& n, int m = 1);

    int count3() const { return count3_; }
    const std::map<SpaceIndex, int>& poly_part() const { return poly_; }
    int at(const SpaceIndex& n) const;

    int poly_length() const;
    int plain_length() const { return count3_ + poly_length(); }
    bool is_zero() const { return count3_ == 0 && poly_.empty(); }
    // true iff beta = delta_n for some n
    bool is_pp() const;
    // the n of a purely polynomial index
    const SpaceIndex& pp_index() const;
    // sum over n of n * beta(n)
    SpaceIndex poly_moment(int d) const;
    // true iff every decoration is n = 0
    bool zero_supported() const;
    // componentwise <=
    bool leq(const MultiIndex& o) const;

    MultiIndex operator+(const MultiIndex& o) const;
    // componentwise difference; requires o.leq(*this)
    MultiIndex operator-(const MultiIndex& o) const;
    MultiIndex& add3(int k);
    MultiIndex& add(const SpaceIndex& n, int m = 1);

    std::string to_string() const;
    static MultiIndex parse(const std::string& text);

    auto operator<=>(const MultiIndex&) const = default;
    bool operator==(const MultiIndex&) const = default;

private:
    int count3_ = 0;
    std::map<SpaceIndex, int> poly_;
};

struct ModelParams {
    int d = 1;
    Rational s = Rational(-149, 200);
    double L = 1.0;
    double rho = 1.0 / 128.0;

    Rational D() const { return Rational(2 + d); }
    Rational alpha() const { return Rational(2) + s - D() / Rational(2); }
    double alpha_d() const { return to_double(alpha()); }
    double s_d() const { return to_double(s); }
    // returns an empty string when valid, else the reason
    std::string validate() const;
};

Rational homogeneity(const MultiIndex& b, const ModelParams& p);
int noise_homogeneity(const MultiIndex& b);
int poly_weight(const MultiIndex& b);
Rational precedence(const MultiIndex& b, const ModelParams& p);

enum class IndexClass { zero, purely_polynomial, cubic_poly_form, noise_nonneg, unpopulated };

IndexClass classify(const MultiIndex& b);
const char* class_name(IndexClass c);
inline bool populated(const MultiIndex& b) { return classify(b) != IndexClass::unpopulated; }

enum class Grading { precedence, homogeneity };

struct EnumerateOptions {
    Grading grading = Grading::precedence;
    // allowed decorations; nullopt means all of N_0^{1+d}
    std::optional<std::set<SpaceIndex>> support;
};

// Populated indices strictly below the cutoff in the chosen grading, sorted by
// (precedence, plain length, lexicographic).
std::vector<MultiIndex> enumerate_populated(double cutoff, const ModelParams& p,
                                            const EnumerateOptions& opt = {});

std::vector<int> counterterm_range(const ModelParams& p);

long long multinomial_sigma(const MultiIndex& b);

// Sort in the induction order used by all recursions.
void sort_by_precedence(std::vector<MultiIndex>& v, const ModelParams& p);
void sort_by_homogeneity(std::vector<MultiIndex>& v, const ModelParams& p);

}  // namespace mim
