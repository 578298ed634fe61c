#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mim/algebra.hpp"

#include <random>

using namespace mim;

namespace {

ModelParams defaults() { return ModelParams{}; }

SpaceIndex si(int n0, int n1) { return SpaceIndex({n0, n1}); }

const double kTrunc = 12.0;
// above every product of three samples, so truncation never acts in the ring-law checks
const double kWide = 40.0;

std::vector<MultiIndex> small_indices() {
    std::vector<MultiIndex> v;
    std::vector<SpaceIndex> dec = {si(0, 0), si(0, 1), si(1, 0)};
    for (int k = 0; k <= 2; ++k)
        for (int a = 0; a <= 2; ++a)
            for (int b = 0; b <= 1; ++b)
                for (int c = 0; c <= 1; ++c) {
                    MultiIndex m = MultiIndex::cubic(k);
                    if (a) m.add(dec[0], a);
                    if (b) m.add(dec[1], b);
                    if (c) m.add(dec[2], c);
                    v.push_back(m);
                }
    return v;
}

Series<Rational> random_series(std::mt19937_64& rng, int terms) {
    auto idx = small_indices();
    std::uniform_int_distribution<size_t> pick(0, idx.size() - 1);
    std::uniform_int_distribution<int> num(-5, 5), den(1, 4);
    Series<Rational> s(defaults(), kWide);
    for (int i = 0; i < terms; ++i) s.set(idx[pick(rng)], Rational(num(rng), den(rng)));
    return s;
}

bool same(const Series<Rational>& a, const Series<Rational>& b) { return a.coeffs() == b.coeffs(); }

}  // namespace

TEST_CASE("series multiplication examples") {
    auto p = defaults();
    auto z3 = Series<double>::monomial(p, kTrunc, MultiIndex::cubic());
    auto z0 = Series<double>::monomial(p, kTrunc, MultiIndex::poly(si(0, 0)));
    auto prod = z3 * z0;
    CHECK(prod.coeffs().size() == 1);
    CHECK(prod.get(MultiIndex::parse("1|(0,0):1")) == 1.0);

    auto one = Series<double>::unit(p, kTrunc);
    auto a = z3 + z0.scaled(2.5);
    CHECK((one * a).coeffs() == a.coeffs());

    auto sum = z0 + z3;
    auto sq = sum * sum;
    CHECK(sq.coeffs().size() == 3);
    CHECK(sq.get(MultiIndex::parse("0|(0,0):2")) == 1.0);
    CHECK(sq.get(MultiIndex::parse("1|(0,0):1")) == 2.0);
    CHECK(sq.get(MultiIndex::parse("2|")) == 1.0);
}

TEST_CASE("truncation drops high precedence") {
    auto p = defaults();
    Series<double> s(p, 2.0);
    s.set(MultiIndex::cubic(), 1.0);  // |delta_3|_prec = 4.02
    CHECK(s.coeffs().empty());
    s.set(MultiIndex::zero(), 1.0);
    CHECK(s.coeffs().size() == 1);
}

TEST_CASE("counterterm embedding") {
    auto p = defaults();
    auto c = embed_counterterm<double>({{1, -3.2}}, p, kTrunc);
    CHECK(c.coeffs().size() == 1);
    CHECK(c.get(MultiIndex::cubic()) == -3.2);
    CHECK(embed_counterterm<double>({}, p, kTrunc).coeffs().empty());
    auto c2 = embed_counterterm<double>({{1, 1.0}, {2, 2.0}}, p, kTrunc);
    CHECK(c2.coeffs().size() == 2);
    CHECK(c2.get(MultiIndex::cubic(2)) == 2.0);
}

TEST_CASE("derivation examples") {
    auto p = defaults();
    MultiIndex z0 = MultiIndex::poly(si(0, 0));
    auto sq = Series<double>::monomial(p, kTrunc, MultiIndex::poly(si(0, 0), 2));
    auto d = derivation_apply(si(0, 0), sq);
    CHECK(d.coeffs().size() == 1);
    CHECK(d.get(z0) == 2.0);
    CHECK(derivation_apply(si(0, 1), Series<double>::unit(p, kTrunc)).coeffs().empty());
    auto zm = Series<double>::monomial(p, kTrunc, MultiIndex::poly(si(0, 1)));
    CHECK(derivation_apply(si(0, 1), zm).get(MultiIndex::zero()) == 1.0);
    CHECK(derivation_apply(si(0, 0), zm).coeffs().empty());
}

TEST_CASE("ring laws and Leibniz hold exactly on random rational series") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        auto a = random_series(rng, 6), b = random_series(rng, 6), c = random_series(rng, 6);
        CHECK(same(a * b, b * a));
        CHECK(same((a * b) * c, a * (b * c)));
        CHECK(same(Series<Rational>::unit(defaults(), kWide) * a, a));
        CHECK(same(a * (b + c), a * b + a * c));
        for (const auto& n : {si(0, 0), si(0, 1), si(1, 0)}) {
            auto lhs = derivation_apply(n, a * b);
            auto rhs = derivation_apply(n, a) * b + a * derivation_apply(n, b);
            CHECK(same(lhs, rhs));
        }
    }
}

TEST_CASE("endomorphism action and composition") {
    auto p = defaults();
    auto idx = small_indices();
    auto id = Endo<double>::identity(idx);
    std::mt19937_64 rng(3);
    Series<double> a(p, kTrunc);
    std::normal_distribution<double> g;
    for (const auto& b : idx) a.set(b, g(rng));
    CHECK(id.apply(a).coeffs() == a.coeffs());

    Endo<double> single;
    MultiIndex bh = MultiIndex::parse("1|(0,0):1"), gh = MultiIndex::parse("0|(0,1):1");
    single.set(bh, gh, 2.5);
    auto out = single.apply(Series<double>::monomial(p, kTrunc, gh));
    CHECK(out.coeffs().size() == 1);
    CHECK(out.get(bh) == 2.5);

    // random strictly triangular (in precedence) endomorphisms
    auto strict = [&](unsigned seed) {
        std::mt19937_64 r(seed);
        Endo<double> e;
        for (const auto& b : idx) {
            e.ensure_row(b);
            for (const auto& c : idx)
                if (precedence(c, p) < precedence(b, p) && (r() % 3 == 0)) e.set(b, c, g(r));
        }
        return e;
    };
    auto n1 = strict(11), n2 = strict(12), n3 = strict(13);
    auto prod = n1.compose(n2);
    for (const auto& [b, row] : prod.rows())
        for (const auto& [c, v] : row) CHECK(precedence(c, p) < precedence(b, p));
    auto lhs = n1.compose(n2).compose(n3), rhs = n1.compose(n2.compose(n3));
    CHECK((lhs - rhs).max_norm() < 1e-12);
    CHECK((id.compose(n1) - n1).max_norm() == 0.0);

    auto u = id + n1;
    auto inv = u.inverse();
    CHECK((u.compose(inv) - id).max_norm() < 1e-12);
    CHECK((inv.compose(u) - id).max_norm() < 1e-12);
}

TEST_CASE("exact inverse in rational mode") {
    auto p = defaults();
    auto idx = small_indices();
    auto id = Endo<Rational>::identity(idx);
    Endo<Rational> u = id;
    for (const auto& b : idx)
        for (const auto& c : idx)
            if (precedence(c, p) < precedence(b, p) && b.count3() >= c.count3())
                u.set(b, c, Rational(b.plain_length() - c.plain_length() + 1, 3));
    auto inv = u.inverse();
    CHECK((u.compose(inv) - id).max_norm() == 0.0);
}

TEST_CASE("multiplicativity harness") {
    auto p = defaults();
    // rows: all polynomial-only multi-indices of length <= 2 over small decorations
    std::vector<SpaceIndex> dec = space_indices_up_to(1, 3);
    std::vector<MultiIndex> rows{MultiIndex::zero()};
    for (size_t i = 0; i < dec.size(); ++i) {
        rows.push_back(MultiIndex::poly(dec[i]));
        for (size_t j = i; j < dec.size(); ++j) {
            MultiIndex b = MultiIndex::poly(dec[i]);
            b.add(dec[j]);
            rows.push_back(b);
        }
    }
    const double trunc = 50.0;
    std::vector<std::pair<Series<double>, Series<double>>> samples;
    for (size_t i = 0; i < dec.size(); ++i)
        for (size_t j = 0; j < dec.size(); ++j)
            samples.emplace_back(Series<double>::monomial(p, trunc, MultiIndex::poly(dec[i])),
                                 Series<double>::monomial(p, trunc, MultiIndex::poly(dec[j])));

    CHECK(multiplicativity_check(Endo<double>::identity(rows), samples) == 0.0);

    std::vector<double> x = {0.3, -0.7};
    auto t = translation_endo(x, rows, rows);
    CHECK(multiplicativity_check(t, samples) < 1e-13);
    // pp x pp block is binom(m, n) x^{m-n}
    for (const auto& m : dec)
        for (const auto& n : dec) {
            double expect = n.leq(m) ? binomial(m, n) * monomial(x, m - n) : 0.0;
            CHECK(t.get(MultiIndex::poly(m), MultiIndex::poly(n)) == doctest::Approx(expect).epsilon(1e-14));
        }
    // translation by x then by -x is the identity
    std::vector<double> mx = {-0.3, 0.7};
    auto back = translation_endo(mx, rows, rows);
    CHECK((t.compose(back) - Endo<double>::identity(rows)).max_norm() < 1e-13);

    Endo<double> bad = Endo<double>::identity(rows);
    bad.set(MultiIndex::poly(si(0, 0), 2), MultiIndex::poly(si(0, 0), 2), 3.0);
    CHECK(multiplicativity_check(bad, samples) > 0.5);
}

TEST_CASE("json dump uses canonical keys") {
    auto p = defaults();
    auto s = Series<double>::monomial(p, kTrunc, MultiIndex::parse("1|(0,0):1"), 2.0);
    CHECK(s.to_json().dump() == R"({"1|(0,0):1":2.0})");
    Endo<Rational> e;
    e.set(MultiIndex::cubic(), MultiIndex::zero(), Rational(1, 3));
    CHECK(e.to_json().dump() == R"({"1|":{"0|":"1/3"}})");
}
