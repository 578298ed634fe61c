#include "mim/model.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <stdexcept>

namespace mim {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

Batch bconst(double v, size_t n) { return Batch(v, n); }

Batch to_batch(const std::vector<double>& v) { return Batch(v.data(), v.size()); }

Batch broadcast(Batch v, size_t n) {
    if (v.size() == 1 && n != 1) return Batch(v[0], n);
    if (v.size() == 0) return Batch(0.0, n);
    return v;
}

// coefficient * product of the non-field factors of a term
double scalar_part(const Term& t, const std::map<int, double>& c) {
    double v = static_cast<double>(t.coeff);
    for (int k : t.c) {
        auto it = c.find(k);
        v *= it == c.end() ? 0.0 : it->second;
    }
    return v;
}

// Evaluates a recursion expression on a value type with pointwise products.
template <class V>
struct Evaluator {
    std::function<V(const MultiIndex&)> pi;
    std::function<V(const MultiIndex&)> delta_pi;
    std::function<V(const SpaceIndex&)> marker;
    std::function<V()> noise, delta_noise, one;
    const std::map<int, double>* c = nullptr;

    V term_value(const Term& t) const {
        std::optional<V> acc;
        auto mul = [&](V v) {
            if (!acc) acc = std::move(v);
            else acc = *acc * v;
        };
        for (const auto& g : t.pi) mul(pi(g));
        if (t.delta) mul(delta_pi(*t.delta));
        if (t.noise == Noise::xi) mul(noise());
        if (t.noise == Noise::dxi) mul(delta_noise());
        for (const auto& n : t.poly) mul(marker(n));
        if (!acc) acc = one();
        return *acc * scalar_part(t, *c);
    }

    V operator()(const Expr& e, const std::function<bool(const Term&)>& skip = nullptr) const {
        std::optional<V> sum;
        for (const auto& t : e.terms) {
            if (skip && skip(t)) continue;
            V v = term_value(t);
            if (!sum) sum = std::move(v);
            else *sum += v;
        }
        return sum ? *sum : one() * 0.0;
    }
};

}  // namespace

std::string ModelConfig::validate() const {
    if (auto e = params.validate(); !e.empty()) return e;
    if (auto e = torus.validate(); !e.empty()) return e;
    if (torus.d != params.d) return "torus and model dimensions differ";
    if (torus.L != params.L) return "torus and model periods differ";
    if (!(cutoff > 0)) return "cutoff must be positive";
    if (!(centering_cutoff > 0)) return "centering cutoff must be positive";
    return "";
}

double ModelRealization::pde_residual() const {
    double worst = 0;
    for (const auto& [b, f] : pi) {
        if (b.is_pp()) continue;
        const Field& pm = pi_minus.at(b);
        Field target = band_limit(pm);
        double mean = pm.mean();
        for (auto& v : target.values()) v -= mean;
        Field res = apply_heat(f) - target;
        double scale = std::max(pm.max_abs(), 1e-300);
        worst = std::max(worst, res.max_abs() / scale);
    }
    return worst;
}

std::vector<MultiIndex> periodic_sector(const ModelParams& p, double cutoff) {
    EnumerateOptions opt;
    opt.support = std::set<SpaceIndex>{SpaceIndex::zero(p.d)};
    auto v = enumerate_populated(cutoff, p, opt);
    sort_by_precedence(v, p);
    return v;
}

double zero_cell_variance(const TorusSpec& s, const ModelParams& p) {
    const double sreg = p.s_d(), r4 = std::pow(p.rho, 4);
    const int rank = s.rank();
    boost::math::quadrature::tanh_sinh<double> ts;
    std::vector<double> q(static_cast<size_t>(rank), 0.0);
    std::function<double(int)> nest = [&](int axis) -> double {
        double hi = std::numbers::pi / (axis == 0 ? s.L * s.L : s.L);
        return ts.integrate(
            [&](double v) {
                q[static_cast<size_t>(axis)] = v;
                if (axis + 1 < rank) return nest(axis + 1);
                double sp = 0;
                for (int i = 1; i < rank; ++i) sp += q[static_cast<size_t>(i)] * q[static_cast<size_t>(i)];
                double q4 = q[0] * q[0] + sp * sp;
                if (q4 <= 0) return 0.0;
                return std::pow(q4, -sreg / 2 - 1) * std::exp(-2 * r4 * q4);
            },
            0.0, hi);
    };
    return nest(0) * std::pow(2.0, rank) / std::pow(kTwoPi, rank);
}

double c1_closed_form(const TorusSpec& s, const ModelParams& p, bool zero_mode, int max_wavenumber) {
    Spectrum sp(s);
    const double sreg = p.s_d(), r4 = std::pow(p.rho, 4);
    double sum = 0;
    for (size_t i = 0; i < sp.size(); ++i) {
        if (sp.nyquist(i)) continue;
        if (max_wavenumber >= 0) {
            auto k = sp.wavenumbers(i);
            if (std::any_of(k.begin(), k.end(), [&](int v) { return std::abs(v) > max_wavenumber; })) continue;
        }
        WaveVector q = sp.wave_vector(i);
        if (q.is_zero()) continue;
        double q4 = q.norm4();
        sum += sp.multiplicity(i) * std::pow(q4, -sreg / 2) * std::exp(-2 * r4 * q4) / q4;
    }
    double var = sum / s.volume();
    if (zero_mode) var += zero_cell_variance(s, p);
    return -3 * var;
}


ModelRealization build_model(const Field& xi_raw, double zero_mode, const ModelConfig& cfg) {
    if (auto e = cfg.validate(); !e.empty()) throw std::invalid_argument(e);
    const ModelParams& p = cfg.params;
    ModelRealization m;
    m.params = p;
    m.spec = xi_raw.spec();
    m.xi = mollify(xi_raw, p.rho);
    m.zero_mode = zero_mode;
    m.order = periodic_sector(p, cfg.cutoff);

    std::set<MultiIndex> known(m.order.begin(), m.order.end());
    for (const auto& b : m.order) {
        auto rep = dependency_report(b, p);
        if (!rep.ok()) throw std::logic_error("dependency report failed for " + b.to_string());
        for (const auto& g : rep.gammas)
            if (!known.count(g)) throw std::logic_error("index set not closed: " + b.to_string() + " needs " + g.to_string());
    }
    auto ks = counterterm_range(p);
    std::set<int> renormalized(ks.begin(), ks.end());

    Evaluator<Field> ev;
    ev.pi = [&](const MultiIndex& g) -> Field { return m.pi.at(g); };
    ev.delta_pi = [](const MultiIndex&) -> Field { throw std::logic_error("unexpected derivative factor"); };
    ev.marker = [](const SpaceIndex&) -> Field { throw std::logic_error("unexpected polynomial factor"); };
    ev.noise = [&] { return m.xi; };
    ev.delta_noise = [] () -> Field { throw std::logic_error("unexpected derivative factor"); };
    ev.one = [&] { return Field(m.spec, 1.0); };
    ev.c = &m.c;

    const SpaceIndex zero = SpaceIndex::zero(p.d);
    for (const auto& b : m.order) {
        if (b.is_pp()) {
            m.pi[b] = Field(m.spec, b.pp_index() == zero ? 1.0 : 0.0);
            m.pi_minus[b] = Field(m.spec, 0.0);
            continue;
        }
        Expr e = pi_minus_expr(b);
        // c_k is not yet in the map, so the diagonal term evaluates to zero here
        Field pm = ev(e);
        bool diagonal = b.count3() >= 1 && b.poly_length() == 1 && b.at(zero) == 1;
        if (diagonal) {
            int k = b.count3();
            double ck = 0;
            if (renormalized.count(k)) {
                switch (cfg.policy) {
                    case CounterTermPolicy::space_time: ck = -pm.mean(); break;
                    case CounterTermPolicy::closed_form:
                        if (k != 1) throw std::invalid_argument("closed form only available for c_1");
                        ck = c1_closed_form(m.spec, p, cfg.zero_mode);
                        break;
                    case CounterTermPolicy::fixed: {
                        auto it = cfg.fixed_c.find(k);
                        if (it == cfg.fixed_c.end()) throw std::invalid_argument("missing fixed counterterm");
                        ck = it->second;
                        break;
                    }
                }
            }
            m.c[k] = ck;
            for (auto& v : pm.values()) v += ck;
        }
        m.pi_minus[b] = pm;
        Field u = heat_solve(pm);
        if (b.is_zero()) for (auto& v : u.values()) v += zero_mode;
        m.pi[b] = std::move(u);
    }
    return m;
}

double sample_zero_mode(const ModelConfig& cfg, std::mt19937_64& rng) {
    if (!cfg.zero_mode) return 0.0;
    std::normal_distribution<double> g(0.0, 1.0);
    return std::sqrt(zero_cell_variance(cfg.torus, cfg.params)) * g(rng);
}

ModelRealization sample_model(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Field xi = sample_noise(cfg.torus, cfg.params, rng);
    double z = sample_zero_mode(cfg, rng);
    return build_model(xi, z, cfg);
}

std::vector<MultiIndex> centering_rows(const ModelParams& p, double bound) {
    EnumerateOptions opt;
    opt.grading = Grading::homogeneity;
    auto all = enumerate_populated(bound, p, opt);
    std::vector<MultiIndex> rows;
    for (const auto& b : all)
        if (!b.is_pp()) rows.push_back(b);
    sort_by_precedence(rows, p);
    return rows;
}

std::vector<SpaceIndex> centering_pp(const ModelParams& p, double bound) {
    std::vector<SpaceIndex> out;
    for (const auto& n : space_indices_up_to(p.d, static_cast<int>(std::ceil(bound))))
        if (n.weight() < bound) out.push_back(n);
    return out;
}

namespace {

std::vector<double> origin(const TorusSpec& s) { return std::vector<double>(static_cast<size_t>(s.rank()), 0.0); }

}  // namespace

StationaryModel stationary_model(const ModelRealization& m, double bound) {
    StationaryModel s;
    s.params = m.params;
    s.spec = m.spec;
    s.rows = centering_rows(m.params, bound);
    s.pp = centering_pp(m.params, bound);
    s.c = m.c;
    s.xi = m.xi;
    const auto o = origin(m.spec);

    Evaluator<PolyField> ev;
    ev.pi = [&](const MultiIndex& g) -> PolyField {
        auto it = s.pi.find(g);
        if (it != s.pi.end()) return it->second;
        auto jt = m.pi.find(g);
        if (jt == m.pi.end()) throw std::logic_error("missing reference component " + g.to_string());
        return PolyField::periodic(jt->second, o);
    };
    ev.delta_pi = [](const MultiIndex&) -> PolyField { throw std::logic_error("unexpected derivative factor"); };
    ev.marker = [&](const SpaceIndex& n) { return PolyField::monomial(s.spec, o, n); };
    ev.noise = [&] { return PolyField::periodic(m.xi, o); };
    ev.delta_noise = []() -> PolyField { throw std::logic_error("unexpected derivative factor"); };
    ev.one = [&] { return PolyField::periodic(Field(s.spec, 1.0), o); };
    ev.c = &s.c;

    for (const auto& b : s.rows) {
        if (b.zero_supported()) {
            auto it = m.pi.find(b);
            if (it == m.pi.end()) throw std::logic_error("periodic sector does not contain " + b.to_string());
            s.pi[b] = PolyField::periodic(it->second, o);
            s.pi_minus[b] = PolyField::periodic(m.pi_minus.at(b), o);
            continue;
        }
        PolyField pm = ev(pi_minus_expr(b));
        s.pi_minus[b] = pm;
        s.pi[b] = pm.heat_inverse();
    }
    return s;
}

Centering center(const std::map<MultiIndex, PolyField>& reference, const std::vector<double>& reference_anchor,
                 const std::vector<MultiIndex>& rows, const std::vector<SpaceIndex>& pp, const ModelParams& p,
                 const std::vector<GridPoint>& points) {
    Centering c;
    c.points = points;
    c.rows = rows;
    c.pp = pp;
    const size_t n = points.size();
    if (n == 0) throw std::invalid_argument("no base points");
    const TorusSpec& spec = reference.begin()->second.spec();

    std::vector<std::vector<double>> rel(n);
    for (size_t j = 0; j < n; ++j) {
        rel[j] = point_coords(spec, points[j]);
        for (size_t a = 0; a < rel[j].size(); ++a) rel[j][a] -= reference_anchor[a];
    }

    SubstitutionColumns<Batch> phi;
    for (const auto& m : pp)
        for (const auto& k : pp) {
            if (!k.leq(m)) continue;
            Batch v(n);
            for (size_t j = 0; j < n; ++j) v[j] = static_cast<double>(binomial(m, k)) * monomial(rel[j], m - k);
            c.G.set(MultiIndex::poly(m), MultiIndex::poly(k), v);
            phi[k][MultiIndex::poly(m)] = v;
        }

    for (size_t i = 0; i < rows.size(); ++i) {
        const MultiIndex& b = rows[i];
        double hb = to_double(homogeneity(b, p));
        bool tie = std::abs(hb - std::round(hb)) < 1e-6;
        auto jets = reference.at(b).jets_at(pp, points);
        c.G.set(b, b, bconst(1.0, n));
        for (size_t k = 0; k < i; ++k) {
            Batch v;
            if (product_entry(b, rows[k], phi, v)) c.G.set(b, rows[k], broadcast(v, n));
        }
        for (const auto& nn : pp) {
            Batch acc = to_batch(jets.at(nn));
            for (size_t k = 0; k < i; ++k) {
                Batch g = c.G.get(b, rows[k]);
                if (g.size() == 0) continue;
                acc -= g * c.K.at(rows[k]).at(nn);
            }
            bool extract = nn.weight() < hb - 1e-9;
            if (tie && std::abs(nn.weight() - hb) < 1e-6 && classify(b) != IndexClass::cubic_poly_form)
                throw DegenerateJetError("integer homogeneity at " + b.to_string());
            if (extract) {
                c.G.set(b, MultiIndex::poly(nn), acc);
                phi[nn][b] = acc;
                c.K[b][nn] = bconst(0.0, n);
            } else {
                c.K[b][nn] = acc;
            }
        }
    }
    return c;
}

Centering center(const StationaryModel& m, const std::vector<GridPoint>& points) {
    return center(m.pi, origin(m.spec), m.rows, m.pp, m.params, points);
}

Endo<double> slice(const Endo<Batch>& e, size_t j) {
    Endo<double> out;
    for (const auto& [b, row] : e.rows()) {
        out.ensure_row(b);
        for (const auto& [g, v] : row) out.set(b, g, v.size() == 1 ? v[0] : v[j]);
    }
    return out;
}

Endo<Batch> full_product_entries(const Centering& c, const ModelParams& p) {
    (void)p;
    const size_t n = c.size();
    SubstitutionColumns<Batch> phi;
    for (const auto& [b, row] : c.G.rows())
        for (const auto& [g, v] : row)
            if (g.is_pp()) phi[g.pp_index()][b] = v;
    Endo<Batch> out;
    for (const auto& b : c.rows) {
        out.ensure_row(b);
        for (const auto& g : c.rows) {
            if (g == b) continue;
            Batch v;
            if (product_entry(b, g, phi, v)) out.set(b, g, broadcast(v, n));
        }
    }
    return out;
}

Endo<double> gamma_at(const Centering& c, size_t j, const Centering& origin_centering) {
    Endo<double> g0 = slice(origin_centering.G, 0);
    Endo<double> gx = slice(c.G, j);
    return g0.inverse().compose(gx);
}

std::map<MultiIndex, PolyField> centered_fields(const StationaryModel& m, const Centering& c, size_t j) {
    auto x = point_coords(m.spec, c.points[j]);
    std::map<MultiIndex, PolyField> out;
    for (const auto& b : c.rows) {
        PolyField v = m.pi.at(b).reanchored(x);
        for (const auto& [g, e] : c.G.rows().at(b)) {
            if (g == b) continue;
            double coeff = e.size() == 1 ? e[0] : e[j];
            if (coeff == 0.0) continue;
            if (g.is_pp()) v.add_scaled(PolyField::monomial(m.spec, x, g.pp_index()), -coeff);
            else v.add_scaled(out.at(g), -coeff);
        }
        out[b] = std::move(v);
    }
    return out;
}

std::map<MultiIndex, PolyField> centered_fields_direct(const StationaryModel& m, const GridPoint& xp) {
    auto x = point_coords(m.spec, xp);
    std::map<MultiIndex, PolyField> pi;
    Evaluator<PolyField> ev;
    ev.pi = [&](const MultiIndex& g) -> PolyField { return pi.at(g); };
    ev.delta_pi = [](const MultiIndex&) -> PolyField { throw std::logic_error("unexpected derivative factor"); };
    ev.marker = [&](const SpaceIndex& n) { return PolyField::monomial(m.spec, x, n); };
    ev.noise = [&] { return PolyField::periodic(m.xi, x); };
    ev.delta_noise = []() -> PolyField { throw std::logic_error("unexpected derivative factor"); };
    ev.one = [&] { return PolyField::periodic(Field(m.spec, 1.0), x); };
    ev.c = &m.c;
    for (const auto& b : m.rows) {
        PolyField u;
        if (b.is_zero()) u = m.pi.at(b).reanchored(x);
        else u = ev(pi_minus_expr(b)).heat_inverse();
        double hb = to_double(homogeneity(b, m.params));
        std::vector<SpaceIndex> low;
        for (const auto& n : m.pp)
            if (n.weight() < hb - 1e-9) low.push_back(n);
        if (!low.empty()) {
            auto jets = u.jets_at(low, {xp});
            for (const auto& n : low) u.add_scaled(PolyField::monomial(m.spec, x, n), -jets.at(n)[0]);
        }
        pi[b] = std::move(u);
    }
    return pi;
}

double reexpansion_defect(const StationaryModel& m, const Centering& c, size_t j,
                          const std::map<MultiIndex, PolyField>& centered) {
    auto x = point_coords(m.spec, c.points[j]);
    double worst = 0;
    for (const auto& b : c.rows) {
        Field ref = m.pi.at(b).sample();
        PolyField sum(m.spec, x);
        for (const auto& [g, e] : c.G.rows().at(b)) {
            double coeff = e.size() == 1 ? e[0] : e[j];
            if (g.is_pp()) sum.add_scaled(PolyField::monomial(m.spec, x, g.pp_index()), coeff);
            else sum.add_scaled(centered.at(g), coeff);
        }
        Field diff = ref - sum.sample();
        double scale = std::max(ref.max_abs(), 1.0);
        worst = std::max(worst, diff.max_abs() / scale);
    }
    return worst;
}

namespace {

double endo_distance(const Endo<double>& a, const Endo<double>& b) { return (a - b).max_norm(); }

// Gamma relating two centered families: Pi_x = Gamma Pi_{x'}, recomputed by jets of Pi_x at x'.
Endo<double> direct_transition(const StationaryModel& m, const GridPoint& x, const GridPoint& x1) {
    auto pix = centered_fields_direct(m, x);
    Centering c = center(pix, point_coords(m.spec, x), m.rows, m.pp, m.params, {x1});
    return slice(c.G, 0);
}

}  // namespace

GroupCheck gamma_group_check(const StationaryModel& m, const GridPoint& x, const GridPoint& x1, const GridPoint& x2) {
    Centering c = center(m, {x, x1, x2});
    Endo<double> gx = slice(c.G, 0), gx1 = slice(c.G, 1), gx2 = slice(c.G, 2);
    Endo<double> gxi = gx.inverse();
    GroupCheck r;
    Endo<double> t01 = direct_transition(m, x, x1);
    Endo<double> t12 = direct_transition(m, x1, x2);
    Endo<double> t02 = direct_transition(m, x, x2);
    Endo<double> t00 = direct_transition(m, x, x);
    double scale = std::max({gx.max_norm(), gx1.max_norm(), gx2.max_norm(), 1.0});
    r.identity = endo_distance(t00, Endo<double>::identity(t00.row_keys())) / scale;
    r.group = endo_distance(gxi.compose(gx1), t01) / scale;
    r.cocycle = endo_distance(t01.compose(t12), t02) / scale;
    return r;
}

StructureCheck structure_check(const StationaryModel& m, const Centering& c, const Centering& origin_centering) {
    StructureCheck r;
    Endo<Batch> full = full_product_entries(c, m.params);
    double scale = 1.0;
    for (const auto& [b, row] : c.G.rows())
        for (const auto& [g, v] : row) scale = std::max(scale, CoeffTraits<Batch>::norm(v));
    r.scale = scale;
    // strict triangularity of G - id in precedence, and agreement of the recursive and full product entries
    for (const auto& b : c.rows) {
        Rational pb = precedence(b, m.params);
        for (const auto& g : c.rows) {
            if (g == b) continue;
            Batch v = full.get(b, g);
            if (v.size() == 0) continue;
            if (precedence(g, m.params) >= pb) r.triangularity = std::max(r.triangularity, CoeffTraits<Batch>::norm(v) / scale);
            else {
                Batch w = c.G.get(b, g);
                Batch d = w.size() ? Batch(v - w) : v;
                r.triangularity = std::max(r.triangularity, CoeffTraits<Batch>::norm(d) / scale);
            }
        }
    }
    const SpaceIndex zero = SpaceIndex::zero(m.params.d);
    MultiIndex d3 = MultiIndex::cubic(1), d30 = MultiIndex::cubic(1);
    d30.add(zero);
    MultiIndex d320 = MultiIndex::cubic(2);
    d320.add(zero);
    auto family = [&](const MultiIndex& g) {
        if (g.is_pp()) return true;
        if (g.count3() != 1) return false;
        MultiIndex rest = g - d3;
        if (rest.is_zero() || rest.is_pp()) return true;
        if (!d30.leq(g)) return false;
        MultiIndex rest2 = g - d30;
        return rest2.is_zero() || rest2.is_pp();
    };
    for (size_t j = 0; j < c.size(); ++j) {
        Endo<double> gam = gamma_at(c, j, origin_centering);
        for (const auto& [b, row] : gam.rows()) {
            bool sector_row = b.count3() == 1 && b.poly_length() == b.at(zero) && b.count3() >= 1;
            for (const auto& [g, v] : row) {
                double off = g == b ? v - 1.0 : v;
                if (b.is_zero()) r.row_zero = std::max(r.row_zero, std::abs(off));
                if (b.is_pp() && g.is_pp()) {
                    auto x = point_coords(m.spec, c.points[j]);
                    double expect = (g.pp_index().leq(b.pp_index()))
                                        ? static_cast<double>(binomial(b.pp_index(), g.pp_index())) *
                                              monomial(x, b.pp_index() - g.pp_index())
                                        : 0.0;
                    r.pp_block = std::max(r.pp_block, std::abs(v - expect));
                }
                if (g == b) continue;
                if (sector_row && !g.is_pp()) r.sector = std::max(r.sector, std::abs(v) / scale);
                if (b == d320 && !family(g)) r.sector = std::max(r.sector, std::abs(v) / scale);
            }
        }
    }
    return r;
}

CenteredConvolutions centered_convolutions(const StationaryModel& m, const Centering& c, const std::vector<double>& rs) {
    CenteredConvolutions out;
    const size_t n = c.size();
    for (const auto& b : c.rows) {
        auto cp = m.pi.at(b).convolve_at(rs, c.points);
        auto cm = m.pi_minus.at(b).convolve_at(rs, c.points);
        for (double r : rs) {
            Batch v = to_batch(cp.at(r)), w = to_batch(cm.at(r));
            double t = std::pow(r, 4);
            for (const auto& [g, e] : c.G.rows().at(b)) {
                if (g == b) continue;
                Batch coeff = broadcast(e, n);
                if (g.is_pp()) {
                    double mom = semigroup_moment(m.params.d, g.pp_index(), t);
                    if (mom != 0.0) v -= coeff * mom;
                } else {
                    v -= coeff * out.pi.at(g).at(r);
                    w -= coeff * out.pi_minus.at(g).at(r);
                }
            }
            out.pi[b][r] = v;
            out.pi_minus[b][r] = w;
        }
    }
    return out;
}

MalliavinData delta_model(const ModelRealization& m, const Field& direction) {
    MalliavinData d;
    d.direction = direction;
    d.direction_rho = mollify(direction, m.params.rho);
    Evaluator<Field> ev;
    ev.pi = [&](const MultiIndex& g) -> Field { return m.pi.at(g); };
    ev.delta_pi = [&](const MultiIndex& g) -> Field { return d.delta_pi.at(g); };
    ev.marker = [](const SpaceIndex&) -> Field { throw std::logic_error("unexpected polynomial factor"); };
    ev.noise = [&] { return m.xi; };
    ev.delta_noise = [&] { return d.direction_rho; };
    ev.one = [&] { return Field(m.spec, 1.0); };
    ev.c = &m.c;
    for (const auto& b : m.order) {
        if (b.is_pp()) {
            d.delta_pi[b] = Field(m.spec, 0.0);
            d.delta_pi_minus[b] = Field(m.spec, 0.0);
            continue;
        }
        Field dm = ev(delta_pi_minus_expr(b));
        d.delta_pi_minus[b] = dm;
        d.delta_pi[b] = heat_solve(dm);
    }
    return d;
}

StationaryDelta stationary_delta(const StationaryModel& m, const Field& direction) {
    StationaryDelta d;
    d.direction_rho = mollify(direction, m.params.rho);
    const auto o = origin(m.spec);
    Evaluator<PolyField> ev;
    ev.pi = [&](const MultiIndex& g) -> PolyField { return m.pi.at(g); };
    ev.delta_pi = [&](const MultiIndex& g) -> PolyField { return d.delta_pi.at(g); };
    ev.marker = [&](const SpaceIndex& n) { return PolyField::monomial(m.spec, o, n); };
    ev.noise = [&] { return PolyField::periodic(m.xi, o); };
    ev.delta_noise = [&] { return PolyField::periodic(d.direction_rho, o); };
    ev.one = [&] { return PolyField::periodic(Field(m.spec, 1.0), o); };
    ev.c = &m.c;
    for (const auto& b : m.rows) {
        PolyField dm = ev(delta_pi_minus_expr(b));
        d.delta_pi_minus[b] = dm;
        d.delta_pi[b] = dm.heat_inverse();
    }
    return d;
}

namespace {

SubstitutionColumns<Batch> columns_of(const Endo<Batch>& e) {
    SubstitutionColumns<Batch> phi;
    for (const auto& [b, row] : e.rows())
        for (const auto& [g, v] : row)
            if (g.is_pp() && !(b == g)) phi[g.pp_index()][b] = v;
    return phi;
}

SubstitutionColumns<Batch> g_columns(const Centering& c) {
    SubstitutionColumns<Batch> phi;
    for (const auto& [b, row] : c.G.rows())
        for (const auto& [g, v] : row)
            if (g.is_pp()) phi[g.pp_index()][b] = v;
    return phi;
}

}  // namespace

Endo<Batch> dgamma_entries(const StationaryModel& m, const StationaryDelta& dm, const Centering& c) {
    const size_t n = c.size();
    const double bound = 2 + m.params.s_d();
    std::vector<SpaceIndex> low;
    for (const auto& nn : c.pp)
        if (nn.weight() < bound) low.push_back(nn);
    SubstitutionColumns<Batch> phi = g_columns(c);
    SubstitutionColumns<Batch> dphi;
    Endo<Batch> dg;
    for (size_t i = 0; i < c.rows.size(); ++i) {
        const MultiIndex& b = c.rows[i];
        dg.ensure_row(b);
        for (size_t k = 0; k < i; ++k) {
            Batch v;
            if (leibniz_entry(b, c.rows[k], phi, dphi, v)) dg.set(b, c.rows[k], broadcast(v, n));
        }
        auto jets = dm.delta_pi.at(b).jets_at(low, c.points);
        for (const auto& nn : low) {
            Batch acc = to_batch(jets.at(nn));
            for (size_t k = 0; k < i; ++k) {
                Batch g = dg.get(b, c.rows[k]);
                if (g.size() == 0) continue;
                acc -= g * c.K.at(c.rows[k]).at(nn);
            }
            dg.set(b, MultiIndex::poly(nn), acc);
            dphi[nn][b] = acc;
        }
    }
    return dg;
}

Endo<Batch> dgamma_full(const StationaryModel& m, const Centering& c, const Endo<Batch>& dg) {
    (void)m;
    const size_t n = c.size();
    SubstitutionColumns<Batch> phi = g_columns(c);
    SubstitutionColumns<Batch> dphi = columns_of(dg);
    Endo<Batch> out;
    for (const auto& b : c.rows) {
        out.ensure_row(b);
        for (const auto& g : c.rows) {
            Batch v;
            if (leibniz_entry(b, g, phi, dphi, v)) out.set(b, g, broadcast(v, n));
        }
    }
    return out;
}

RobustIdentity check_robust_identity(const StationaryModel& m, const StationaryDelta& dm, const Centering& c,
                                     const Endo<Batch>& dg) {
    const size_t n = c.size();
    std::map<MultiIndex, Batch> pmx;
    for (const auto& b : c.rows) {
        Batch v = to_batch(m.pi_minus.at(b).value_at(c.points));
        for (const auto& [g, e] : c.G.rows().at(b)) {
            if (g == b || g.is_pp()) continue;
            v -= broadcast(e, n) * pmx.at(g);
        }
        pmx[b] = v;
    }
    Batch xi_rho(n);
    for (size_t j = 0; j < n; ++j) xi_rho[j] = dm.direction_rho.at(c.points[j]);
    RobustIdentity r;
    double res = 0, ctl = 0, scale = 0;
    for (const auto& b : c.rows) {
        Batch lhs = to_batch(dm.delta_pi_minus.at(b).value_at(c.points));
        if (b.is_zero()) lhs -= xi_rho;
        Batch sum(0.0, n), mag = std::abs(lhs);
        auto it = dg.rows().find(b);
        if (it != dg.rows().end())
            for (const auto& [g, e] : it->second) {
                if (g.is_pp()) continue;
                Batch t = broadcast(e, n) * pmx.at(g);
                sum += t;
                mag += std::abs(t);
            }
        scale = std::max(scale, mag.max());
        res = std::max(res, std::abs(Batch(lhs - sum)).max());
        ctl = std::max(ctl, std::abs(Batch(lhs - pmx.at(b))).max());
    }
    r.scale = scale;
    r.residual = scale > 0 ? res / scale : res;
    r.control = scale > 0 ? ctl / scale : ctl;
    return r;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    SlopeFit f;
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need at least two points to fit");
    if (std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; })) {
        f.exact_zero = true;
        return f;
    }
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> lx(n), ly(n);
    for (size_t i = 0; i < n; ++i) {
        lx[i] = std::log(x[i]);
        ly[i] = std::log(std::abs(y[i]));
        sx += lx[i];
        sy += ly[i];
    }
    double mx = sx / n, my = sy / n;
    for (size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0;
        for (size_t i = 0; i < n; ++i) {
            double e = ly[i] - f.intercept - f.slope * lx[i];
            rss += e * e;
        }
        f.stderr_slope = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

DecayFit modelled_decay_fit(const StationaryModel& m, const StationaryDelta& dm, const Centering& c,
                            const Endo<Batch>& dg, const MultiIndex& beta, const std::vector<double>& rs) {
    if (rs.size() < 4) throw std::invalid_argument("decay fit needs at least four scales");
    const size_t n = c.size();
    CenteredConvolutions cc = centered_convolutions(m, c, rs);
    auto conv = dm.delta_pi.at(beta).convolve_at(rs, c.points);
    DecayFit f;
    f.rs = rs;
    for (double r : rs) {
        Batch raw = to_batch(conv.at(r));
        Batch v = raw;
        double t = std::pow(r, 4);
        auto it = dg.rows().find(beta);
        if (it != dg.rows().end())
            for (const auto& [g, e] : it->second) {
                Batch coeff = broadcast(e, n);
                if (g.is_pp()) v -= coeff * semigroup_moment(m.params.d, g.pp_index(), t);
                else v -= coeff * cc.pi.at(g).at(r);
            }
        f.modelled_rms.push_back(std::sqrt((v * v).sum() / static_cast<double>(n)));
        f.control_rms.push_back(std::sqrt((raw * raw).sum() / static_cast<double>(n)));
    }
    f.modelled = fit_loglog(rs, f.modelled_rms);
    f.control = fit_loglog(rs, f.control_rms);
    return f;
}

std::vector<double> dyadic_scales(double lo, double hi, int per_octave) {
    std::vector<double> out;
    for (int j = 0;; ++j) {
        double r = lo * std::pow(2.0, static_cast<double>(j) / per_octave);
        if (r > hi * (1 + 1e-12)) break;
        out.push_back(r);
    }
    return out;
}

std::vector<double> default_scales(const ModelParams& p) {
    auto rs = dyadic_scales(8 * p.rho, p.L / 8, 4);
    if (rs.size() < 4) throw std::invalid_argument("scaling window [8 rho, L/8] holds fewer than four scales");
    return rs;
}

std::vector<GridPoint> lattice_points(const TorusSpec& s, int time_stride, int space_stride) {
    std::vector<GridPoint> pts;
    auto shape = s.shape();
    GridPoint idx(static_cast<size_t>(s.rank()), 0);
    std::function<void(int)> rec = [&](int axis) {
        if (axis == s.rank()) {
            pts.push_back(idx);
            return;
        }
        int stride = axis == 0 ? time_stride : space_stride;
        for (int i = 0; i < shape[static_cast<size_t>(axis)]; i += stride) {
            idx[static_cast<size_t>(axis)] = i;
            rec(axis + 1);
        }
    };
    rec(0);
    return pts;
}

bool odd_in_law(const MultiIndex& b) {
    // cubic forms have a deterministic polynomial Pi^-
    int noise = classify(b) == IndexClass::cubic_poly_form ? 0 : noise_homogeneity(b) + 1;
    if (noise % 2 != 0) return true;
    int d = b.poly_part().empty() ? 1 : b.poly_part().begin()->first.dim();
    SpaceIndex mom = b.poly_moment(d);
    for (size_t i = 1; i < mom.c.size(); ++i)
        if (mom.c[i] % 2 != 0) return true;
    return false;
}

}  // namespace mim
