#include "mim/checks.hpp"
#include "mim/config.hpp"
#include "mim/recursion.hpp"
#include "mim/report.hpp"
#include "mim/stats.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace mim;
namespace fs = std::filesystem;

namespace {

constexpr int exit_failed = 1;
constexpr int exit_config = 2;
constexpr int exit_internal = 3;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> members;
    std::optional<double> cutoff;
    bool quick = false;
};

RunConfig resolve(const Globals& g) {
    RunConfig rc = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (g.quick) {
        RunConfig q = quick_config();
        rc.model.torus.N = q.model.torus.N;
        rc.model.torus.N0 = q.model.torus.N0;
        rc.members = q.members;
        rc.time_stride = q.time_stride;
    }
    if (g.seed) rc.seed = *g.seed;
    if (g.out) rc.out = *g.out;
    if (g.members) rc.members = *g.members;
    if (g.cutoff) rc.model.cutoff = *g.cutoff;
    if (auto e = rc.validate(); !e.empty()) throw ConfigError(e);
    return rc;
}

int threads() {
    const char* t = std::getenv("MIM_THREADS");
    if (!t) return 1;
    try {
        return std::max(1, std::stoi(t));
    } catch (const std::exception&) {
        throw ConfigError("MIM_THREADS must be a positive integer");
    }
}

MultiIndex parse_beta(const std::string& s) {
    try {
        return MultiIndex::parse(s);
    } catch (const std::exception& e) {
        throw ConfigError("bad multi-index '" + s + "': " + e.what());
    }
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::ofstream open_csv(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

std::function<void(int)> progress(const std::string& what, int total) {
    int step = std::max(1, total / 10);
    return [what, total, step](int done) {
        if (done % step == 0 || done == total) spdlog::info("{}: {}/{} members", what, done, total);
    };
}

// prints the assertion table, writes the JSON report, returns the exit code
int finish(const RunConfig& rc, const std::string& command, const CheckReport& rep) {
    for (const auto& a : rep.items)
        fmt::print("{} {} value={:.6g} bound={:.6g}{}\n", a.passed ? "PASS" : "FAIL", a.name, a.value, a.bound,
                   a.detail.empty() ? "" : " (" + a.detail + ")");
    nlohmann::json j{{"command", command},
                     {"config_hash", rc.hash()},
                     {"code_version", code_version()},
                     {"passed", rep.passed()},
                     {"assertions", rep.to_json()}};
    write_json(fs::path(rc.out) / (command + "_report.json"), j);
    return rep.passed() ? 0 : exit_failed;
}

const std::vector<std::pair<std::string, std::string>>& golden_expansions() {
    static const std::vector<std::pair<std::string, std::string>> g{
        {"0|", "xi"},
        {"1|", "Pi[0]^3 + c[1]*Pi[0]"},
        {"1|(0,0):1", "3*Pi[0]^2 + c[1]"},
        {"1|(0,0):2", "3*Pi[0]"},
        {"1|(0,0):3", "1"},
        {"2|", "3*Pi[0]^2*Pi[1|] + c[2]*Pi[0] + c[1]*Pi[1|]"},
        {"2|(0,0):1", "3*Pi[0]^2*Pi[1|(0,0):1] + 6*Pi[0]*Pi[1|] + c[1]*Pi[1|(0,0):1] + c[2]"}};
    return g;
}

const std::vector<std::pair<std::string, std::map<std::string, long long>>>& golden_trees() {
    static const std::vector<std::pair<std::string, std::map<std::string, long long>>> g{
        {"0|", {{"X", 1}}},
        {"1|", {{"(I(X)I(X)I(X))", 1}}},
        {"1|(0,0):1", {{"(I(X)I(X))", 3}}},
        {"1|(0,0):2", {{"(I(X))", 3}}},
        {"2|", {{"(I((I(X)I(X)I(X)))I(X)I(X))", 3}}},
        {"2|(0,0):1", {{"(I((I(X)I(X)))I(X)I(X))", 9}, {"(I((I(X)I(X)I(X)))I(X))", 6}}}};
    return g;
}

// ---- symbolic ----

int cmd_enumerate(const Globals& g, const std::string& grading, bool json) {
    ModelParams p = g.config.empty() ? ModelParams{} : load_config(g.config).model.params;
    if (auto e = p.validate(); !e.empty()) throw ConfigError(e);
    EnumerateOptions opt;
    if (grading == "homogeneity") opt.grading = Grading::homogeneity;
    else if (grading == "precedence") opt.grading = Grading::precedence;
    else throw ConfigError("grading must be homogeneity or precedence");
    double cutoff = g.cutoff.value_or(2.0);
    auto rows = enumerate_populated(cutoff, p, opt);
    if (opt.grading == Grading::homogeneity) sort_by_homogeneity(rows, p);
    if (json) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& b : rows)
            j.push_back({{"beta", b.to_string()},
                         {"homogeneity", to_double(homogeneity(b, p))},
                         {"precedence", to_double(precedence(b, p))},
                         {"noise_homogeneity", noise_homogeneity(b)},
                         {"class", class_name(classify(b))}});
        fmt::print("{}\n", j.dump(2));
        return 0;
    }
    fmt::print("{:<24} {:>10} {:>10} {}\n", "beta", "|beta|", "precedence", "class");
    for (const auto& b : rows)
        fmt::print("{:<24} {:>10.4f} {:>10.4f} {}\n", b.to_string(), to_double(homogeneity(b, p)),
                   to_double(precedence(b, p)), class_name(classify(b)));
    return 0;
}

int cmd_expand(const std::string& beta, bool raw, bool delta, bool json) {
    MultiIndex b = parse_beta(beta);
    ExprOptions opt;
    opt.substitute_pp = !raw;
    Expr e = delta ? delta_pi_minus_expr(b, opt) : pi_minus_expr(b, opt);
    fmt::print("{}\n", json ? e.to_json().dump(2) : e.to_string());
    return 0;
}

int cmd_trees(const std::string& beta, bool json) {
    auto t = tree_expand(parse_beta(beta));
    if (json) {
        fmt::print("{}\n", nlohmann::json(t).dump(2));
        return 0;
    }
    for (const auto& [tree, coeff] : t) fmt::print("{} {}\n", coeff, tree);
    return 0;
}

void symbolic_checks(CheckReport& rep) {
    for (const auto& [b, s] : golden_expansions())
        rep.require("expand " + b, pi_minus_expr(MultiIndex::parse(b)).to_string() == s, s);
    for (const auto& [b, t] : golden_trees()) rep.require("trees " + b, tree_expand(MultiIndex::parse(b)) == t);
    ModelParams p;
    EnumerateOptions opt;
    opt.grading = Grading::homogeneity;
    auto rows = enumerate_populated(2.0, p, opt);
    std::set<std::string> got, expect{"0|", "1|", "0|(0,0):1", "1|(0,0):1", "1|(0,0):2", "0|(0,1):1"};
    for (const auto& b : rows) got.insert(b.to_string());
    rep.require("enumerate homogeneity below 2", got == expect);
    for (const auto& b : enumerate_populated(10.5, p)) {
        if (!dependency_report(b, p).ok()) {
            rep.require("population closure", false, b.to_string());
            return;
        }
    }
    rep.require("population closure", true);
}

// ---- numerics ----

MultiIndex cubic_plus(int k, int zeros, int d) {
    MultiIndex b = MultiIndex::cubic(k);
    if (zeros) b.add(SpaceIndex::zero(d), zeros);
    return b;
}

void renorm_checks(const RunConfig& rc, CheckReport& rep) {
    RenormMeasurement m = measure_renorm(rc.model, rc.members, rc.seed);
    RenormRow row;
    row.k = 1;
    row.mc = m.c1_mc;
    row.oracle = m.c1_oracle;
    row.has_oracle = true;
    write_renorm_csv(fs::path(rc.out) / "renorm.csv", rc.hash(), {row});
    {
        auto os = open_csv(fs::path(rc.out) / "renorm_ladder.csv");
        os << "rho,c1_mc,stderr,c1_oracle,config_hash\n";
        for (size_t j = 0; j < m.rhos.size(); ++j)
            os << num(m.rhos[j]) << ',' << num(m.ladder_mc[j].value) << ',' << num(m.ladder_mc[j].stderr) << ','
               << num(m.ladder_oracle[j]) << ',' << rc.hash() << '\n';
    }
    double dev = std::abs(m.c1_mc.value - m.c1_oracle) / std::max(m.c1_mc.stderr, 1e-300);
    rep.at_most("c1 within 5 standard errors", dev, 5.0,
                fmt::format("mc {:.4f} +- {:.4f}, oracle {:.4f}", m.c1_mc.value, m.c1_mc.stderr, m.c1_oracle));
    bool mono_mc = true, mono_or = true;
    for (size_t j = 1; j < m.rhos.size(); ++j) {
        mono_mc = mono_mc && std::abs(m.ladder_mc[j].value) > std::abs(m.ladder_mc[j - 1].value);
        mono_or = mono_or && std::abs(m.ladder_oracle[j]) > std::abs(m.ladder_oracle[j - 1]);
    }
    rep.require("c1 grows as rho halves (ensemble)", mono_mc);
    rep.require("c1 grows as rho halves (lattice sum)", mono_or);
}

void exact_checks(const RunConfig& rc, CheckReport& rep, bool malliavin) {
    auto pts = spread_points(rc.model.torus, rc.base_points, rc.seed);
    ExactMeasurement e = measure_exact(rc.model, member_seed(rc.seed, 0), pts);
    if (!malliavin) {
        rep.at_most("heat residual", e.heat, 1e-10);
        rep.at_most("semigroup law", e.semigroup, 1e-10);
        rep.at_most("re-expansion", e.reexpansion, 1e-6);
        rep.at_most("centering routes agree", e.route_agreement, 1e-6);
        rep.at_most("group law", e.group, 1e-6);
        rep.at_most("cocycle", e.cocycle, 1e-6);
        rep.at_most("identity at the origin", e.identity_at_origin, 1e-8);
        rep.at_most("row 0 is delta_0", e.row_zero, 0.0);
        rep.at_most("polynomial block", e.pp_block, 0.0);
    }
    rep.at_most("robust identity", e.robust, 1e-6);
    rep.at_least("robust identity control", e.robust_control, 1e-3);
}

void triangular_checks(const RunConfig& rc, CheckReport& rep) {
    auto pts = spread_points(rc.model.torus, std::max(rc.base_points, 8), rc.seed);
    TriangularMeasurement t = measure_triangular(rc.model, member_seed(rc.seed, 0), pts);
    rep.at_most("Gamma triangular in homogeneity", t.gamma_homogeneity, 1e-8);
    rep.at_most("Gamma triangular in precedence", t.gamma_precedence, 1e-8);
    rep.at_most("Gamma recursion consistent", t.gamma_consistency, 1e-8);
    rep.at_most("Gamma sector entries", t.sector, 1e-8);
    rep.at_most("dGamma triangular in precedence", t.dgamma_precedence, 1e-8);
    rep.at_most("dGamma row 0", t.dgamma_row_zero, 1e-8);
    rep.at_most("dGamma on constants", t.dgamma_constants, 1e-8);
}

void decay_checks(const RunConfig& rc, CheckReport& rep) {
    const ModelParams& p = rc.model.params;
    auto pts = spread_points(rc.model.torus, rc.base_points, rc.seed);
    auto rs = rc.scales();
    auto dm = measure_decay(rc.model, member_seed(rc.seed, 0), pts, rs, {MultiIndex::zero(), MultiIndex::cubic(1)});
    auto os = open_csv(fs::path(rc.out) / "malliavin.csv");
    os << "beta,r,modelled,control,config_hash\n";
    for (const auto& d : dm) {
        for (size_t i = 0; i < d.fit.rs.size(); ++i)
            os << '"' << d.beta.to_string() << "\"," << num(d.fit.rs[i]) << ',' << num(d.fit.modelled_rms[i]) << ','
               << num(d.fit.control_rms[i]) << ',' << rc.hash() << '\n';
        std::string b = d.beta.to_string();
        rep.at_least("modelled decay " + b, d.fit.modelled.slope, 2 + p.s_d() - 0.3);
        rep.at_most("decay control near alpha " + b, std::abs(d.fit.control.slope - p.alpha_d()), 0.3,
                    fmt::format("slope {:.3f}", d.fit.control.slope));
        rep.at_least("decay control misses the bound " + b, 2 + p.s_d() - 0.3 - d.fit.control.slope, 1.0);
    }
}

void kernel_checks(const RunConfig& rc, CheckReport& rep) {
    KernelMeasurement k = measure_change_of_kernel(rc.model.torus, rc.model.params, rc.seed, 0.1);
    rep.at_most("change of kernel", k.relative_error, 1e-3);
    rep.require("change of kernel refines monotonically", k.monotone);
}

EnsembleResult ensemble(const RunConfig& rc, bool scales, int gamma_points) {
    EnsembleOptions o;
    o.members = rc.members;
    o.seed = rc.seed;
    o.moment_p = rc.moment_p;
    o.time_stride = rc.time_stride;
    o.space_stride = rc.space_stride;
    o.threads = threads();
    if (scales) {
        o.rs = rc.scales();
        o.fixed_points = spread_points(rc.model.torus, 4, rc.seed);
    }
    if (gamma_points > 0) o.gamma_points = dyadic_base_points(rc.model.torus, gamma_points);
    o.progress = progress("ensemble", rc.members);
    return run_ensemble(rc.model, o);
}

void scaling_checks(const RunConfig& rc, const EnsembleResult& r, CheckReport& rep) {
    const ModelParams& p = rc.model.params;
    const std::vector<MultiIndex> targets{cubic_plus(1, 0, p.d), cubic_plus(1, 1, p.d), cubic_plus(2, 0, p.d)};
    for (const auto& row : slope_rows(p, r)) {
        if (std::find(targets.begin(), targets.end(), row.beta) == targets.end()) continue;
        rep.at_most(fmt::format("{} slope {}", row.field, row.beta.to_string()), std::abs(row.fit.slope - row.target),
                    0.2, fmt::format("slope {:.3f} target {:.3f}", row.fit.slope, row.target));
    }
    const MultiIndex b = cubic_plus(1, 1, p.d);
    if (r.pi_minus_fixed.count(b)) {
        double target = to_double(homogeneity(b, p)) - 2;
        const auto& pts = r.pi_minus_fixed.at(b);
        for (size_t k = 0; k < pts.size(); ++k) {
            double sl = scaling_slope(r.rs, pts[k]).slope;
            rep.at_most(fmt::format("pi_minus slope {} at base point {}", b.to_string(), k), std::abs(sl - target), 0.2,
                        fmt::format("slope {:.3f}", sl));
        }
    }
    for (const auto& row : r.rows) {
        if (!odd_in_law(row) || to_double(homogeneity(row, p)) >= 2) continue;
        double worst = 0;
        for (const auto& e : r.origin_mean.at(row))
            if (e.stderr > 0) worst = std::max(worst, std::abs(e.value) / e.stderr);
        rep.at_most("odd mean " + row.to_string(), worst, 3.0);
    }
}

void write_scaling_outputs(const RunConfig& rc, const EnsembleResult& r, const std::string& command) {
    fs::path out(rc.out);
    const std::string h = rc.hash();
    write_scaling_csv(out / "scaling.csv", h, r);
    write_gamma_csv(out / "gamma.csv", h, rc.model.torus, r);
    write_renorm_csv(out / "renorm.csv", h, renorm_rows(rc, r));
    write_slopes_csv(out / "slopes.csv", h, slope_rows(rc.model.params, r));
    auto os = open_csv(out / "base_points.csv");
    os << "beta,point,slope,stderr,config_hash\n";
    for (const auto& [b, per] : r.pi_minus_fixed)
        for (size_t k = 0; k < per.size(); ++k) {
            SlopeFit f = scaling_slope(r.rs, per[k]);
            if (f.exact_zero) continue;
            os << '"' << b.to_string() << "\"," << k << ',' << num(f.slope) << ',' << num(f.stderr_slope) << ',' << h
               << '\n';
        }
    write_json(out / "manifest.json",
               manifest(rc, command, {"scaling.csv", "gamma.csv", "renorm.csv", "slopes.csv", "base_points.csv"}));
}

int cmd_simulate(const Globals& g, bool snapshots) {
    RunConfig rc = resolve(g);
    fs::path out(rc.out);
    const std::string h = rc.hash();
    auto os = open_csv(out / "members.csv");
    os << "member,seed,c1,zero_mode,pde_residual,config_hash\n";
    double worst = 0;
    std::vector<std::string> artifacts{"members.csv"};
    for (int i = 0; i < rc.members; ++i) {
        std::uint64_t seed = member_seed(rc.seed, static_cast<std::uint64_t>(i));
        ModelRealization m = sample_model(rc.model, seed);
        double res = m.pde_residual();
        worst = std::max(worst, res);
        os << i << ',' << fmt::format("{:016x}", seed) << ',' << num(m.c.count(1) ? m.c.at(1) : 0.0) << ','
           << num(m.zero_mode) << ',' << num(res) << ',' << h << '\n';
        if (snapshots) {
            fs::path dir = out / fmt::format("member_{:04d}", i);
            fs::create_directories(dir);
            for (const auto& [b, f] : m.pi) {
                std::string name = symbol_name(b);
                for (char& ch : name)
                    if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
                name += ".mimf";
                std::ofstream fo(dir / name, std::ios::binary);
                f.write_snapshot(fo);
                artifacts.push_back((fs::path(dir.filename()) / name).string());
            }
        }
        progress("simulate", rc.members)(i + 1);
    }
    os.close();
    write_json(out / "manifest.json", manifest(rc, "simulate", artifacts));
    CheckReport rep;
    rep.at_most("heat residual over members", worst, 1e-10);
    return finish(rc, "simulate", rep);
}

int cmd_renorm(const Globals& g) {
    RunConfig rc = resolve(g);
    CheckReport rep;
    renorm_checks(rc, rep);
    write_json(fs::path(rc.out) / "manifest.json", manifest(rc, "renorm", {"renorm.csv", "renorm_ladder.csv"}));
    return finish(rc, "renorm", rep);
}

int cmd_gamma(const Globals& g) {
    RunConfig rc = resolve(g);
    CheckReport rep;
    exact_checks(rc, rep, false);
    triangular_checks(rc, rep);
    EnsembleResult r = ensemble(rc, false, 5);
    write_gamma_csv(fs::path(rc.out) / "gamma.csv", rc.hash(), rc.model.torus, r);
    write_json(fs::path(rc.out) / "manifest.json", manifest(rc, "gamma", {"gamma.csv"}));
    return finish(rc, "gamma", rep);
}

int cmd_malliavin(const Globals& g) {
    RunConfig rc = resolve(g);
    CheckReport rep;
    exact_checks(rc, rep, true);
    decay_checks(rc, rep);
    write_json(fs::path(rc.out) / "manifest.json", manifest(rc, "malliavin", {"malliavin.csv"}));
    return finish(rc, "malliavin", rep);
}

int cmd_scaling(const Globals& g) {
    RunConfig rc = resolve(g);
    EnsembleResult r = ensemble(rc, true, 5);
    write_scaling_outputs(rc, r, "scaling-report");
    CheckReport rep;
    scaling_checks(rc, r, rep);
    return finish(rc, "scaling-report", rep);
}

int cmd_check(const Globals& g) {
    RunConfig rc = resolve(g);
    CheckReport rep;
    auto stage = [&](const char* name, auto&& f) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        spdlog::info("{} done in {:.1f} s", name,
                     std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    stage("symbolic", [&] { symbolic_checks(rep); });
    stage("exact identities", [&] { exact_checks(rc, rep, false); });
    stage("triangularity", [&] { triangular_checks(rc, rep); });
    stage("modelled decay", [&] { decay_checks(rc, rep); });
    stage("change of kernel", [&] { kernel_checks(rc, rep); });
    stage("renormalization", [&] { renorm_checks(rc, rep); });
    stage("ensemble", [&] {
        EnsembleResult r = ensemble(rc, true, 5);
        write_scaling_outputs(rc, r, "check");
        scaling_checks(rc, r, rep);
    });
    return finish(rc, "check", rep);
}

}  // namespace

int main(int argc, char** argv) {
    auto log = spdlog::stderr_color_mt("mim");
    spdlog::set_default_logger(log);
    spdlog::set_pattern("[%H:%M:%S] %v");

    CLI::App app{"multi-index model toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--members", g.members, "ensemble size");
    app.add_option("--cutoff", g.cutoff, "truncation cutoff");
    app.add_flag("--quick", g.quick, "small grid and ensemble");

    std::string beta, grading = "homogeneity";
    bool json = false, raw = false, delta = false, snapshots = false;
    auto* en = app.add_subcommand("enumerate", "populated multi-indices below the cutoff (default 2)");
    en->add_option("--grading", grading, "homogeneity or precedence");
    en->add_flag("--json", json);
    auto* ex = app.add_subcommand("expand", "recursion expression of Pi^-_beta");
    ex->add_option("beta", beta)->required();
    ex->add_flag("--raw", raw, "keep the polynomial symbols");
    ex->add_flag("--delta", delta, "Malliavin derivative instead");
    ex->add_flag("--json", json);
    auto* tr = app.add_subcommand("trees", "tree dictionary of beta");
    tr->add_option("beta", beta)->required();
    tr->add_flag("--json", json);
    auto* si = app.add_subcommand("simulate", "build an ensemble and persist manifests");
    si->add_flag("--snapshots", snapshots, "write every Pi field of every member");
    auto* re = app.add_subcommand("renorm", "Monte Carlo counterterm against the lattice sum");
    auto* ga = app.add_subcommand("gamma", "structure group checks and Gamma statistics");
    auto* ma = app.add_subcommand("malliavin", "derivative model identities and modelled decay");
    auto* sc = app.add_subcommand("scaling-report", "moment scaling regressions");
    auto* ch = app.add_subcommand("check", "full property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (en->parsed()) return cmd_enumerate(g, grading, json);
        if (ex->parsed()) return cmd_expand(beta, raw, delta, json);
        if (tr->parsed()) return cmd_trees(beta, json);
        if (si->parsed()) return cmd_simulate(g, snapshots);
        if (re->parsed()) return cmd_renorm(g);
        if (ga->parsed()) return cmd_gamma(g);
        if (ma->parsed()) return cmd_malliavin(g);
        if (sc->parsed()) return cmd_scaling(g);
        if (ch->parsed()) return cmd_check(g);
    } catch (const ConfigError& e) {
        std::cerr << nlohmann::json{{"error", "config"}, {"reason", e.what()}}.dump() << '\n';
        return exit_config;
    } catch (const UnsupportedError& e) {
        std::cerr << nlohmann::json{{"error", "unsupported"}, {"reason", e.what()}}.dump() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "internal"}, {"reason", e.what()}}.dump() << '\n';
        return exit_internal;
    }
    return exit_internal;
}
