#include "mim/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#ifndef MIM_VERSION
#define MIM_VERSION "unknown"
#endif

namespace mim {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

// CSV field for an index: its text form quoted, since it contains commas
std::string quoted(const std::string& s) { return "\"" + s + "\""; }

bool all_zero(const std::vector<Estimate>& v) {
    for (const auto& e : v)
        if (e.value != 0.0) return false;
    return true;
}

}  // namespace

const char* code_version() { return MIM_VERSION; }

std::vector<RenormRow> renorm_rows(const RunConfig& cfg, const EnsembleResult& r) {
    std::vector<RenormRow> rows;
    for (int k : counterterm_range(cfg.model.params)) {
        auto it = r.c.find(k);
        if (it == r.c.end()) continue;
        RenormRow row;
        row.k = k;
        row.mc = mean_estimate(it->second);
        if (k == 1) {
            row.oracle = c1_closed_form(cfg.model.torus, cfg.model.params, cfg.model.zero_mode);
            row.has_oracle = true;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<SlopeRow> slope_rows(const ModelParams& p, const EnsembleResult& r) {
    std::vector<SlopeRow> out;
    for (const auto& b : r.rows) {
        double h = to_double(homogeneity(b, p));
        for (int minus = 0; minus < 2; ++minus) {
            const auto& v = minus ? r.pi_minus.at(b) : r.pi.at(b);
            if (all_zero(v)) continue;
            SlopeRow row;
            row.beta = b;
            row.field = minus ? "pi_minus" : "pi";
            row.fit = scaling_slope(r.rs, v);
            row.target = minus ? h - 2 : h;
            out.push_back(row);
        }
    }
    return out;
}

void write_scaling_csv(const std::filesystem::path& path, const std::string& hash, const EnsembleResult& r) {
    auto os = open_out(path);
    os << "beta,field,r,moment_p,value,stderr,config_hash\n";
    for (const auto& b : r.rows)
        for (int minus = 0; minus < 2; ++minus) {
            const auto& v = minus ? r.pi_minus.at(b) : r.pi.at(b);
            for (size_t i = 0; i < r.rs.size(); ++i)
                os << quoted(b.to_string()) << ',' << (minus ? "pi_minus" : "pi") << ',' << num(r.rs[i]) << ','
                   << r.moment_p << ',' << num(v[i].value) << ',' << num(v[i].stderr) << ',' << hash << '\n';
        }
}

void write_gamma_csv(const std::filesystem::path& path, const std::string& hash, const TorusSpec& spec,
                     const EnsembleResult& r) {
    auto os = open_out(path);
    os << "beta,gamma,x_dist,value,stderr,config_hash\n";
    for (const auto& [key, v] : r.gamma)
        for (size_t j = 0; j < r.gamma_points.size(); ++j) {
            double dist = parabolic_distance(point_coords(spec, r.gamma_points[j]));
            os << quoted(key.first.to_string()) << ',' << quoted(key.second.to_string()) << ',' << num(dist) << ','
               << num(v[j].value) << ',' << num(v[j].stderr) << ',' << hash << '\n';
        }
}

void write_renorm_csv(const std::filesystem::path& path, const std::string& hash, const std::vector<RenormRow>& rows) {
    auto os = open_out(path);
    os << "k,c_k_mc,c_k_oracle,stderr,config_hash\n";
    for (const auto& row : rows)
        os << row.k << ',' << num(row.mc.value) << ',' << (row.has_oracle ? num(row.oracle) : std::string()) << ','
           << num(row.mc.stderr) << ',' << hash << '\n';
}

void write_slopes_csv(const std::filesystem::path& path, const std::string& hash, const std::vector<SlopeRow>& rows) {
    auto os = open_out(path);
    os << "beta,field,slope,stderr,target,config_hash\n";
    for (const auto& row : rows)
        os << quoted(row.beta.to_string()) << ',' << row.field << ',' << num(row.fit.slope) << ','
           << num(row.fit.stderr_slope) << ',' << num(row.target) << ',' << hash << '\n';
}

nlohmann::json manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& artifacts) {
    const auto& p = cfg.model.params;
    nlohmann::json j;
    j["command"] = command;
    j["code_version"] = code_version();
    j["config_hash"] = cfg.hash();
    j["config"] = cfg.canonical();
    j["params"] = {{"d", p.d},
                   {"s", fmt::format("{}/{}", p.s.numerator(), p.s.denominator())},
                   {"s_value", p.s_d()},
                   {"alpha", p.alpha_d()},
                   {"L", p.L},
                   {"rho", p.rho},
                   {"N", cfg.model.torus.N},
                   {"N0", cfg.model.torus.N0}};
    std::vector<std::string> seeds;
    for (int i = 0; i < cfg.members; ++i)
        seeds.push_back(fmt::format("{:016x}", member_seed(cfg.seed, static_cast<std::uint64_t>(i))));
    j["seed"] = cfg.seed;
    j["member_seeds"] = seeds;
    j["artifacts"] = artifacts;
    return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

}  // namespace mim
