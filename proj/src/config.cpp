#include "mim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mim {

namespace pt = boost::property_tree;

namespace {

Rational parse_rational(const std::string& text) {
    auto slash = text.find('/');
    if (slash == std::string::npos) return parse_decimal(text);
    return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
}

std::string rational_text(const Rational& r) { return fmt::format("{}/{}", r.numerator(), r.denominator()); }

const char* policy_name(CounterTermPolicy p) {
    switch (p) {
        case CounterTermPolicy::space_time: return "space_time";
        case CounterTermPolicy::closed_form: return "closed_form";
        case CounterTermPolicy::fixed: return "fixed";
    }
    return "?";
}

CounterTermPolicy parse_policy(const std::string& s) {
    if (s == "space_time") return CounterTermPolicy::space_time;
    if (s == "closed_form") return CounterTermPolicy::closed_form;
    if (s == "fixed") return CounterTermPolicy::fixed;
    throw ConfigError("unknown counterterm policy '" + s + "'");
}

template <class T>
T get(const pt::ptree& t, const std::string& key, T fallback) {
    try {
        return t.get<T>(key, fallback);
    } catch (const pt::ptree_bad_data&) {
        throw ConfigError("bad value for " + key);
    }
}

}  // namespace

std::vector<double> RunConfig::scales() const {
    return dyadic_scales(r_min_rho * model.params.rho, r_max_L * model.params.L, per_octave);
}

std::string RunConfig::validate() const {
    if (auto e = model.validate(); !e.empty()) return e;
    if (members < 1) return "members must be positive";
    if (moment_p < 1) return "moment_p must be positive";
    if (time_stride < 1 || space_stride < 1) return "strides must be positive";
    if (per_octave < 1) return "per_octave must be positive";
    if (base_points < 1) return "base_points must be positive";
    if (!(r_min_rho > 0) || !(r_max_L > 0)) return "scale window must be positive";
    if (scales().size() < 4) return "scale window holds fewer than four scales";
    {
        auto sector = periodic_sector(model.params, model.cutoff);
        for (const auto& b : centering_rows(model.params, model.centering_cutoff))
            if (b.zero_supported() && std::find(sector.begin(), sector.end(), b) == sector.end())
                return fmt::format("cutoff {} does not reach the centered index {}", model.cutoff, b.to_string());
    }
    if (model.policy == CounterTermPolicy::fixed)
        for (int k : counterterm_range(model.params))
            if (!model.fixed_c.count(k)) return fmt::format("fixed policy needs counterterms.c{}", k);
    return "";
}

std::string RunConfig::canonical() const {
    const auto& p = model.params;
    const auto& t = model.torus;
    std::string s;
    s += fmt::format("model.d={}\nmodel.s={}\nmodel.L={:.17g}\nmodel.rho={:.17g}\n", p.d, rational_text(p.s), p.L, p.rho);
    s += fmt::format("grid.N={}\ngrid.N0={}\n", t.N, t.N0);
    s += fmt::format("truncation.cutoff={:.17g}\ntruncation.centering_cutoff={:.17g}\n", model.cutoff,
                     model.centering_cutoff);
    s += fmt::format("counterterms.policy={}\ncounterterms.zero_mode={}\n", policy_name(model.policy), model.zero_mode);
    for (const auto& [k, v] : model.fixed_c) s += fmt::format("counterterms.c{}={:.17g}\n", k, v);
    s += fmt::format("run.seed={}\nrun.members={}\nrun.moment_p={}\nrun.time_stride={}\nrun.space_stride={}\n", seed,
                     members, moment_p, time_stride, space_stride);
    s += fmt::format("run.r_min_rho={:.17g}\nrun.r_max_L={:.17g}\nrun.per_octave={}\nrun.base_points={}\n", r_min_rho,
                     r_max_L, per_octave, base_points);
    return s;
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

std::string RunConfig::hash() const { return sha256_hex(canonical()); }

RunConfig parse_config(std::istream& is) {
    pt::ptree t;
    try {
        pt::read_ini(is, t);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    static const std::set<std::string> known{
        "model.d", "model.s", "model.L", "model.rho", "grid.N", "grid.N0", "truncation.cutoff",
        "truncation.centering_cutoff", "counterterms.policy", "counterterms.zero_mode", "run.seed", "run.members",
        "run.moment_p", "run.time_stride", "run.space_stride", "run.r_min_rho", "run.r_max_L", "run.per_octave",
        "run.base_points", "run.out"};
    for (const auto& [sec, body] : t) {
        if (body.empty() && !body.data().empty()) throw ConfigError("key outside a section: " + sec);
        for (const auto& [key, v] : body) {
            std::string full = sec + "." + key;
            bool fixed_c = sec == "counterterms" && key.size() > 1 && key[0] == 'c' &&
                           key.find_first_not_of("0123456789", 1) == std::string::npos;
            if (!known.count(full) && !fixed_c) throw ConfigError("unknown key " + full);
        }
    }
    RunConfig c;
    auto& p = c.model.params;
    p.d = get(t, "model.d", p.d);
    if (auto s = t.get_optional<std::string>("model.s")) {
        try {
            p.s = parse_rational(*s);
        } catch (const std::exception&) {
            throw ConfigError("bad value for model.s");
        }
    }
    p.L = get(t, "model.L", p.L);
    p.rho = get(t, "model.rho", p.rho);
    c.model.torus.d = p.d;
    c.model.torus.L = p.L;
    c.model.torus.N = get(t, "grid.N", c.model.torus.N);
    c.model.torus.N0 = get(t, "grid.N0", c.model.torus.N0);
    c.model.cutoff = get(t, "truncation.cutoff", c.model.cutoff);
    c.model.centering_cutoff = get(t, "truncation.centering_cutoff", c.model.centering_cutoff);
    c.model.policy = parse_policy(get<std::string>(t, "counterterms.policy", policy_name(c.model.policy)));
    c.model.zero_mode = get(t, "counterterms.zero_mode", c.model.zero_mode);
    if (auto sec = t.get_child_optional("counterterms"))
        for (const auto& [key, v] : *sec)
            if (key.size() > 1 && key[0] == 'c' && key.find_first_not_of("0123456789", 1) == std::string::npos)
                c.model.fixed_c[std::stoi(key.substr(1))] = get(*sec, key, 0.0);
    c.seed = get(t, "run.seed", c.seed);
    c.members = get(t, "run.members", c.members);
    c.moment_p = get(t, "run.moment_p", c.moment_p);
    c.time_stride = get(t, "run.time_stride", c.time_stride);
    c.space_stride = get(t, "run.space_stride", c.space_stride);
    c.r_min_rho = get(t, "run.r_min_rho", c.r_min_rho);
    c.r_max_L = get(t, "run.r_max_L", c.r_max_L);
    c.per_octave = get(t, "run.per_octave", c.per_octave);
    c.base_points = get(t, "run.base_points", c.base_points);
    c.out = get<std::string>(t, "run.out", c.out);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    return parse_config(is);
}

std::string to_ini(const RunConfig& c) {
    std::string out, section;
    std::istringstream is(c.canonical());
    std::string line;
    while (std::getline(is, line)) {
        auto dot = line.find('.');
        std::string sec = line.substr(0, dot);
        if (sec != section) {
            out += (section.empty() ? "" : "\n") + fmt::format("[{}]\n", sec);
            section = sec;
        }
        out += line.substr(dot + 1) + "\n";
    }
    out += fmt::format("out={}\n", c.out);
    return out;
}

RunConfig quick_config() {
    RunConfig c;
    c.model.torus.N = 64;
    c.model.torus.N0 = 4096;
    c.members = 16;
    c.time_stride = 16;
    return c;
}

}  // namespace mim
