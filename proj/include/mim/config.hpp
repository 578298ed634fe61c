#pragma once

#include "mim/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace mim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelConfig model;
    std::uint64_t seed = 1;
    int members = 256;
    int moment_p = 2;
    int time_stride = 4;
    int space_stride = 1;
    // scale window [r_min_rho * rho, r_max_L * L] on a dyadic grid
    double r_min_rho = 8;
    double r_max_L = 0.125;
    int per_octave = 4;
    int base_points = 8;
    std::string out = "out";

    std::vector<double> scales() const;
    // empty when valid
    std::string validate() const;
    // every numerics-relevant key in a fixed order, one "section.key=value" per line
    std::string canonical() const;
    // SHA-256 of canonical(), hex
    std::string hash() const;
};

RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);
// INI text that parses back to the given config
std::string to_ini(const RunConfig& c);
// small grid for a fast end-to-end check
RunConfig quick_config();

std::string sha256_hex(const std::string& data);

}  // namespace mim
