#pragma once

#include "mim/config.hpp"
#include "mim/stats.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mim {

// version string baked in at configure time
const char* code_version();

struct RenormRow {
    int k = 0;
    Estimate mc;
    double oracle = 0;
    bool has_oracle = false;
};
std::vector<RenormRow> renorm_rows(const RunConfig& cfg, const EnsembleResult& r);

struct SlopeRow {
    MultiIndex beta;
    std::string field;  // "pi" or "pi_minus"
    SlopeFit fit;
    double target = 0;
};
// slopes of every stored row whose moments are not identically zero
std::vector<SlopeRow> slope_rows(const ModelParams& p, const EnsembleResult& r);

void write_scaling_csv(const std::filesystem::path& path, const std::string& hash, const EnsembleResult& r);
void write_gamma_csv(const std::filesystem::path& path, const std::string& hash, const TorusSpec& spec,
                     const EnsembleResult& r);
void write_renorm_csv(const std::filesystem::path& path, const std::string& hash, const std::vector<RenormRow>& rows);
void write_slopes_csv(const std::filesystem::path& path, const std::string& hash, const std::vector<SlopeRow>& rows);

nlohmann::json manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& artifacts);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace mim
