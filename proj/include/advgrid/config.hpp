#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "advgrid/optimizer.hpp"

namespace advgrid {

/// Everything a CLI run needs. JSON keys mirror the field names below, grouped
/// as grid.*, ga.*, eot.*, tps_folds.*, oracle.*, io.* plus top-level seed/jobs.
struct RunConfig {
    GridSettings grid;
    GaConfig ga;
    bool eot_enabled = false;
    EotConfig eot;
    bool folds_enabled = false;
    FoldConfig folds;
    OracleConfig oracle;
    double iou_threshold = 0.45;
    std::string dataset_dir;
    std::string out_dir = "out";
    int min_height = 120;
    std::uint64_t seed = 0;
    int jobs = 1;

    /// The optimizer view, with every stochastic component seeded from `seed`.
    AttackConfig attack_config() const;
};

/// The defaults document. Every accepted key appears in it.
nlohmann::json default_config_json();

nlohmann::json to_json(const RunConfig& cfg);

/// Converts a document with the same shape as default_config_json(). Throws
/// ConfigError naming the dotted field path on bad values or unknown keys.
RunConfig run_config_from_json(const nlohmann::json& j);

/// defaults < file < overrides. Override keys are dotted paths ("ga.g") and
/// values are parsed as JSON when possible, else taken as strings.
RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {});

nlohmann::json attack_config_to_json(const AttackConfig& cfg);

} // namespace advgrid
