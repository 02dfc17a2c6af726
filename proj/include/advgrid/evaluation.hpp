#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "advgrid/optimizer.hpp"

namespace advgrid {

/// Confidence below which a target counts as evaded.
inline constexpr double kDetectionThreshold = 0.5;

/// Fraction of confidences strictly below 0.5. Throws ConfigError on empty input.
double asr(std::span<const double> final_confidences);

struct SampleOutcome {
    std::string id;
    double final_conf = 0.0;
    bool success = false;
    std::size_t queries = 0;

    friend bool operator==(const SampleOutcome&, const SampleOutcome&) = default;
};

struct EvaluationReport {
    std::vector<SampleOutcome> samples;
    double asr = 0.0;
    double mean_queries = 0.0;
    nlohmann::json config;
    std::string created_at; // excluded from determinism comparisons

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Builds the oracle used for one scene.
using OracleProvider = std::function<std::unique_ptr<Oracle>(const Scene&)>;

struct SuiteOptions {
    int jobs = 1;
    // Which attack routine to run; defaults to run_attack.
    std::function<AttackResult(const Scene&, Oracle&, const AttackConfig&)> attack;
};

/// Keeps the scenes the oracle detects on the clean image (confidence >= 0.5),
/// attacks each with a seed derived from the scene's position in the dataset
/// and aggregates. Throws ConfigError when no scene survives the filter.
EvaluationReport run_suite(std::span<const Scene> dataset, const OracleProvider& oracle,
                           const AttackConfig& cfg, const SuiteOptions& options = {});

enum class AblationAxis { Color, Dimension, WidthRatio };

std::string to_string(AblationAxis axis);
AblationAxis ablation_axis_from_string(const std::string& text);

struct AblationSweep {
    AblationAxis axis = AblationAxis::WidthRatio;
    std::vector<double> values;

    void validate() const;
};

struct AblationRow {
    double value = 0.0;
    double asr = 0.0;
    double mean_queries = 0.0;
};

/// One run_suite per sweep value with everything else fixed, in sweep order.
std::vector<AblationRow> ablate(std::span<const Scene> dataset, const OracleProvider& oracle,
                                const AblationSweep& sweep, const AttackConfig& cfg,
                                const SuiteOptions& options = {});

nlohmann::json report_to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& j);

/// Writes <stem>.json and <stem>.csv. Returns both paths.
std::pair<std::filesystem::path, std::filesystem::path>
write_report(const EvaluationReport& report, const std::filesystem::path& stem);
EvaluationReport read_report(const std::filesystem::path& json_path);

void write_ablation(const std::vector<AblationRow>& rows, AblationAxis axis,
                    const std::filesystem::path& stem);

} // namespace advgrid
