#include "advgrid/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "advgrid/config.hpp"
#include "advgrid/errors.hpp"

namespace advgrid {

using nlohmann::json;

double asr(std::span<const double> final_confidences) {
    if (final_confidences.empty()) {
        throw ConfigError("attack success rate of an empty set is undefined");
    }
    const auto evaded = std::count_if(final_confidences.begin(), final_confidences.end(),
                                      [](double c) { return c < kDetectionThreshold; });
    return static_cast<double>(evaded) / static_cast<double>(final_confidences.size());
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

/// Per-scene seeds so the outcome of one scene does not depend on the others
/// or on scheduling.
AttackConfig config_for_scene(const AttackConfig& cfg, std::size_t index) {
    AttackConfig c = cfg;
    c.ga.seed = mix_seed(cfg.ga.seed, index);
    if (c.eot) {
        c.eot->seed = mix_seed(cfg.eot->seed, index);
    }
    c.fold_seed = mix_seed(cfg.fold_seed, index);
    return c;
}

struct SceneOutcome {
    bool detected = false;
    SampleOutcome sample;
};

SceneOutcome attack_scene(const Scene& scene, std::size_t index, const OracleProvider& provider,
                          const AttackConfig& cfg, const SuiteOptions& options) {
    auto oracle = provider(scene);
    QueryLedger clean_ledger;
    const auto clean = target_confidence(detect(*oracle, scene.image, clean_ledger), scene.target,
                                         cfg.iou_threshold);
    SceneOutcome out;
    if (clean < kDetectionThreshold) {
        return out;
    }
    out.detected = true;
    const auto scene_cfg = config_for_scene(cfg, index);
    const auto result = options.attack ? options.attack(scene, *oracle, scene_cfg)
                                       : run_attack(scene, *oracle, scene_cfg);
    if (result.status == AttackStatus::Aborted) {
        throw TransportError("attack on '" + scene.id + "' aborted: " + result.error);
    }
    out.sample.id = scene.id;
    out.sample.final_conf = result.best_confidence();
    out.sample.success = out.sample.final_conf < kDetectionThreshold;
    out.sample.queries = result.queries_used;
    return out;
}

} // namespace

EvaluationReport run_suite(std::span<const Scene> dataset, const OracleProvider& oracle,
                           const AttackConfig& cfg, const SuiteOptions& options) {
    if (dataset.empty()) {
        throw ConfigError("dataset is empty");
    }
    std::vector<SceneOutcome> outcomes(dataset.size());
    std::vector<std::exception_ptr> errors(dataset.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < dataset.size(); i = next++) {
            try {
                outcomes[i] = attack_scene(dataset[i], i, oracle, cfg, options);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto jobs = static_cast<std::size_t>(std::max(1, options.jobs));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(jobs, dataset.size()); ++t) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    EvaluationReport report;
    std::vector<double> confs;
    double queries = 0.0;
    for (const auto& o : outcomes) {
        if (o.detected) {
            report.samples.push_back(o.sample);
            confs.push_back(o.sample.final_conf);
            queries += static_cast<double>(o.sample.queries);
        }
    }
    std::stable_sort(report.samples.begin(), report.samples.end(),
                     [](const auto& a, const auto& b) { return a.id < b.id; });
    if (report.samples.empty()) {
        throw ConfigError("no scene is detected on the clean image; attack success rate undefined");
    }
    report.asr = asr(confs);
    report.mean_queries = queries / static_cast<double>(report.samples.size());
    report.config = attack_config_to_json(cfg);
    report.created_at = utc_timestamp();
    return report;
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
    case AblationAxis::Color:
        return "color";
    case AblationAxis::Dimension:
        return "dimension";
    case AblationAxis::WidthRatio:
        return "width_ratio";
    }
    return "unknown";
}

AblationAxis ablation_axis_from_string(const std::string& text) {
    for (auto a : {AblationAxis::Color, AblationAxis::Dimension, AblationAxis::WidthRatio}) {
        if (to_string(a) == text) {
            return a;
        }
    }
    throw ConfigError("unknown ablation axis '" + text + "' (color, dimension, width_ratio)");
}

void AblationSweep::validate() const {
    if (values.empty()) {
        throw ConfigError("ablation sweep needs at least one value");
    }
    for (double v : values) {
        const bool integral = std::floor(v) == v;
        switch (axis) {
        case AblationAxis::Color:
            if (!(integral && v >= 0 && v <= 255)) {
                throw ConfigError("color sweep values must be integers in [0, 255]");
            }
            break;
        case AblationAxis::Dimension:
            if (!(integral && v >= 1 && v <= 64)) {
                throw ConfigError("dimension sweep values must be integers in [1, 64]");
            }
            break;
        case AblationAxis::WidthRatio:
            if (!(v > 0.0 && v <= 1.0)) {
                throw ConfigError("width_ratio sweep values must lie in (0, 1]");
            }
            break;
        }
    }
}

std::vector<AblationRow> ablate(std::span<const Scene> dataset, const OracleProvider& oracle,
                                const AblationSweep& sweep, const AttackConfig& cfg,
                                const SuiteOptions& options) {
    sweep.validate();
    std::vector<AblationRow> rows;
    for (double v : sweep.values) {
        AttackConfig c = cfg;
        switch (sweep.axis) {
        case AblationAxis::Color:
            c.grid.color = static_cast<std::uint8_t>(v);
            break;
        case AblationAxis::Dimension:
            c.grid.dimension = static_cast<int>(v);
            break;
        case AblationAxis::WidthRatio:
            c.grid.width_ratio = v;
            break;
        }
        const auto report = run_suite(dataset, oracle, c, options);
        rows.push_back({v, report.asr, report.mean_queries});
    }
    return rows;
}

json report_to_json(const EvaluationReport& report) {
    json samples = json::array();
    for (const auto& s : report.samples) {
        samples.push_back({{"id", s.id}, {"final_conf", s.final_conf}, {"success", s.success},
                           {"queries", s.queries}});
    }
    return {{"config", report.config},
            {"asr", report.asr},
            {"mean_queries", report.mean_queries},
            {"samples", samples},
            {"created_at", report.created_at}};
}

EvaluationReport report_from_json(const json& j) {
    EvaluationReport r;
    try {
        r.config = j.at("config");
        r.asr = j.at("asr").get<double>();
        r.mean_queries = j.at("mean_queries").get<double>();
        r.created_at = j.value("created_at", std::string{});
        for (const auto& s : j.at("samples")) {
            r.samples.push_back({s.at("id").get<std::string>(), s.at("final_conf").get<double>(),
                                 s.at("success").get<bool>(), s.at("queries").get<std::size_t>()});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
    return r;
}

namespace {

std::string exact(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

} // namespace

std::pair<std::filesystem::path, std::filesystem::path>
write_report(const EvaluationReport& report, const std::filesystem::path& stem) {
    if (report.samples.empty()) {
        throw ConfigError("refusing to write a report without samples");
    }
    auto json_path = stem;
    json_path += ".json";
    auto csv_path = stem;
    csv_path += ".csv";

    auto js = open_out(json_path);
    js << report_to_json(report).dump(2) << '\n';
    close_checked(js, json_path);

    auto csv = open_out(csv_path);
    csv << "id,final_conf,success,queries\n";
    for (const auto& s : report.samples) {
        csv << s.id << ',' << exact(s.final_conf) << ',' << (s.success ? 1 : 0) << ',' << s.queries
            << '\n';
    }
    close_checked(csv, csv_path);
    return {json_path, csv_path};
}

EvaluationReport read_report(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) {
        throw IoError("cannot open " + json_path.string());
    }
    try {
        return report_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(json_path.string() + ": " + e.what());
    }
}

void write_ablation(const std::vector<AblationRow>& rows, AblationAxis axis,
                    const std::filesystem::path& stem) {
    auto json_path = stem;
    json_path += ".json";
    auto csv_path = stem;
    csv_path += ".csv";
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"value", r.value}, {"asr", r.asr}, {"mean_queries", r.mean_queries}});
    }
    auto js = open_out(json_path);
    js << json{{"axis", to_string(axis)}, {"rows", arr}}.dump(2) << '\n';
    close_checked(js, json_path);

    auto csv = open_out(csv_path);
    csv << to_string(axis) << ",asr,mean_queries\n";
    for (const auto& r : rows) {
        csv << exact(r.value) << ',' << exact(r.asr) << ',' << exact(r.mean_queries) << '\n';
    }
    close_checked(csv, csv_path);
}

} // namespace advgrid
