#include "advgrid/config.hpp"

#include <fstream>
#include <sstream>

#include "advgrid/errors.hpp"

namespace advgrid {

using nlohmann::json;

json default_config_json() {
    return {
        {"grid",
         {{"dimension", 8},
          {"width_ratio", 0.2},
          {"color", 0},
          {"anchor_bits", 8},
          {"anchor_u", 0.0},
          {"anchor_v", 0.0}}},
        {"ga",
         {{"g", 50},
          {"s_gen", 10},
          {"p_c", 0.6},
          {"p_m", 0.1},
          {"elimination_threshold", 0.2},
          {"early_stop", true},
          {"early_stop_conf", 0.5},
          {"budget", 500}}},
        {"eot",
         {{"enabled", false},
          {"k", 5},
          {"jitter_max", 0.02},
          {"brightness_lo", 0.9},
          {"brightness_hi", 1.1},
          {"downsample", {1, 2}}}},
        {"tps_folds", {{"enabled", false}, {"magnitude", 0.02}, {"grid_n", 4}}},
        {"oracle",
         {{"kind", "synthetic-monotone"},
          {"cmd", ""},
          {"url", ""},
          {"timeout_ms", 30000},
          {"hidden_pattern", ""},
          {"iou_threshold", 0.45}}},
        {"io", {{"dataset", ""}, {"out", "out"}, {"min_height", 120}}},
        {"seed", 0},
        {"jobs", 1},
    };
}

namespace {

void merge_into(json& base, const json& patch, const std::string& prefix) {
    if (!patch.is_object()) {
        throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
    }
    for (const auto& [key, value] : patch.items()) {
        const auto path = prefix.empty() ? key : prefix + "." + key;
        if (!base.contains(key)) {
            throw ConfigError("unknown config key '" + path + "'");
        }
        auto& slot = base[key];
        if (slot.is_object()) {
            merge_into(slot, value, path);
        } else {
            slot = value;
        }
    }
}

/// Typed access with the dotted path in every error message.
class Reader {
public:
    explicit Reader(const json& root) : root_(root) {}

    const json& node(const std::string& path) const {
        const json* cur = &root_;
        std::stringstream ss(path);
        std::string part;
        while (std::getline(ss, part, '.')) {
            if (!cur->is_object() || !cur->contains(part)) {
                throw ConfigError(path + ": missing");
            }
            cur = &(*cur)[part];
        }
        return *cur;
    }

    double number(const std::string& path) const {
        const auto& v = node(path);
        if (!v.is_number()) {
            throw ConfigError(path + ": expected a number, got " + v.dump());
        }
        return v.get<double>();
    }

    long long integer(const std::string& path) const {
        const auto& v = node(path);
        if (v.is_number_integer()) {
            return v.get<long long>();
        }
        if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
            return static_cast<long long>(v.get<double>());
        }
        throw ConfigError(path + ": expected an integer, got " + v.dump());
    }

    bool boolean(const std::string& path) const {
        const auto& v = node(path);
        if (!v.is_boolean()) {
            throw ConfigError(path + ": expected true/false, got " + v.dump());
        }
        return v.get<bool>();
    }

    std::string string(const std::string& path) const {
        const auto& v = node(path);
        if (!v.is_string()) {
            throw ConfigError(path + ": expected a string, got " + v.dump());
        }
        return v.get<std::string>();
    }

private:
    const json& root_;
};

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) {
        throw ConfigError(path + ": " + what);
    }
}

std::vector<std::uint8_t> parse_pattern(const std::string& text, const std::string& path) {
    std::vector<std::uint8_t> bits;
    for (char c : text) {
        require(c == '0' || c == '1', path, "may only contain 0 and 1");
        bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return bits;
}

json coerce_override(const json& current, const std::string& raw) {
    if (current.is_string()) {
        return raw;
    }
    try {
        return json::parse(raw);
    } catch (const json::parse_error&) {
        return raw;
    }
}

} // namespace

RunConfig run_config_from_json(const json& doc) {
    json full = default_config_json();
    merge_into(full, doc, "");
    const Reader r(full);
    RunConfig c;

    const auto dim = r.integer("grid.dimension");
    require(dim >= 1 && dim <= 64, "grid.dimension", "must lie in [1, 64]");
    c.grid.dimension = static_cast<int>(dim);
    c.grid.width_ratio = r.number("grid.width_ratio");
    require(c.grid.width_ratio > 0.0 && c.grid.width_ratio <= 1.0, "grid.width_ratio", "must lie in (0, 1]");
    const auto color = r.integer("grid.color");
    require(color >= 0 && color <= 255, "grid.color", "must lie in [0, 255]");
    c.grid.color = static_cast<std::uint8_t>(color);
    const auto bits = r.integer("grid.anchor_bits");
    require(bits >= 0 && bits <= 24, "grid.anchor_bits", "must lie in [0, 24]");
    c.grid.anchor_bits = static_cast<int>(bits);
    c.grid.fixed_anchor = {r.number("grid.anchor_u"), r.number("grid.anchor_v")};
    require(c.grid.fixed_anchor.u >= 0.0 && c.grid.fixed_anchor.u <= 1.0, "grid.anchor_u", "must lie in [0, 1]");
    require(c.grid.fixed_anchor.v >= 0.0 && c.grid.fixed_anchor.v <= 1.0, "grid.anchor_v", "must lie in [0, 1]");

    const auto g = r.integer("ga.g");
    require(g >= 2 && g % 2 == 0, "ga.g", "must be an even number >= 2");
    c.ga.population = static_cast<int>(g);
    const auto s = r.integer("ga.s_gen");
    require(s >= 1, "ga.s_gen", "must be >= 1");
    c.ga.generations = static_cast<int>(s);
    c.ga.p_crossover = r.number("ga.p_c");
    require(c.ga.p_crossover >= 0.0 && c.ga.p_crossover <= 1.0, "ga.p_c", "must lie in [0, 1]");
    c.ga.p_mutation = r.number("ga.p_m");
    require(c.ga.p_mutation >= 0.0 && c.ga.p_mutation <= 1.0, "ga.p_m", "must lie in [0, 1]");
    c.ga.elimination_threshold = r.number("ga.elimination_threshold");
    require(c.ga.elimination_threshold >= 0.0 && c.ga.elimination_threshold <= 1.0,
            "ga.elimination_threshold", "must lie in [0, 1]");
    c.ga.early_stop = r.boolean("ga.early_stop");
    c.ga.early_stop_conf = r.number("ga.early_stop_conf");
    require(c.ga.early_stop_conf > 0.0 && c.ga.early_stop_conf <= 1.0, "ga.early_stop_conf",
            "must lie in (0, 1]");
    if (r.node("ga.budget").is_null()) {
        c.ga.budget.reset();
    } else {
        const auto b = r.integer("ga.budget");
        require(b >= 1, "ga.budget", "must be >= 1 (or null for unlimited)");
        c.ga.budget = static_cast<std::size_t>(b);
    }

    c.eot_enabled = r.boolean("eot.enabled");
    const auto k = r.integer("eot.k");
    require(k >= 1, "eot.k", "must be >= 1");
    c.eot.samples = static_cast<int>(k);
    c.eot.jitter_max = r.number("eot.jitter_max");
    require(c.eot.jitter_max >= 0.0 && c.eot.jitter_max < 0.5, "eot.jitter_max", "must lie in [0, 0.5)");
    c.eot.brightness_lo = r.number("eot.brightness_lo");
    c.eot.brightness_hi = r.number("eot.brightness_hi");
    require(c.eot.brightness_lo > 0.0 && c.eot.brightness_lo <= c.eot.brightness_hi, "eot.brightness_lo",
            "must satisfy 0 < brightness_lo <= brightness_hi");
    const auto& ds = r.node("eot.downsample");
    require(ds.is_array() && !ds.empty(), "eot.downsample", "must be a non-empty array");
    c.eot.downsample_set.clear();
    for (const auto& f : ds) {
        require(f.is_number_integer() && f.get<int>() >= 1, "eot.downsample", "factors must be integers >= 1");
        c.eot.downsample_set.push_back(f.get<int>());
    }

    c.folds_enabled = r.boolean("tps_folds.enabled");
    c.folds.magnitude = r.number("tps_folds.magnitude");
    require(c.folds.magnitude >= 0.0, "tps_folds.magnitude", "must be >= 0");
    const auto gn = r.integer("tps_folds.grid_n");
    require(gn >= 2, "tps_folds.grid_n", "must be >= 2");
    c.folds.grid_n = static_cast<int>(gn);

    try {
        c.oracle.kind = oracle_kind_from_string(r.string("oracle.kind"));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("oracle.kind: ") + e.what());
    }
    c.oracle.command = r.string("oracle.cmd");
    c.oracle.url = r.string("oracle.url");
    const auto timeout = r.integer("oracle.timeout_ms");
    require(timeout > 0, "oracle.timeout_ms", "must be positive");
    c.oracle.timeout = std::chrono::milliseconds(timeout);
    c.oracle.hidden_pattern = parse_pattern(r.string("oracle.hidden_pattern"), "oracle.hidden_pattern");
    c.iou_threshold = r.number("oracle.iou_threshold");
    require(c.iou_threshold > 0.0 && c.iou_threshold < 1.0, "oracle.iou_threshold", "must lie in (0, 1)");
    try {
        c.oracle.validate(c.grid.dimension);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("oracle: ") + e.what());
    }

    c.dataset_dir = r.string("io.dataset");
    c.out_dir = r.string("io.out");
    const auto mh = r.integer("io.min_height");
    require(mh >= 1, "io.min_height", "must be >= 1");
    c.min_height = static_cast<int>(mh);

    const auto& seed = r.node("seed");
    require(seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<long long>() >= 0), "seed",
            "must be a non-negative integer");
    c.seed = seed.get<std::uint64_t>();
    const auto jobs = r.integer("jobs");
    require(jobs >= 1, "jobs", "must be >= 1");
    c.jobs = static_cast<int>(jobs);
    return c;
}

json to_json(const RunConfig& c) {
    json j = default_config_json();
    j["grid"] = {{"dimension", c.grid.dimension},       {"width_ratio", c.grid.width_ratio},
                 {"color", c.grid.color},               {"anchor_bits", c.grid.anchor_bits},
                 {"anchor_u", c.grid.fixed_anchor.u},   {"anchor_v", c.grid.fixed_anchor.v}};
    j["ga"] = {{"g", c.ga.population},
               {"s_gen", c.ga.generations},
               {"p_c", c.ga.p_crossover},
               {"p_m", c.ga.p_mutation},
               {"elimination_threshold", c.ga.elimination_threshold},
               {"early_stop", c.ga.early_stop},
               {"early_stop_conf", c.ga.early_stop_conf},
               {"budget", c.ga.budget ? json(*c.ga.budget) : json(nullptr)}};
    j["eot"] = {{"enabled", c.eot_enabled},          {"k", c.eot.samples},
                {"jitter_max", c.eot.jitter_max},    {"brightness_lo", c.eot.brightness_lo},
                {"brightness_hi", c.eot.brightness_hi}, {"downsample", c.eot.downsample_set}};
    j["tps_folds"] = {{"enabled", c.folds_enabled}, {"magnitude", c.folds.magnitude}, {"grid_n", c.folds.grid_n}};
    std::string pattern;
    for (auto b : c.oracle.hidden_pattern) {
        pattern.push_back(b ? '1' : '0');
    }
    j["oracle"] = {{"kind", to_string(c.oracle.kind)},
                   {"cmd", c.oracle.command},
                   {"url", c.oracle.url},
                   {"timeout_ms", c.oracle.timeout.count()},
                   {"hidden_pattern", pattern},
                   {"iou_threshold", c.iou_threshold}};
    j["io"] = {{"dataset", c.dataset_dir}, {"out", c.out_dir}, {"min_height", c.min_height}};
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    return j;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    json doc = json::object();
    if (path) {
        std::ifstream in(*path);
        if (!in) {
            throw ConfigError("cannot open config file " + path->string());
        }
        std::stringstream buf;
        buf << in.rdbuf();
        const auto text = buf.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            try {
                doc = json::parse(text);
            } catch (const json::parse_error& e) {
                throw ConfigError(path->string() + ": " + e.what());
            }
        }
    }
    json full = default_config_json();
    merge_into(full, doc, "");

    for (const auto& [key, raw] : overrides) {
        json* slot = &full;
        std::stringstream ss(key);
        std::string part;
        while (std::getline(ss, part, '.')) {
            if (!slot->is_object() || !slot->contains(part)) {
                throw ConfigError("unknown config key '" + key + "'");
            }
            slot = &(*slot)[part];
        }
        if (slot->is_object()) {
            throw ConfigError("'" + key + "' is a section, not a value");
        }
        *slot = coerce_override(*slot, raw);
    }
    return run_config_from_json(full);
}

AttackConfig RunConfig::attack_config() const {
    AttackConfig a;
    a.grid = grid;
    a.ga = ga;
    a.ga.seed = seed;
    if (eot_enabled) {
        a.eot = eot;
        a.eot->seed = mix_seed(seed, 1);
    }
    if (folds_enabled) {
        a.folds = folds;
    }
    a.fold_seed = mix_seed(seed, 2);
    a.iou_threshold = iou_threshold;
    return a;
}

json attack_config_to_json(const AttackConfig& a) {
    json j;
    j["grid"] = {{"dimension", a.grid.dimension}, {"width_ratio", a.grid.width_ratio},
                 {"color", a.grid.color},         {"anchor_bits", a.grid.anchor_bits},
                 {"anchor_u", a.grid.fixed_anchor.u}, {"anchor_v", a.grid.fixed_anchor.v}};
    j["ga"] = {{"g", a.ga.population},
               {"s_gen", a.ga.generations},
               {"p_c", a.ga.p_crossover},
               {"p_m", a.ga.p_mutation},
               {"elimination_threshold", a.ga.elimination_threshold},
               {"early_stop", a.ga.early_stop},
               {"early_stop_conf", a.ga.early_stop_conf},
               {"budget", a.ga.budget ? json(*a.ga.budget) : json(nullptr)},
               {"seed", a.ga.seed}};
    if (a.eot) {
        j["eot"] = {{"k", a.eot->samples},
                    {"jitter_max", a.eot->jitter_max},
                    {"brightness_lo", a.eot->brightness_lo},
                    {"brightness_hi", a.eot->brightness_hi},
                    {"downsample", a.eot->downsample_set},
                    {"seed", a.eot->seed}};
    } else {
        j["eot"] = nullptr;
    }
    if (a.folds) {
        j["tps_folds"] = {{"magnitude", a.folds->magnitude}, {"grid_n", a.folds->grid_n},
                          {"seed", a.fold_seed}};
    } else {
        j["tps_folds"] = nullptr;
    }
    j["iou_threshold"] = a.iou_threshold;
    return j;
}

} // namespace advgrid
