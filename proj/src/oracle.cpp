#include "advgrid/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advgrid/errors.hpp"

namespace advgrid {

std::size_t QueryLedger::remaining() const {
    if (!budget_) {
        return std::numeric_limits<std::size_t>::max();
    }
    const auto u = used_.load();
    return *budget_ > u ? *budget_ - u : 0;
}

void QueryLedger::consume() {
    auto current = used_.load();
    do {
        if (budget_ && current >= *budget_) {
            throw BudgetExhausted("query budget of " + std::to_string(*budget_) + " exhausted");
        }
    } while (!used_.compare_exchange_weak(current, current + 1));
}

std::vector<Detection> detect(Oracle& oracle, const Image& img, QueryLedger& ledger) {
    ledger.consume();
    return oracle.query(img);
}

double target_confidence(const std::vector<Detection>& dets, const BBox& target,
                         double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw ConfigError("IoU threshold must lie in (0, 1)");
    }
    double best = 0.0;
    for (const auto& d : dets) {
        if (d.class_label == "person" && iou(d.bbox, target) >= iou_threshold) {
            best = std::max(best, d.score);
        }
    }
    return best;
}

namespace {

/// The scene box mapped into the coordinates of a possibly resized image.
BBox rescale(const SyntheticScene& scene, const Image& img) {
    if (scene.ref_width <= 0 || scene.ref_height <= 0 ||
        (img.width() == scene.ref_width && img.height() == scene.ref_height)) {
        return scene.bbox;
    }
    const double sx = static_cast<double>(img.width()) / scene.ref_width;
    const double sy = static_cast<double>(img.height()) / scene.ref_height;
    const int x0 = std::clamp(static_cast<int>(std::lround(scene.bbox.x * sx)), 0, img.width() - 1);
    const int y0 = std::clamp(static_cast<int>(std::lround(scene.bbox.y * sy)), 0, img.height() - 1);
    const int x1 = std::clamp(static_cast<int>(std::lround((scene.bbox.x + scene.bbox.w) * sx)),
                              x0 + 1, img.width());
    const int y1 = std::clamp(static_cast<int>(std::lround((scene.bbox.y + scene.bbox.h) * sy)),
                              y0 + 1, img.height());
    return {x0, y0, x1 - x0, y1 - y0};
}

} // namespace

std::vector<Detection> MonotoneOracle::query(const Image& img) {
    const BBox box = rescale(scene_, img);
    if (!box.inside(img.width(), img.height())) {
        throw ConfigError("synthetic scene box lies outside the queried image");
    }
    return {Detection{box, img.mean(box) / 255.0, "person"}};
}

RuggedOracle::RuggedOracle(SyntheticScene scene, std::vector<std::uint8_t> hidden_pattern)
    : scene_(scene), pattern_(std::move(hidden_pattern)) {
    const auto d = static_cast<std::size_t>(scene_.dimension);
    if (scene_.dimension < 1 || pattern_.size() != d * d) {
        throw ConfigError("rugged oracle needs a hidden pattern of D*D bits");
    }
    if (scene_.bbox.w < scene_.dimension || scene_.bbox.h < scene_.dimension) {
        throw ConfigError("rugged oracle box is smaller than D pixels");
    }
}

BBox RuggedOracle::scaled_box(const Image& img) const { return rescale(scene_, img); }

std::vector<std::uint8_t> RuggedOracle::occupancy(const Image& img) const {
    const BBox box = scaled_box(img);
    const int d = scene_.dimension;
    std::vector<std::uint8_t> occ(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0);
    for (int r = 0; r < d; ++r) {
        const int y0 = r * box.h / d;
        const int y1 = (r + 1) * box.h / d;
        for (int c = 0; c < d; ++c) {
            const int x0 = c * box.w / d;
            const int x1 = (c + 1) * box.w / d;
            if (x1 <= x0 || y1 <= y0) {
                continue; // subregion vanished after downscaling
            }
            const double m = img.mean({box.x + x0, box.y + y0, x1 - x0, y1 - y0});
            occ[static_cast<std::size_t>(r * d + c)] = m < 128.0 ? 1 : 0;
        }
    }
    return occ;
}

std::vector<Detection> RuggedOracle::query(const Image& img) {
    const auto occ = occupancy(img);
    std::size_t mismatches = 0;
    for (std::size_t k = 0; k < occ.size(); ++k) {
        mismatches += occ[k] != pattern_[k] ? 1 : 0;
    }
    const double score = static_cast<double>(mismatches) / static_cast<double>(occ.size());
    return {Detection{scaled_box(img), score, "person"}};
}

std::string to_string(OracleKind kind) {
    switch (kind) {
    case OracleKind::SyntheticMonotone:
        return "synthetic-monotone";
    case OracleKind::SyntheticRugged:
        return "synthetic-rugged";
    case OracleKind::Subprocess:
        return "subprocess";
    case OracleKind::Http:
        return "http";
    }
    return "unknown";
}

OracleKind oracle_kind_from_string(const std::string& text) {
    for (auto k : {OracleKind::SyntheticMonotone, OracleKind::SyntheticRugged,
                   OracleKind::Subprocess, OracleKind::Http}) {
        if (to_string(k) == text) {
            return k;
        }
    }
    throw ConfigError("unknown oracle kind '" + text + "'");
}

void OracleConfig::validate(int dimension) const {
    switch (kind) {
    case OracleKind::SyntheticMonotone:
        break;
    case OracleKind::SyntheticRugged: {
        const auto d = static_cast<std::size_t>(dimension);
        if (hidden_pattern.size() != d * d) {
            throw ConfigError("oracle.hidden_pattern must have D*D = " + std::to_string(d * d) +
                              " bits");
        }
        break;
    }
    case OracleKind::Subprocess:
        if (command.empty()) {
            throw ConfigError("oracle.cmd is required for the subprocess oracle");
        }
        break;
    case OracleKind::Http:
        if (url.empty()) {
            throw ConfigError("oracle.url is required for the http oracle");
        }
        break;
    }
    if (timeout.count() <= 0) {
        throw ConfigError("oracle.timeout_ms must be positive");
    }
}

std::unique_ptr<Oracle> make_synthetic_oracle(const OracleConfig& cfg, const SyntheticScene& scene) {
    cfg.validate(scene.dimension);
    switch (cfg.kind) {
    case OracleKind::SyntheticMonotone:
        return std::make_unique<MonotoneOracle>(scene);
    case OracleKind::SyntheticRugged:
        return std::make_unique<RuggedOracle>(scene, cfg.hidden_pattern);
    default:
        throw ConfigError("oracle kind '" + to_string(cfg.kind) + "' is not synthetic");
    }
}

std::unique_ptr<Oracle> make_oracle(const OracleConfig& cfg, const SyntheticScene& scene) {
    switch (cfg.kind) {
    case OracleKind::Subprocess:
        cfg.validate(scene.dimension);
        return std::make_unique<SubprocessOracle>(cfg.command, cfg.timeout);
    case OracleKind::Http:
        cfg.validate(scene.dimension);
        return std::make_unique<HttpOracle>(cfg.url, cfg.timeout);
    default:
        return make_synthetic_oracle(cfg, scene);
    }
}

} // namespace advgrid
