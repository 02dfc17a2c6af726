#pragma once

// Synthetic scenes and oracles shared by the unit and acceptance suites.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "advgrid/evaluation.hpp"
#include "advgrid/optimizer.hpp"
#include "advgrid/oracle.hpp"
#include "advgrid/rng.hpp"

namespace advgrid::testing {

/// Reports one person detection at a fixed box with a fixed score.
inline std::unique_ptr<Oracle> constant_oracle(const BBox& box, double score) {
    return std::make_unique<CallbackOracle>(
        [box, score](const Image&) { return std::vector<Detection>{{box, score, "person"}}; },
        "constant", true);
}

inline Image filled(int w, int h, std::uint8_t value) { return Image(w, h, value); }

/// Uniform background with the target box painted at `level`.
inline Scene flat_scene(std::string id, int w, int h, BBox target, std::uint8_t background,
                        std::uint8_t level) {
    Image img(w, h, background);
    for (int y = target.y; y < target.y + target.h; ++y) {
        for (int x = target.x; x < target.x + target.w; ++x) {
            img.at(x, y) = level;
        }
    }
    return {std::move(id), std::move(img), target};
}

inline std::vector<std::uint8_t> random_pattern(Rng& rng, int d) {
    std::vector<std::uint8_t> p(static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
    for (auto& b : p) {
        b = random_bit(rng) ? 1 : 0;
    }
    return p;
}

/// Square target, block as large as the target, anchor fixed: cell k of the
/// grid coincides with subregion k of the rugged oracle.
struct RuggedProblem {
    Scene scene;
    std::vector<std::uint8_t> pattern;
    AttackConfig cfg;
};

inline RuggedProblem aligned_rugged_problem(std::uint64_t seed, int d = 2) {
    Rng rng(mix_seed(seed, 0xA11));
    RuggedProblem p;
    char id[32];
    std::snprintf(id, sizeof id, "aligned-%04llu", static_cast<unsigned long long>(seed));
    p.scene = flat_scene(id, 48, 48, {8, 8, 32, 32}, 90, 200);
    p.pattern = random_pattern(rng, d);
    p.cfg.grid.dimension = d;
    p.cfg.grid.width_ratio = 1.0;
    p.cfg.grid.anchor_bits = 0;
    p.cfg.grid.color = 0;
    p.cfg.ga.seed = seed;
    return p;
}

inline std::unique_ptr<Oracle> rugged_oracle_for(const Scene& scene, const std::vector<std::uint8_t>& pattern,
                                                 int d) {
    return std::make_unique<RuggedOracle>(
        SyntheticScene{scene.target, d, scene.image.width(), scene.image.height()}, pattern);
}

inline std::unique_ptr<Oracle> monotone_oracle_for(const Scene& scene) {
    return std::make_unique<MonotoneOracle>(
        SyntheticScene{scene.target, 1, scene.image.width(), scene.image.height()});
}

} // namespace advgrid::testing
