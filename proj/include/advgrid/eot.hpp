#pragma once

#include <array>
#include <string>
#include <vector>

#include "advgrid/image.hpp"
#include "advgrid/rng.hpp"

namespace advgrid {

/// One draw from the transformation distribution: a perspective warp given by
/// jittered image corners, a brightness gain and an integer downsample factor.
struct TransformSample {
    // Offsets of the TL, TR, BR, BL corners, as fractions of width / height.
    std::array<std::array<double, 2>, 4> corner_jitter{};
    double brightness_scale = 1.0;
    int downsample_factor = 1;

    bool is_identity() const;
    std::string describe() const;

    friend bool operator==(const TransformSample&, const TransformSample&) = default;
};

struct EotConfig {
    int samples = 5;
    double jitter_max = 0.02;
    double brightness_lo = 0.9;
    double brightness_hi = 1.1;
    std::vector<int> downsample_set{1, 2};
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<TransformSample> sample_transforms(const EotConfig& cfg, Rng& rng);

/// Perspective warp (bilinear, edge-clamped), then brightness, then block-mean
/// downsampling.
Image apply_transform(const Image& img, const TransformSample& t);

/// Where a box of the source image lands after apply_transform: the
/// axis-aligned hull of its warped corners, scaled by the downsample factor.
BBox transform_box(const BBox& box, int width, int height, const TransformSample& t);

} // namespace advgrid
