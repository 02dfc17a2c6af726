#pragma once

#include <string>
#include <vector>

#include "advgrid/grid.hpp"
#include "advgrid/image.hpp"

namespace advgrid {

/// 1 exactly on the box interior. Throws ConfigError if the box leaves the image.
Mask mask_from_bbox(const BBox& box, int width, int height);

/// Paints every opaque cell of the grid with spec.color wherever the mask is
/// set. Pixels outside opaque cells or outside the mask are copied verbatim.
Image compose(const Image& clean, const GridSpec& spec, const BBox& target, const Mask& mask);

/// Number of pixels compose() would overwrite, from geometry alone.
std::size_t predicted_changed_pixels(const GridSpec& spec, const BBox& target, const Mask& mask);

struct AdversarialSample {
    Image image;
    std::string base_id;
    Genome genome;
    std::vector<std::string> transform_log;
};

AdversarialSample make_adversarial_sample(const Image& clean, std::string base_id,
                                          const Genome& genome, const GridSettings& settings,
                                          const BBox& target);

struct SpliceParams {
    int tiles_x = 1;
    int tiles_y = 1;
    int offset_x = 0;
    int offset_y = 0;
    int cell_px = 10;
    std::uint8_t background = 255;
};

/// Flat garment texture: the block rendered at cell_px per cell, tiled
/// tiles_x by tiles_y, then cyclically shifted by the offset. Offsets are taken
/// modulo the block period.
Image splice_pattern(const GridSpec& spec, const SpliceParams& params);

} // namespace advgrid
