#include "advgrid/compositor.hpp"

#include <algorithm>

#include "advgrid/errors.hpp"

namespace advgrid {

Mask mask_from_bbox(const BBox& box, int width, int height) {
    if (!box.inside(width, height)) {
        throw ConfigError("mask box (" + std::to_string(box.x) + "," + std::to_string(box.y) + "," +
                          std::to_string(box.w) + "," + std::to_string(box.h) +
                          ") does not fit a " + std::to_string(width) + "x" +
                          std::to_string(height) + " image");
    }
    Mask mask(width, height);
    for (int y = box.y; y < box.y + box.h; ++y) {
        for (int x = box.x; x < box.x + box.w; ++x) {
            mask.set(x, y, true);
        }
    }
    return mask;
}

Image compose(const Image& clean, const GridSpec& spec, const BBox& target, const Mask& mask) {
    if (mask.width() != clean.width() || mask.height() != clean.height()) {
        throw ConfigError("mask dimensions differ from the image");
    }
    const auto geo = grid_geometry(spec, target);
    Image out = clean;
    for (std::size_t k = 0; k < geo.cells.size(); ++k) {
        if (spec.cells[k] == 0) {
            continue;
        }
        const BBox& cell = geo.cells[k];
        const int x_end = std::min(cell.x + cell.w, clean.width());
        const int y_end = std::min(cell.y + cell.h, clean.height());
        for (int y = std::max(cell.y, 0); y < y_end; ++y) {
            for (int x = std::max(cell.x, 0); x < x_end; ++x) {
                if (mask.at(x, y)) {
                    out.at(x, y) = spec.color;
                }
            }
        }
    }
    return out;
}

std::size_t predicted_changed_pixels(const GridSpec& spec, const BBox& target, const Mask& mask) {
    const auto geo = grid_geometry(spec, target);
    std::size_t n = 0;
    for (std::size_t k = 0; k < geo.cells.size(); ++k) {
        if (spec.cells[k] == 0) {
            continue;
        }
        const BBox& cell = geo.cells[k];
        for (int y = cell.y; y < cell.y + cell.h; ++y) {
            for (int x = cell.x; x < cell.x + cell.w; ++x) {
                if (x >= 0 && y >= 0 && x < mask.width() && y < mask.height() && mask.at(x, y)) {
                    ++n;
                }
            }
        }
    }
    return n;
}

AdversarialSample make_adversarial_sample(const Image& clean, std::string base_id,
                                          const Genome& genome, const GridSettings& settings,
                                          const BBox& target) {
    const auto spec = decode_genome(genome, settings);
    const auto mask = mask_from_bbox(target, clean.width(), clean.height());
    AdversarialSample sample;
    sample.image = compose(clean, spec, target, mask);
    sample.base_id = std::move(base_id);
    sample.genome = genome;
    return sample;
}

Image splice_pattern(const GridSpec& spec, const SpliceParams& p) {
    spec.validate();
    if (p.tiles_x < 1 || p.tiles_y < 1) {
        throw ConfigError("splice tiles must be >= 1");
    }
    if (p.cell_px < 1) {
        throw ConfigError("splice cell_px must be >= 1");
    }
    if (p.offset_x < 0 || p.offset_y < 0) {
        throw ConfigError("splice offsets must be non-negative");
    }
    const int period = spec.dimension * p.cell_px;
    const int width = period * p.tiles_x;
    const int height = period * p.tiles_y;
    const int ox = p.offset_x % period;
    const int oy = p.offset_y % period;

    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        const int row = ((y + oy) % period) / p.cell_px;
        for (int x = 0; x < width; ++x) {
            const int col = ((x + ox) % period) / p.cell_px;
            const bool opaque =
                spec.cells[static_cast<std::size_t>(row) * static_cast<std::size_t>(spec.dimension) +
                           static_cast<std::size_t>(col)] != 0;
            out.at(x, y) = opaque ? spec.color : p.background;
        }
    }
    return out;
}

} // namespace advgrid
