#include "advgrid/image.hpp"

#include <algorithm>
#include <numeric>

#include "advgrid/errors.hpp"

namespace advgrid {

Image::Image(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
              fill) {
    if (width < 0 || height < 0) {
        throw ConfigError("image dimensions must be non-negative");
    }
}

Image::Image(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 0 || height < 0 ||
        pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ConfigError("pixel count does not match image dimensions");
    }
}

double Image::mean(const BBox& region) const {
    if (!region.inside(width_, height_)) {
        throw ConfigError("region outside image");
    }
    std::uint64_t sum = 0;
    for (int y = region.y; y < region.y + region.h; ++y) {
        const auto* row = pixels_.data() + index(region.x, y);
        sum = std::accumulate(row, row + region.w, sum);
    }
    return static_cast<double>(sum) / static_cast<double>(region.area());
}

Mask::Mask(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
            fill ? 1 : 0) {}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double iou(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) {
        return 0.0;
    }
    const long long ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const long long iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const long long inter = ix * iy;
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace advgrid
