#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "advgrid/image.hpp"

namespace advgrid::detail {

inline std::uint8_t round_to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

/// Bilinear sample at a real-valued pixel coordinate. Out-of-range coordinates
/// take the nearest edge value.
inline double sample_bilinear(const Image& img, double x, double y) {
    const double max_x = img.width() - 1;
    const double max_y = img.height() - 1;
    x = std::clamp(x, 0.0, max_x);
    y = std::clamp(y, 0.0, max_y);
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
    const double bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
}

} // namespace advgrid::detail
