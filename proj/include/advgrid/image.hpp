#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace advgrid {

/// Axis-aligned pixel rectangle, top-left origin.
struct BBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool valid() const { return w > 0 && h > 0; }
    long long area() const { return static_cast<long long>(w) * h; }
    bool inside(int width, int height) const {
        return valid() && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
    }
    bool contains(const BBox& other) const {
        return other.x >= x && other.y >= y && other.x + other.w <= x + w &&
               other.y + other.h <= y + h;
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Row-major 8-bit grayscale raster.
class Image {
public:
    Image() = default;
    Image(int width, int height, std::uint8_t fill = 0);
    Image(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }

    std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
    std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    /// Mean intensity over a region, which must lie inside the image.
    double mean(const BBox& region) const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Binary raster, 1 marks a perturbable pixel.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, std::uint8_t fill = 0);

    int width() const { return width_; }
    int height() const { return height_; }
    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool on) { bits_[index(x, y)] = on ? 1 : 0; }
    std::size_t count() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Intersection over union of two boxes; 0 when either is empty.
double iou(const BBox& a, const BBox& b);

} // namespace advgrid
