#include "advgrid/eot.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "advgrid/errors.hpp"
#include "sampling.hpp"

namespace advgrid {
namespace {

using Homography = Eigen::Matrix3d;

std::array<Eigen::Vector2d, 4> image_corners(int width, int height) {
    const double r = width - 1;
    const double b = height - 1;
    return {Eigen::Vector2d{0, 0}, Eigen::Vector2d{r, 0}, Eigen::Vector2d{r, b},
            Eigen::Vector2d{0, b}};
}

std::array<Eigen::Vector2d, 4> jittered_corners(int width, int height, const TransformSample& t) {
    auto c = image_corners(width, height);
    for (std::size_t i = 0; i < 4; ++i) {
        c[i].x() += t.corner_jitter[i][0] * width;
        c[i].y() += t.corner_jitter[i][1] * height;
    }
    return c;
}

/// Direct linear solve for the homography taking `from[i]` to `to[i]`.
Homography fit_homography(const std::array<Eigen::Vector2d, 4>& from,
                          const std::array<Eigen::Vector2d, 4>& to) {
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> rhs;
    for (int i = 0; i < 4; ++i) {
        const double x = from[static_cast<std::size_t>(i)].x();
        const double y = from[static_cast<std::size_t>(i)].y();
        const double u = to[static_cast<std::size_t>(i)].x();
        const double v = to[static_cast<std::size_t>(i)].y();
        a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
        a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
        rhs(2 * i) = u;
        rhs(2 * i + 1) = v;
    }
    const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(rhs);
    Homography m;
    m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    return m;
}

Eigen::Vector2d apply(const Homography& m, double x, double y) {
    const Eigen::Vector3d p = m * Eigen::Vector3d(x, y, 1.0);
    return {p.x() / p.z(), p.y() / p.z()};
}

bool has_jitter(const TransformSample& t) {
    for (const auto& c : t.corner_jitter) {
        if (c[0] != 0.0 || c[1] != 0.0) {
            return true;
        }
    }
    return false;
}

Image perspective(const Image& img, const TransformSample& t) {
    // Output pixel q samples the source at H^-1 q, where H moves the image
    // corners onto the jittered corners.
    const auto inverse = fit_homography(jittered_corners(img.width(), img.height(), t),
                                        image_corners(img.width(), img.height()));
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto src = apply(inverse, x, y);
            out.at(x, y) = detail::round_to_byte(detail::sample_bilinear(img, src.x(), src.y()));
        }
    }
    return out;
}

Image downsample(const Image& img, int factor) {
    const int w = std::max(1, img.width() / factor);
    const int h = std::max(1, img.height() / factor);
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            unsigned sum = 0;
            unsigned n = 0;
            for (int yy = y * factor; yy < std::min((y + 1) * factor, img.height()); ++yy) {
                for (int xx = x * factor; xx < std::min((x + 1) * factor, img.width()); ++xx) {
                    sum += img.at(xx, yy);
                    ++n;
                }
            }
            out.at(x, y) = static_cast<std::uint8_t>((sum + n / 2) / n);
        }
    }
    return out;
}

} // namespace

bool TransformSample::is_identity() const {
    return !has_jitter(*this) && brightness_scale == 1.0 && downsample_factor == 1;
}

std::string TransformSample::describe() const {
    std::ostringstream os;
    os << "eot(jitter=[";
    for (std::size_t i = 0; i < 4; ++i) {
        os << (i ? ";" : "") << corner_jitter[i][0] << "," << corner_jitter[i][1];
    }
    os << "],brightness=" << brightness_scale << ",downsample=" << downsample_factor << ")";
    return os.str();
}

void EotConfig::validate() const {
    if (samples < 1) {
        throw ConfigError("eot.k must be >= 1");
    }
    if (!(jitter_max >= 0.0 && jitter_max < 0.5)) {
        throw ConfigError("eot.jitter_max must lie in [0, 0.5)");
    }
    if (!(brightness_lo > 0.0 && brightness_lo <= brightness_hi)) {
        throw ConfigError("eot brightness range must satisfy 0 < lo <= hi");
    }
    if (downsample_set.empty() ||
        std::any_of(downsample_set.begin(), downsample_set.end(), [](int f) { return f < 1; })) {
        throw ConfigError("eot.downsample must be a non-empty set of factors >= 1");
    }
}

std::vector<TransformSample> sample_transforms(const EotConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<TransformSample> out(static_cast<std::size_t>(cfg.samples));
    for (auto& t : out) {
        for (auto& corner : t.corner_jitter) {
            corner[0] = uniform_real(rng, -cfg.jitter_max, cfg.jitter_max);
            corner[1] = uniform_real(rng, -cfg.jitter_max, cfg.jitter_max);
        }
        t.brightness_scale = uniform_real(rng, cfg.brightness_lo, cfg.brightness_hi);
        t.downsample_factor = cfg.downsample_set[uniform_index(rng, cfg.downsample_set.size())];
    }
    return out;
}

Image apply_transform(const Image& img, const TransformSample& t) {
    if (t.downsample_factor < 1) {
        throw ConfigError("downsample factor must be >= 1");
    }
    Image out = has_jitter(t) ? perspective(img, t) : img;
    if (t.brightness_scale != 1.0) {
        for (auto& p : out.pixels()) {
            p = detail::round_to_byte(p * t.brightness_scale);
        }
    }
    if (t.downsample_factor > 1) {
        out = downsample(out, t.downsample_factor);
    }
    return out;
}

BBox transform_box(const BBox& box, int width, int height, const TransformSample& t) {
    double x0 = box.x;
    double y0 = box.y;
    double x1 = box.x + box.w;
    double y1 = box.y + box.h;
    if (has_jitter(t)) {
        const auto forward = fit_homography(image_corners(width, height),
                                            jittered_corners(width, height, t));
        const std::array<Eigen::Vector2d, 4> corners{
            apply(forward, x0, y0), apply(forward, x1, y0), apply(forward, x1, y1),
            apply(forward, x0, y1)};
        x0 = y0 = std::numeric_limits<double>::infinity();
        x1 = y1 = -std::numeric_limits<double>::infinity();
        for (const auto& c : corners) {
            x0 = std::min(x0, c.x());
            y0 = std::min(y0, c.y());
            x1 = std::max(x1, c.x());
            y1 = std::max(y1, c.y());
        }
    }
    const double f = t.downsample_factor;
    const int out_w = std::max(1, width / t.downsample_factor);
    const int out_h = std::max(1, height / t.downsample_factor);
    const int bx0 = std::clamp(static_cast<int>(std::lround(x0 / f)), 0, out_w - 1);
    const int by0 = std::clamp(static_cast<int>(std::lround(y0 / f)), 0, out_h - 1);
    const int bx1 = std::clamp(static_cast<int>(std::lround(x1 / f)), bx0 + 1, out_w);
    const int by1 = std::clamp(static_cast<int>(std::lround(y1 / f)), by0 + 1, out_h);
    return {bx0, by0, bx1 - bx0, by1 - by0};
}

} // namespace advgrid
