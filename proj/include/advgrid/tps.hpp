#pragma once

#include <array>
#include <span>
#include <vector>

#include "advgrid/image.hpp"
#include "advgrid/rng.hpp"

namespace advgrid {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Thin-plate-spline kernel r^2 log r^2, with U(0) = 0.
double tps_kernel(double r2);

/// A fitted thin-plate spline f(p) = a0 + a1 x + a2 y + sum_i w_i U(|p - src_i|)
/// per output axis.
///
/// The linear system is solved in a centred, scaled frame for conditioning.
/// affine() and weights() report the coefficients in the original pixel frame.
class TpsWarp {
public:
    Point2 operator()(Point2 p) const;

    std::span<const Point2> control_src() const { return src_; }
    std::span<const Point2> control_dst() const { return dst_; }
    double regularization() const { return lambda_; }

    /// [axis][0..2] = constant, x and y coefficients.
    std::array<std::array<double, 3>, 2> affine() const;
    /// One (wx, wy) pair per control point.
    std::vector<std::array<double, 2>> weights() const;

private:
    friend TpsWarp fit_tps(std::span<const Point2>, std::span<const Point2>, double);

    std::vector<Point2> src_;
    std::vector<Point2> dst_;
    double lambda_ = 0.0;
    Point2 center_{};
    double scale_ = 1.0;
    std::vector<Point2> src_norm_;
    std::array<std::array<double, 3>, 2> affine_norm_{};
    std::vector<std::array<double, 2>> weights_norm_;
};

/// Solves [[K + lambda I, P], [P^T, 0]] for the spline mapping src onto dst.
/// Throws ConfigError for fewer than 3 points or mismatched sizes and
/// GeometryError when the system is singular (collinear or duplicate points).
TpsWarp fit_tps(std::span<const Point2> src, std::span<const Point2> dst, double lambda = 0.0);

/// Applies the deformation by inverse mapping: every output pixel samples the
/// input at the inverse spline (fitted dst -> src), bilinear, edge-clamped.
Image warp_image(const Image& img, const TpsWarp& warp);

struct FoldConfig {
    double magnitude = 0.02;
    int grid_n = 4;
};

/// Control points on a grid_n x grid_n lattice jittered by at most
/// magnitude * min(width, height) per axis, then TPS-warped.
Image simulate_folds(const Image& img, const FoldConfig& cfg, Rng& rng);

} // namespace advgrid
