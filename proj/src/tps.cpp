#include "advgrid/tps.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "advgrid/errors.hpp"
#include "sampling.hpp"

namespace advgrid {

double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

Point2 TpsWarp::operator()(Point2 p) const {
    const double x = (p.x - center_.x) / scale_;
    const double y = (p.y - center_.y) / scale_;
    double out[2] = {affine_norm_[0][0] + affine_norm_[0][1] * x + affine_norm_[0][2] * y,
                     affine_norm_[1][0] + affine_norm_[1][1] * x + affine_norm_[1][2] * y};
    for (std::size_t i = 0; i < src_norm_.size(); ++i) {
        const double dx = x - src_norm_[i].x;
        const double dy = y - src_norm_[i].y;
        const double u = tps_kernel(dx * dx + dy * dy);
        out[0] += weights_norm_[i][0] * u;
        out[1] += weights_norm_[i][1] * u;
    }
    return {out[0], out[1]};
}

// In the fitting frame p~ = (p - c) / s the kernel satisfies
//   U(|p~ - q~|^2) = U(|p - q|^2) / s^2 - (log s^2 / s^2) |p - q|^2,
// and under the side conditions the second term sums to a constant.
std::array<std::array<double, 3>, 2> TpsWarp::affine() const {
    const double log_s2 = std::log(scale_ * scale_);
    std::array<std::array<double, 3>, 2> a{};
    for (std::size_t axis = 0; axis < 2; ++axis) {
        double radial = 0.0;
        for (std::size_t i = 0; i < src_.size(); ++i) {
            radial += weights_norm_[i][axis] * (src_[i].x * src_[i].x + src_[i].y * src_[i].y);
        }
        const auto& n = affine_norm_[axis];
        a[axis][0] = n[0] - (n[1] * center_.x + n[2] * center_.y) / scale_ -
                     log_s2 / (scale_ * scale_) * radial;
        a[axis][1] = n[1] / scale_;
        a[axis][2] = n[2] / scale_;
    }
    return a;
}

std::vector<std::array<double, 2>> TpsWarp::weights() const {
    std::vector<std::array<double, 2>> w(weights_norm_.size());
    const double s2 = scale_ * scale_;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = {weights_norm_[i][0] / s2, weights_norm_[i][1] / s2};
    }
    return w;
}

TpsWarp fit_tps(std::span<const Point2> src, std::span<const Point2> dst, double lambda) {
    const auto n = src.size();
    if (n < 3) {
        throw ConfigError("thin-plate spline needs at least 3 control points");
    }
    if (dst.size() != n) {
        throw ConfigError("source and destination control point counts differ");
    }
    if (!(lambda >= 0.0)) {
        throw ConfigError("regularization must be >= 0");
    }

    TpsWarp warp;
    warp.src_.assign(src.begin(), src.end());
    warp.dst_.assign(dst.begin(), dst.end());
    warp.lambda_ = lambda;

    for (const auto& p : src) {
        warp.center_.x += p.x;
        warp.center_.y += p.y;
    }
    warp.center_.x /= static_cast<double>(n);
    warp.center_.y /= static_cast<double>(n);
    double extent = 0.0;
    for (const auto& p : src) {
        extent = std::max({extent, std::abs(p.x - warp.center_.x), std::abs(p.y - warp.center_.y)});
    }
    warp.scale_ = extent > 0.0 ? extent : 1.0;
    warp.src_norm_.reserve(n);
    for (const auto& p : src) {
        warp.src_norm_.push_back({(p.x - warp.center_.x) / warp.scale_,
                                  (p.y - warp.center_.y) / warp.scale_});
    }

    const auto size = static_cast<Eigen::Index>(n + 3);
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(size, size);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(size, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = warp.src_norm_[i].x - warp.src_norm_[j].x;
            const double dy = warp.src_norm_[i].y - warp.src_norm_[j].y;
            system(r, static_cast<Eigen::Index>(j)) = tps_kernel(dx * dx + dy * dy);
        }
        system(r, r) += lambda;
        const auto k = static_cast<Eigen::Index>(n);
        system(r, k) = system(k, r) = 1.0;
        system(r, k + 1) = system(k + 1, r) = warp.src_norm_[i].x;
        system(r, k + 2) = system(k + 2, r) = warp.src_norm_[i].y;
        rhs(r, 0) = dst[i].x;
        rhs(r, 1) = dst[i].y;
    }

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) {
        throw GeometryError("thin-plate spline system is singular (collinear or duplicate points)");
    }
    Eigen::MatrixXd coef = lu.solve(rhs);
    // One step of iterative refinement.
    coef += lu.solve(rhs - system * coef);

    warp.weights_norm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        warp.weights_norm_[i] = {coef(r, 0), coef(r, 1)};
    }
    const auto k = static_cast<Eigen::Index>(n);
    for (Eigen::Index axis = 0; axis < 2; ++axis) {
        warp.affine_norm_[static_cast<std::size_t>(axis)] = {coef(k, axis), coef(k + 1, axis),
                                                             coef(k + 2, axis)};
    }
    return warp;
}

Image warp_image(const Image& img, const TpsWarp& warp) {
    const auto inverse = fit_tps(warp.control_dst(), warp.control_src(), warp.regularization());
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto src = inverse({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = detail::round_to_byte(detail::sample_bilinear(img, src.x, src.y));
        }
    }
    return out;
}

Image simulate_folds(const Image& img, const FoldConfig& cfg, Rng& rng) {
    if (!(cfg.magnitude >= 0.0)) {
        throw ConfigError("fold magnitude must be >= 0");
    }
    if (cfg.grid_n < 2) {
        throw ConfigError("fold grid_n must be >= 2");
    }
    const double amplitude = cfg.magnitude * std::min(img.width(), img.height());
    std::vector<Point2> src;
    std::vector<Point2> dst;
    const auto n = static_cast<std::size_t>(cfg.grid_n);
    src.reserve(n * n);
    dst.reserve(n * n);
    for (int j = 0; j < cfg.grid_n; ++j) {
        for (int i = 0; i < cfg.grid_n; ++i) {
            const Point2 p{i * (img.width() - 1.0) / (cfg.grid_n - 1),
                           j * (img.height() - 1.0) / (cfg.grid_n - 1)};
            src.push_back(p);
            // Draw unconditionally so the stream does not depend on magnitude.
            const double jx = uniform_real(rng, -amplitude, amplitude);
            const double jy = uniform_real(rng, -amplitude, amplitude);
            dst.push_back({p.x + jx, p.y + jy});
        }
    }
    if (amplitude == 0.0) {
        return img;
    }
    return warp_image(img, fit_tps(src, dst, 0.0));
}

} // namespace advgrid
