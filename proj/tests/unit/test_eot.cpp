#include <algorithm>

#include "doctest.h"

#include "advgrid/eot.hpp"
#include "advgrid/errors.hpp"

using namespace advgrid;

namespace {

Image ramp(int w, int h) {
    Image img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            img.at(x, y) = static_cast<std::uint8_t>((x * 7 + y * 3) % 256);
        }
    }
    return img;
}

TransformSample shift(double fx, double fy) {
    TransformSample t;
    for (auto& c : t.corner_jitter) {
        c = {fx, fy};
    }
    return t;
}

} // namespace

TEST_SUITE("eot") {

TEST_CASE("degenerate distribution yields identity samples") {
    EotConfig cfg;
    cfg.samples = 4;
    cfg.jitter_max = 0.0;
    cfg.brightness_lo = cfg.brightness_hi = 1.0;
    cfg.downsample_set = {1};
    Rng rng(3);
    const auto ts = sample_transforms(cfg, rng);
    REQUIRE(ts.size() == 4);
    for (const auto& t : ts) {
        CHECK(t.is_identity());
        const auto img = ramp(31, 17);
        CHECK(apply_transform(img, t) == img);
    }
}

TEST_CASE("sampling is reproducible and within range") {
    EotConfig cfg;
    cfg.samples = 10000;
    Rng a(8), b(8);
    const auto ta = sample_transforms(cfg, a);
    CHECK(ta == sample_transforms(cfg, b));
    double mean = 0.0;
    for (const auto& t : ta) {
        CHECK(t.brightness_scale >= 0.9);
        CHECK(t.brightness_scale <= 1.1);
        CHECK((t.downsample_factor == 1 || t.downsample_factor == 2));
        for (const auto& c : t.corner_jitter) {
            CHECK(std::abs(c[0]) <= 0.02);
            CHECK(std::abs(c[1]) <= 0.02);
        }
        mean += t.brightness_scale;
    }
    mean /= static_cast<double>(ta.size());
    CHECK(std::abs(mean - 1.0) <= 0.01);
}

TEST_CASE("config validation") {
    EotConfig cfg;
    cfg.samples = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.brightness_lo = 1.2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.downsample_set = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.jitter_max = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("brightness scales and saturates") {
    TransformSample t;
    t.brightness_scale = 1.1;
    CHECK(apply_transform(Image(4, 4, 100), t) == Image(4, 4, 110));
    CHECK(apply_transform(Image(4, 4, 250), t) == Image(4, 4, 255));
    t.brightness_scale = 0.9;
    // 45 * 0.9 = 40.5 rounds half up
    CHECK(apply_transform(Image(4, 4, 45), t) == Image(4, 4, 41));
}

TEST_CASE("downsampling averages blocks") {
    TransformSample t;
    t.downsample_factor = 2;
    Image img(4, 4);
    for (int i = 0; i < 16; ++i) {
        img.pixels()[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    }
    // block means 2.5, 4.5, 10.5, 12.5, rounded half up
    CHECK(apply_transform(img, t) == Image(2, 2, {3, 5, 11, 13}));
    CHECK(apply_transform(Image(640, 512, 9), t) == Image(320, 256, 9));
    CHECK(transform_box({100, 50, 40, 80}, 640, 512, t) == BBox{50, 25, 20, 40});
}

TEST_CASE("equal corner jitter is an integer translation") {
    const auto img = ramp(100, 50);
    // +3 px right, -2 px up
    const auto out = apply_transform(img, shift(0.03, -0.04));
    for (int y = 0; y < 50; ++y) {
        for (int x = 0; x < 100; ++x) {
            REQUIRE(out.at(x, y) == img.at(std::clamp(x - 3, 0, 99), std::clamp(y + 2, 0, 49)));
        }
    }
    CHECK(transform_box({10, 10, 20, 20}, 100, 50, shift(0.03, -0.04)) == BBox{13, 8, 20, 20});
}

TEST_CASE("perspective warps keep constant images constant") {
    EotConfig cfg;
    cfg.samples = 20;
    cfg.jitter_max = 0.1;
    Rng rng(4);
    for (const auto& t : sample_transforms(cfg, rng)) {
        auto flat = t;
        flat.brightness_scale = 1.0;
        const auto out = apply_transform(Image(64, 48, 77), flat);
        CHECK(std::all_of(out.pixels().begin(), out.pixels().end(), [](auto p) { return p == 77; }));
        const auto box = transform_box({10, 10, 30, 20}, 64, 48, t);
        CHECK(box.valid());
        CHECK(iou(box, t.downsample_factor == 1 ? BBox{10, 10, 30, 20} : BBox{5, 5, 15, 10}) > 0.5);
    }
}

}
