#include <algorithm>

#include "doctest.h"

#include "advgrid/compositor.hpp"
#include "advgrid/errors.hpp"

using namespace advgrid;

namespace {

Image noise(Rng& rng, int w, int h, int lo, int hi) {
    Image img(w, h);
    for (auto& p : img.pixels()) {
        p = static_cast<std::uint8_t>(lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1))));
    }
    return img;
}

GridSpec grid(int d, Anchor a, double ratio, std::vector<std::uint8_t> cells, std::uint8_t color = 0) {
    GridSpec s;
    s.dimension = d;
    s.anchor = a;
    s.width_ratio = ratio;
    s.cells = std::move(cells);
    s.color = color;
    return s;
}

// Independent reference for which pixels the grid paints: block side from the
// target height, top-left from the anchor, cell edges at floor(k * side / D).
bool painted(const GridSpec& s, const BBox& t, const Mask& m, int x, int y) {
    const int side = std::min({static_cast<int>(std::lround(s.width_ratio * t.h)), t.w, t.h});
    const int bx = t.x + static_cast<int>(std::lround(s.anchor.u * (t.w - side)));
    const int by = t.y + static_cast<int>(std::lround(s.anchor.v * (t.h - side)));
    if (x < bx || y < by || x >= bx + side || y >= by + side || !m.at(x, y)) {
        return false;
    }
    int col = 0, row = 0;
    while ((col + 1) * side / s.dimension <= x - bx) ++col;
    while ((row + 1) * side / s.dimension <= y - by) ++row;
    return s.cells[static_cast<std::size_t>(row * s.dimension + col)] != 0;
}

} // namespace

TEST_SUITE("compositor") {

TEST_CASE("mask from box") {
    CHECK(mask_from_bbox({0, 0, 10, 10}, 10, 10).count() == 100);
    const auto one = mask_from_bbox({0, 0, 1, 1}, 10, 10);
    CHECK(one.count() == 1);
    CHECK(one.at(0, 0));
    const auto m = mask_from_bbox({2, 3, 4, 5}, 10, 10);
    CHECK(m.count() == 20);
    CHECK(m.at(2, 3));
    CHECK(m.at(5, 7));
    CHECK_FALSE(m.at(6, 7));
    CHECK_FALSE(m.at(5, 8));
    CHECK_THROWS_AS(mask_from_bbox({5, 5, 10, 10}, 10, 10), ConfigError);
}

TEST_CASE("transparent grid leaves the image alone") {
    Rng rng(1);
    const auto clean = noise(rng, 120, 160, 0, 255);
    const BBox t{10, 10, 80, 140};
    const auto out = compose(clean, grid(8, {0.3, 0.6}, 0.5, std::vector<std::uint8_t>(64, 0)), t,
                             mask_from_bbox(t, 120, 160));
    CHECK(out == clean);
}

TEST_CASE("fully opaque grid paints exactly the block") {
    const Image clean(200, 300, 128);
    const BBox t{20, 30, 100, 200};
    const auto out = compose(clean, grid(4, {0, 0}, 0.4, std::vector<std::uint8_t>(16, 1)), t,
                             mask_from_bbox(t, 200, 300));
    int zeros = 0;
    for (int y = 0; y < 300; ++y) {
        for (int x = 0; x < 200; ++x) {
            const bool in_block = x >= 20 && x < 100 && y >= 30 && y < 110;
            CHECK(out.at(x, y) == (in_block ? 0 : 128));
            zeros += out.at(x, y) == 0;
        }
    }
    CHECK(zeros == 80 * 80);
}

TEST_CASE("one opaque 10 px cell changes 100 pixels") {
    const Image clean(300, 500, 200);
    const BBox t{50, 50, 160, 400}; // block 80 px, cells 10 px
    std::vector<std::uint8_t> cells(64, 0);
    cells[27] = 1;
    const auto s = grid(8, {0.5, 0.5}, 0.2, cells);
    const auto m = mask_from_bbox(t, 300, 500);
    const auto out = compose(clean, s, t, m);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < out.pixels().size(); ++i) {
        changed += out.pixels()[i] != clean.pixels()[i];
    }
    CHECK(changed == 100);
    CHECK(predicted_changed_pixels(s, t, m) == 100);
}

TEST_CASE("locality and conservation on random scenes") {
    Rng rng(2024);
    int scenes = 0;
    while (scenes < 100) {
        const int w = 60 + static_cast<int>(uniform_index(rng, 200));
        const int h = 60 + static_cast<int>(uniform_index(rng, 200));
        const BBox t{static_cast<int>(uniform_index(rng, w / 3)), static_cast<int>(uniform_index(rng, h / 3)),
                     10 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(w / 2))),
                     10 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(h / 2)))};
        const int d = 1 + static_cast<int>(uniform_index(rng, 8));
        std::vector<std::uint8_t> cells(static_cast<std::size_t>(d * d));
        for (auto& c : cells) c = random_bit(rng);
        const auto s = grid(d, {uniform01(rng), uniform01(rng)}, 0.1 + 0.9 * uniform01(rng), cells);
        // a mask that only partly covers the target
        const BBox mb{t.x + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(t.w / 2 + 1))), t.y,
                      std::max(1, t.w / 2), t.h};
        const auto m = mask_from_bbox(mb, w, h);
        // clean pixels never equal the paint colour, so every painted pixel changes
        const auto clean = noise(rng, w, h, 1, 255);
        Image out;
        try {
            out = compose(clean, s, t, m);
        } catch (const GeometryError&) {
            continue;
        }
        ++scenes;
        std::size_t changed = 0;
        std::size_t expected = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const bool p = painted(s, t, m, x, y);
                expected += p;
                changed += out.at(x, y) != clean.at(x, y);
                REQUIRE(out.at(x, y) == (p ? 0 : clean.at(x, y)));
            }
        }
        REQUIRE(changed == expected);
        REQUIRE(predicted_changed_pixels(s, t, m) == expected);
        // composing twice changes nothing more
        REQUIRE(compose(out, s, t, m) == out);
    }
}

TEST_CASE("adversarial sample records its provenance") {
    GridSettings settings;
    settings.dimension = 2;
    settings.anchor_bits = 1;
    settings.width_ratio = 0.5;
    const Image clean(50, 100, 90);
    const auto g = Genome::from_string("00" "1001");
    const auto s = make_adversarial_sample(clean, "frame7", g, settings, {0, 0, 50, 100});
    CHECK(s.base_id == "frame7");
    CHECK(s.genome == g);
    CHECK(s.image.at(0, 0) == 0);
    CHECK(s.image.at(30, 0) == 90);
    CHECK(s.image.at(49, 49) == 0);
}

TEST_CASE("splice texture") {
    const auto s = grid(8, {0, 0}, 0.2, [] {
        std::vector<std::uint8_t> c(64, 0);
        c[0] = 1;
        c[63] = 1;
        return c;
    }());
    const auto one = splice_pattern(s, {1, 1, 0, 0, 10, 255});
    CHECK(one.width() == 80);
    CHECK(one.height() == 80);
    CHECK(one.at(0, 0) == 0);
    CHECK(one.at(9, 9) == 0);
    CHECK(one.at(10, 0) == 255);
    CHECK(one.at(79, 79) == 0);

    const auto tiled = splice_pattern(s, {2, 2, 0, 0, 10, 255});
    CHECK(tiled.width() == 160);
    CHECK(tiled.height() == 160);
    for (int y = 0; y < 160; ++y) {
        for (int x = 0; x < 160; ++x) {
            REQUIRE(tiled.at(x, y) == one.at(x % 80, y % 80));
        }
    }
    // a full period of offset is the identity
    CHECK(splice_pattern(s, {2, 2, 80, 160, 10, 255}) == tiled);

    const auto shifted = splice_pattern(s, {2, 2, 13, 37, 10, 255});
    bool toroidal = true;
    for (int y = 0; y < 160; ++y) {
        for (int x = 0; x < 160; ++x) {
            toroidal &= shifted.at(x, y) == tiled.at((x + 13) % 160, (y + 37) % 160);
        }
    }
    CHECK(toroidal);
    CHECK_THROWS_AS(splice_pattern(s, {0, 1, 0, 0, 10, 255}), ConfigError);
    CHECK_THROWS_AS(splice_pattern(s, {1, 1, -1, 0, 10, 255}), ConfigError);
}

}
