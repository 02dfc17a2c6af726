#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "advgrid/compositor.hpp"
#include "advgrid/errors.hpp"
#include "advgrid/oracle.hpp"
#include "advgrid/png_io.hpp"

#include "../support/scenes.hpp"

using namespace advgrid;
using nlohmann::json;

#ifndef ADVGRID_ECHO_ADAPTER
#error "ADVGRID_ECHO_ADAPTER must name the echo adapter binary"
#endif

namespace {

std::string adapter(const std::string& flags = "") {
    return std::string("'") + ADVGRID_ECHO_ADAPTER + "' " + flags;
}

Image random_image(Rng& rng, int w, int h) {
    Image img(w, h);
    for (auto& p : img.pixels()) {
        p = static_cast<std::uint8_t>(uniform_index(rng, 256));
    }
    return img;
}

} // namespace

TEST_SUITE("oracle") {

TEST_CASE("iou") {
    CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
    CHECK(iou({0, 0, 10, 10}, {20, 20, 10, 10}) == 0.0);
    CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
    CHECK(iou({0, 0, 0, 10}, {0, 0, 10, 10}) == 0.0);
}

TEST_CASE("target confidence picks the best overlapping person") {
    const BBox t{100, 100, 50, 100};
    CHECK(target_confidence({{t, 0.8, "person"}}, t) == 0.8);
    CHECK(target_confidence({}, t) == 0.0);
    CHECK(target_confidence({{{400, 400, 50, 100}, 0.9, "person"}}, t) == 0.0);
    CHECK(target_confidence({{t, 0.9, "car"}, {t, 0.3, "person"}}, t) == 0.3);
    CHECK(target_confidence({{t, 0.4, "person"}, {{105, 100, 50, 100}, 0.7, "person"}}, t) == 0.7);
    // IoU exactly 0.5 against threshold 0.5 qualifies
    CHECK(target_confidence({{{0, 0, 10, 10}, 0.6, "person"}}, {0, 0, 10, 5}, 0.5) == 0.6);
    CHECK_THROWS_AS(target_confidence({}, t, 0.0), ConfigError);
    CHECK_THROWS_AS(target_confidence({}, t, 1.0), ConfigError);
}

TEST_CASE("target confidence is monotone in the threshold") {
    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        std::vector<Detection> dets;
        for (int k = 0; k < 5; ++k) {
            dets.push_back({{static_cast<int>(uniform_index(rng, 40)), static_cast<int>(uniform_index(rng, 40)),
                             10 + static_cast<int>(uniform_index(rng, 40)), 10 + static_cast<int>(uniform_index(rng, 40))},
                            uniform01(rng), "person"});
        }
        const BBox t{20, 20, 30, 30};
        double prev = 1.0;
        for (double tau = 0.05; tau < 1.0; tau += 0.05) {
            const double c = target_confidence(dets, t, tau);
            REQUIRE(c <= prev);
            prev = c;
        }
    }
}

TEST_CASE("ledger counts and caps") {
    QueryLedger ledger(3);
    auto oracle = testing::constant_oracle({0, 0, 4, 4}, 0.5);
    const Image img(4, 4);
    for (int i = 0; i < 3; ++i) {
        detect(*oracle, img, ledger);
    }
    CHECK(ledger.used() == 3);
    CHECK(ledger.remaining() == 0);
    CHECK_THROWS_AS(detect(*oracle, img, ledger), BudgetExhausted);
    CHECK(ledger.used() == 3);
    QueryLedger unlimited;
    CHECK(unlimited.remaining() == std::numeric_limits<std::size_t>::max());
}

TEST_CASE("ledger never overshoots under contention") {
    QueryLedger ledger(1000);
    std::atomic<int> granted{0};
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 400; ++i) {
                try {
                    ledger.consume();
                    ++granted;
                } catch (const BudgetExhausted&) {
                }
            }
        });
    }
    threads.clear();
    CHECK(granted.load() == 1000);
    CHECK(ledger.used() == 1000);
}

TEST_CASE("monotone oracle") {
    const BBox box{2, 2, 4, 4};
    MonotoneOracle o({box, 1, 10, 10});
    CHECK(o.query(Image(10, 10, 0)).front().score == 0.0);
    CHECK(o.query(Image(10, 10, 255)).front().score == 1.0);
    CHECK(o.query(Image(10, 10, 51)).front().score == doctest::Approx(0.2));
    // a half-size query sees the rescaled box
    const auto det = o.query(Image(5, 5, 0)).front();
    CHECK(det.bbox == BBox{1, 1, 2, 2});
    Rng rng(2);
    const auto img = random_image(rng, 10, 10);
    CHECK(o.query(img) == o.query(img));
}

TEST_CASE("rugged oracle scores pattern mismatches") {
    const BBox box{0, 0, 20, 20};
    const std::vector<std::uint8_t> pattern{1, 0, 1, 0};
    RuggedOracle o({box, 2, 20, 20}, pattern);
    auto paint = [](std::vector<std::uint8_t> occ) {
        Image img(20, 20, 200);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                if (occ[static_cast<std::size_t>(r * 2 + c)])
                    for (int y = r * 10; y < r * 10 + 10; ++y)
                        for (int x = c * 10; x < c * 10 + 10; ++x) img.at(x, y) = 0;
        return img;
    };
    CHECK(o.query(paint(pattern)).front().score == 0.0);
    CHECK(o.query(paint({0, 1, 0, 1})).front().score == 1.0);
    CHECK(o.query(paint({1, 0, 0, 0})).front().score == 0.25);
    CHECK(o.occupancy(paint({1, 0, 0, 0})) == std::vector<std::uint8_t>{1, 0, 0, 0});
    CHECK_THROWS_AS(RuggedOracle({box, 2, 20, 20}, {1, 0, 1}), ConfigError);
}

TEST_CASE("aligned rugged scene: the hidden pattern is the unique optimum") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto p = testing::aligned_rugged_problem(seed);
        auto oracle = testing::rugged_oracle_for(p.scene, p.pattern, 2);
        int optima = 0;
        for (int code = 0; code < 16; ++code) {
            Genome g;
            for (int k = 3; k >= 0; --k) g.bits.push_back(static_cast<std::uint8_t>((code >> k) & 1));
            const auto spec = decode_genome(g, p.cfg.grid);
            const auto img = compose(p.scene.image, spec, p.scene.target,
                                     mask_from_bbox(p.scene.target, 48, 48));
            const double score = oracle->query(img).front().score;
            CHECK(score == static_cast<double>(hamming_distance(g, Genome{p.pattern})) / 4.0);
            optima += score == 0.0;
        }
        CHECK(optima == 1);
    }
}

TEST_CASE("oracle config") {
    OracleConfig cfg;
    cfg.kind = OracleKind::SyntheticRugged;
    CHECK_THROWS_AS(cfg.validate(2), ConfigError);
    cfg.hidden_pattern = {1, 0, 0, 1};
    CHECK_NOTHROW(cfg.validate(2));
    CHECK(oracle_kind_from_string("http") == OracleKind::Http);
    CHECK_THROWS_AS(oracle_kind_from_string("yolo"), ConfigError);
    cfg.kind = OracleKind::Subprocess;
    CHECK_THROWS_AS(cfg.validate(2), ConfigError); // no command
    CHECK_THROWS_AS(make_synthetic_oracle(cfg, {}), ConfigError);
}

}

TEST_SUITE("protocol") {

TEST_CASE("request carries id and a PNG") {
    const Image img(3, 2, 17);
    const auto j = json::parse(protocol::make_request(41, img));
    CHECK(j["id"] == 41);
    CHECK(j["image_png_b64"].is_string());
}

TEST_CASE("response parsing") {
    const auto dets = protocol::parse_response(
        R"({"id":7,"detections":[{"bbox":[1,2,3,4],"score":0.25,"class":"person"}]})", 7);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0] == Detection{{1, 2, 3, 4}, 0.25, "person"});
    CHECK(protocol::parse_response(R"({"id":7,"detections":[]})", 7).empty());
    CHECK_THROWS_AS(protocol::parse_response(R"({"id":8,"detections":[]})", 7), ProtocolError);
    CHECK_THROWS_AS(protocol::parse_response(R"({"detections":[]})", 7), ProtocolError);
    CHECK_THROWS_AS(protocol::parse_response(R"({"id":7,"error":"boom"})", 7), ProtocolError);
    CHECK_THROWS_AS(protocol::parse_response("nope", 7), ProtocolError);
    CHECK_THROWS_AS(protocol::parse_response(
                        R"({"id":7,"detections":[{"bbox":[1,2,3],"score":0.2,"class":"person"}]})", 7),
                    ProtocolError);
    CHECK_THROWS_AS(protocol::parse_response(
                        R"({"id":7,"detections":[{"bbox":[1,2,3,4],"score":1.5,"class":"person"}]})", 7),
                    ProtocolError);
}

TEST_CASE("subprocess adapter: handshake, round trips and echo scores") {
    SubprocessOracle o(adapter("--name fixture"), std::chrono::milliseconds(5000));
    CHECK(o.name() == "subprocess:fixture");
    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        const auto img = random_image(rng, 16 + i, 20);
        const BBox full{0, 0, img.width(), img.height()};
        MonotoneOracle ref({full, 1, img.width(), img.height()});
        const auto got = o.query(img);
        REQUIRE(got.size() == 1);
        CHECK(got[0].bbox == full);
        CHECK(std::abs(got[0].score - ref.query(img)[0].score) <= 1.0 / 255.0);
    }
    CHECK(o.query(Image(8, 8, 0))[0].score == 0.0);
    const auto reply = json::parse(o.exchange_raw("{broken"));
    CHECK(reply.contains("error"));
    CHECK(o.query(Image(8, 8, 255))[0].score == 1.0);
}

TEST_CASE("subprocess adapter failures surface as transport or protocol errors") {
    {
        SubprocessOracle o(adapter("--crash-after 2"), std::chrono::milliseconds(5000));
        o.query(Image(4, 4));
        o.query(Image(4, 4));
        CHECK_THROWS_AS(o.query(Image(4, 4)), TransportError);
    }
    {
        SubprocessOracle o(adapter("--hang-after 0"), std::chrono::milliseconds(200));
        CHECK_THROWS_AS(o.query(Image(4, 4)), TransportError);
    }
    {
        SubprocessOracle o(adapter("--garbage-after 0"), std::chrono::milliseconds(5000));
        CHECK_THROWS_AS(o.query(Image(4, 4)), ProtocolError);
    }
    CHECK_THROWS_AS(SubprocessOracle("exit 0", std::chrono::milliseconds(2000)), TransportError);
    CHECK_THROWS_AS(SubprocessOracle("echo hello", std::chrono::milliseconds(2000)), ProtocolError);
}

TEST_CASE("http adapter") {
    httplib::Server server;
    std::atomic<int> served{0};
    server.Post("/v1/detect", [&](const httplib::Request& req, httplib::Response& res) {
        ++served;
        const auto j = json::parse(req.body);
        if (j["id"] == 3) {
            res.status = 503;
            return;
        }
        const json det = {{"bbox", {0, 0, 10, 10}}, {"score", 0.75}, {"class", "person"}};
        res.set_content(json{{"id", j["id"]}, {"detections", json::array({det})}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::jthread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpOracle o("http://127.0.0.1:" + std::to_string(port) + "/v1", std::chrono::milliseconds(5000));
    CHECK(o.query(Image(10, 10))[0] == Detection{{0, 0, 10, 10}, 0.75, "person"});
    CHECK(o.query(Image(10, 10))[0].score == 0.75);
    CHECK_THROWS_AS(o.query(Image(10, 10)), TransportError); // id 3 -> HTTP 503
    CHECK(served.load() == 3);
    server.stop();
    worker.join();

    HttpOracle dead("http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(500));
    CHECK_THROWS_AS(dead.query(Image(4, 4)), TransportError);
    CHECK_THROWS_AS(HttpOracle("ftp://x", std::chrono::milliseconds(10)), ConfigError);
}

}
