// Minimal adapter speaking the oracle protocols in "echo" mode: one person
// detection covering the whole image, score = mean / 255.
//
//   echo_adapter [--crash-after N] [--hang-after N] [--garbage-after N] [--name NAME]
//   echo_adapter --listen HOST:PORT      (HTTP, POST /detect)

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "advgrid/png_io.hpp"
#include "base64.hpp"

using nlohmann::json;

namespace {

json answer(const json& req) {
    const json id = req.contains("id") ? req["id"] : json(nullptr);
    if (!req.contains("image_png_b64") || !req["image_png_b64"].is_string()) {
        return {{"id", id}, {"error", "missing image_png_b64"}};
    }
    const auto bytes = advgrid::detail::base64_decode(req["image_png_b64"].get<std::string>());
    if (!bytes) {
        return {{"id", id}, {"error", "bad base64"}};
    }
    try {
        const auto img = advgrid::decode_png(*bytes);
        const auto px = img.pixels();
        const double mean = static_cast<double>(std::accumulate(px.begin(), px.end(), std::uint64_t{0})) /
                            static_cast<double>(px.size());
        json det = {{"bbox", {0, 0, img.width(), img.height()}}, {"score", mean / 255.0}, {"class", "person"}};
        return {{"id", id}, {"detections", json::array({det})}};
    } catch (const std::exception& e) {
        return {{"id", id}, {"error", e.what()}};
    }
}

int serve_http(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "--listen wants HOST:PORT\n";
        return 2;
    }
    httplib::Server server;
    server.Post("/detect", [](const httplib::Request& req, httplib::Response& res) {
        json reply;
        try {
            reply = answer(json::parse(req.body));
        } catch (const json::parse_error&) {
            reply = {{"id", nullptr}, {"error", "request is not JSON"}};
        }
        res.set_content(reply.dump(), "application/json");
    });
    const auto host = listen.substr(0, colon);
    const int port = std::atoi(listen.c_str() + colon + 1);
    if (!server.bind_to_port(host, port)) {
        std::cerr << "cannot bind " << listen << '\n';
        return 2;
    }
    std::cout << "listening on " << listen << std::endl;
    return server.listen_after_bind() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    long crash_after = -1;
    long hang_after = -1;
    long garbage_after = -1;
    std::string name = "echo";
    std::string listen;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--crash-after") {
            crash_after = std::atol(argv[i + 1]);
        } else if (flag == "--hang-after") {
            hang_after = std::atol(argv[i + 1]);
        } else if (flag == "--garbage-after") {
            garbage_after = std::atol(argv[i + 1]);
        } else if (flag == "--name") {
            name = argv[i + 1];
        } else if (flag == "--listen") {
            listen = argv[i + 1];
        }
    }
    if (!listen.empty()) {
        return serve_http(listen);
    }

    long served = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        json req;
        try {
            req = json::parse(line);
        } catch (const json::parse_error&) {
            std::cout << json{{"id", nullptr}, {"error", "request is not JSON"}}.dump() << std::endl;
            continue;
        }
        if (req.contains("hello")) {
            std::cout << json{{"ready", {{"protocol", 1}, {"name", name}}}}.dump() << std::endl;
            continue;
        }
        if (served == crash_after) {
            return 3;
        }
        if (served == hang_after) {
            std::this_thread::sleep_for(std::chrono::hours(1));
        }
        ++served;
        if (served - 1 == garbage_after) {
            std::cout << "this is not json" << std::endl;
            continue;
        }
        std::cout << answer(req).dump() << std::endl;
    }
    return 0;
}
