#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "advgrid/errors.hpp"
#include "advgrid/oracle.hpp"
#include "advgrid/png_io.hpp"
#include "base64.hpp"

namespace advgrid {

using nlohmann::json;

namespace protocol {

std::string make_request(std::int64_t id, const Image& img) {
    const auto png = encode_png(img);
    return json{{"id", id}, {"image_png_b64", detail::base64_encode(png)}}.dump();
}

namespace {

BBox parse_box(const json& j) {
    if (!j.is_array() || j.size() != 4 ||
        !std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_number(); })) {
        throw ProtocolError("detection bbox must be [x, y, w, h]");
    }
    auto px = [&](std::size_t i) { return static_cast<int>(std::lround(j[i].get<double>())); };
    return {px(0), px(1), px(2), px(3)};
}

} // namespace

std::vector<Detection> parse_response(const std::string& line, std::int64_t expected_id) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ProtocolError("response must be a JSON object");
    }
    if (!j.contains("id")) {
        throw ProtocolError("response lacks an id");
    }
    if (!(j["id"].is_number_integer() && j["id"].get<std::int64_t>() == expected_id)) {
        throw ProtocolError("response id " + j["id"].dump() + " does not match request id " +
                            std::to_string(expected_id));
    }
    if (j.contains("error")) {
        throw ProtocolError("adapter error: " + j["error"].dump());
    }
    if (!j.contains("detections") || !j["detections"].is_array()) {
        throw ProtocolError("response lacks a detections array");
    }
    std::vector<Detection> out;
    for (const auto& d : j["detections"]) {
        if (!d.is_object() || !d.contains("bbox") || !d.contains("score") || !d.contains("class")) {
            throw ProtocolError("detection must carry bbox, score and class");
        }
        if (!d["score"].is_number() || !d["class"].is_string()) {
            throw ProtocolError("detection score must be a number and class a string");
        }
        const double score = d["score"].get<double>();
        if (!(score >= 0.0 && score <= 1.0)) {
            throw ProtocolError("detection score " + std::to_string(score) + " outside [0, 1]");
        }
        out.push_back({parse_box(d["bbox"]), score, d["class"].get<std::string>()});
    }
    return out;
}

} // namespace protocol

// ---------------------------------------------------------------------------

SubprocessOracle::SubprocessOracle(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
        throw TransportError(std::string("socketpair: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw TransportError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(fds[1], STDIN_FILENO);
        ::dup2(fds[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(fds[1]);
    ::setpgid(pid, pid);
    pid_ = pid;
    to_child_ = fds[0];
    from_child_ = fds[0];

    try {
        write_line(json{{"hello", {{"protocol", protocol::kVersion}}}}.dump());
        const auto reply = read_line();
        json j;
        try {
            j = json::parse(reply);
        } catch (const json::parse_error&) {
            throw ProtocolError("handshake reply is not JSON: " + reply);
        }
        if (!j.is_object() || !j.contains("ready") || !j["ready"].is_object() ||
            j["ready"].value("protocol", -1) != protocol::kVersion) {
            throw ProtocolError("unexpected handshake reply: " + reply);
        }
        adapter_name_ = j["ready"].value("name", std::string{});
    } catch (...) {
        shutdown();
        throw;
    }
}

SubprocessOracle::~SubprocessOracle() { shutdown(); }

std::string SubprocessOracle::name() const { return "subprocess:" + adapter_name_; }

void SubprocessOracle::shutdown() {
    if (to_child_ >= 0) {
        ::close(to_child_);
        to_child_ = from_child_ = -1;
    }
    if (pid_ > 0) {
        for (int i = 0; i < 100; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        // The shell may have forked the adapter instead of exec'ing it.
        ::kill(-pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
        pid_ = -1;
    }
}

void SubprocessOracle::write_line(const std::string& line) {
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::send(to_child_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw TransportError(std::string("adapter write failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string SubprocessOracle::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            throw TransportError("adapter did not answer within " +
                                 std::to_string(timeout_.count()) + " ms");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) {
            continue;
        }
        if (rc < 0) {
            throw TransportError(std::string("poll: ") + std::strerror(errno));
        }
        if (rc == 0) {
            continue;
        }
        char chunk[65536];
        const auto n = ::recv(from_child_, chunk, sizeof chunk, 0);
        if (n == 0) {
            throw TransportError("adapter closed its output (process exited?)");
        }
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw TransportError(std::string("adapter read failed: ") + std::strerror(errno));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

std::string SubprocessOracle::exchange_raw(const std::string& line) {
    std::lock_guard lock(mutex_);
    write_line(line);
    return read_line();
}

std::vector<Detection> SubprocessOracle::query(const Image& img) {
    std::lock_guard lock(mutex_);
    const auto id = next_id_++;
    write_line(protocol::make_request(id, img));
    return protocol::parse_response(read_line(), id);
}

// ---------------------------------------------------------------------------

HttpOracle::HttpOracle(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url_, m, pattern)) {
        throw ConfigError("oracle.url must look like http://host:port[/prefix], got '" + url_ + "'");
    }
    host_ = m[1].str();
    base_path_ = m[2].matched ? m[2].str() : std::string{};
    while (!base_path_.empty() && base_path_.back() == '/') {
        base_path_.pop_back();
    }
}

std::pair<int, std::string> HttpOracle::post_raw(const std::string& body) {
    httplib::Client client(host_);
    const auto secs = timeout_.count() / 1000;
    const auto usecs = (timeout_.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(base_path_ + "/detect", body, "application/json");
    if (!res) {
        return {0, httplib::to_string(res.error())};
    }
    return {res->status, res->body};
}

std::vector<Detection> HttpOracle::query(const Image& img) {
    const auto id = next_id_++;
    const auto [status, body] = post_raw(protocol::make_request(id, img));
    if (status == 0) {
        throw TransportError("POST " + url_ + "/detect failed: " + body);
    }
    if (status != 200) {
        throw TransportError("POST " + url_ + "/detect returned HTTP " + std::to_string(status));
    }
    return protocol::parse_response(body, id);
}

} // namespace advgrid
