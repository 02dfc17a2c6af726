#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "advgrid/image.hpp"

namespace advgrid {

struct Detection {
    BBox bbox;
    double score = 0.0;
    std::string class_label = "person";

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Counts detector queries against an optional budget. Safe to share between
/// threads; used never exceeds budget.
class QueryLedger {
public:
    QueryLedger() = default;
    explicit QueryLedger(std::optional<std::size_t> budget) : budget_(budget) {}

    std::size_t used() const { return used_.load(); }
    std::optional<std::size_t> budget() const { return budget_; }
    /// Remaining queries, or SIZE_MAX when unlimited.
    std::size_t remaining() const;

    /// Reserves one query. Throws BudgetExhausted, leaving used unchanged.
    void consume();

private:
    std::optional<std::size_t> budget_;
    std::atomic<std::size_t> used_{0};
};

/// An opaque detector f. Implementations report detections for one image.
class Oracle {
public:
    virtual ~Oracle() = default;
    virtual std::vector<Detection> query(const Image& img) = 0;
    virtual std::string name() const = 0;
    /// True when query() may be called from several threads at once.
    virtual bool concurrent() const { return false; }
};

/// Charges one query to the ledger, then asks the oracle.
std::vector<Detection> detect(Oracle& oracle, const Image& img, QueryLedger& ledger);

/// Highest "person" score among detections overlapping the target with
/// IoU >= iou_threshold, 0 when none qualify.
double target_confidence(const std::vector<Detection>& dets, const BBox& target,
                         double iou_threshold = 0.45);

/// The synthetic oracles know their scene box in reference-image coordinates
/// and rescale it when queried with a resized image.
struct SyntheticScene {
    BBox bbox;
    int dimension = 2;
    int ref_width = 0;
    int ref_height = 0;
};

/// score = mean intensity over the scene box / 255.
class MonotoneOracle final : public Oracle {
public:
    explicit MonotoneOracle(SyntheticScene scene) : scene_(scene) {}
    std::vector<Detection> query(const Image& img) override;
    std::string name() const override { return "synthetic-monotone"; }
    bool concurrent() const override { return true; }

private:
    SyntheticScene scene_;
};

/// Splits the scene box into D x D subregions; a subregion is occupied when its
/// mean intensity is below 128. score = fraction of subregions whose occupancy
/// disagrees with the hidden pattern.
class RuggedOracle final : public Oracle {
public:
    RuggedOracle(SyntheticScene scene, std::vector<std::uint8_t> hidden_pattern);
    std::vector<Detection> query(const Image& img) override;
    std::string name() const override { return "synthetic-rugged"; }
    bool concurrent() const override { return true; }

    std::vector<std::uint8_t> occupancy(const Image& img) const;
    const std::vector<std::uint8_t>& hidden_pattern() const { return pattern_; }

private:
    BBox scaled_box(const Image& img) const;

    SyntheticScene scene_;
    std::vector<std::uint8_t> pattern_;
};

/// Adapts any callable; used by the Python bindings and by tests.
class CallbackOracle final : public Oracle {
public:
    using Fn = std::function<std::vector<Detection>(const Image&)>;
    CallbackOracle(Fn fn, std::string name, bool concurrent = false)
        : fn_(std::move(fn)), name_(std::move(name)), concurrent_(concurrent) {}
    std::vector<Detection> query(const Image& img) override { return fn_(img); }
    std::string name() const override { return name_; }
    bool concurrent() const override { return concurrent_; }

private:
    Fn fn_;
    std::string name_;
    bool concurrent_;
};

// Wire format shared by the subprocess and HTTP backends.
namespace protocol {
inline constexpr int kVersion = 1;
std::string make_request(std::int64_t id, const Image& img);
/// Parses {"id","detections"} or {"id","error"}. Throws ProtocolError for
/// malformed payloads and for error replies.
std::vector<Detection> parse_response(const std::string& line, std::int64_t expected_id);
} // namespace protocol

/// Talks to an adapter process over line-delimited JSON on stdin/stdout.
/// One request is in flight at a time.
class SubprocessOracle final : public Oracle {
public:
    SubprocessOracle(std::string command, std::chrono::milliseconds timeout);
    ~SubprocessOracle() override;
    SubprocessOracle(const SubprocessOracle&) = delete;
    SubprocessOracle& operator=(const SubprocessOracle&) = delete;

    std::vector<Detection> query(const Image& img) override;
    std::string name() const override;

    /// Adapter name from the handshake.
    const std::string& adapter_name() const { return adapter_name_; }

    /// Sends one raw line and returns the reply line. For conformance checks.
    std::string exchange_raw(const std::string& line);

private:
    void write_line(const std::string& line);
    std::string read_line();
    void shutdown();

    std::string command_;
    std::chrono::milliseconds timeout_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::string adapter_name_;
    std::int64_t next_id_ = 1;
    std::mutex mutex_;
};

/// POST /detect against an adapter's HTTP endpoint.
class HttpOracle final : public Oracle {
public:
    HttpOracle(std::string url, std::chrono::milliseconds timeout);
    std::vector<Detection> query(const Image& img) override;
    std::string name() const override { return "http:" + url_; }
    bool concurrent() const override { return true; }

    /// Posts a raw body; returns {status, body}. Status 0 on connection failure.
    std::pair<int, std::string> post_raw(const std::string& body);

private:
    std::string url_;
    std::string host_;
    std::string base_path_;
    std::chrono::milliseconds timeout_;
    std::atomic<std::int64_t> next_id_{1};
};

enum class OracleKind { SyntheticMonotone, SyntheticRugged, Subprocess, Http };

std::string to_string(OracleKind kind);
OracleKind oracle_kind_from_string(const std::string& text);

struct OracleConfig {
    OracleKind kind = OracleKind::SyntheticMonotone;
    std::string command;
    std::string url;
    std::chrono::milliseconds timeout{30000};
    std::vector<std::uint8_t> hidden_pattern;

    void validate(int dimension) const;
};

/// Builds the synthetic oracle for one scene. Throws ConfigError for remote kinds.
std::unique_ptr<Oracle> make_synthetic_oracle(const OracleConfig& cfg, const SyntheticScene& scene);

/// Builds any oracle. Synthetic kinds need the scene; remote kinds ignore it.
std::unique_ptr<Oracle> make_oracle(const OracleConfig& cfg, const SyntheticScene& scene);

} // namespace advgrid
