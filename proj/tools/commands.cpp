#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "json.hpp"

#include "advgrid/compositor.hpp"
#include "advgrid/config.hpp"
#include "advgrid/dataset.hpp"
#include "advgrid/errors.hpp"
#include "advgrid/evaluation.hpp"
#include "advgrid/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace advgrid::cli {

namespace {

RunConfig load_config(const Common& common) {
    std::optional<fs::path> path;
    if (common.config_path) {
        path = *common.config_path;
    }
    return parse_config(path, common.overrides);
}

// Runs a command body and maps the library's error families to exit codes.
template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const TransportError& e) {
        std::cerr << "oracle error: " << e.what() << '\n';
        return kTransport;
    } catch (const ProtocolError& e) {
        std::cerr << "oracle protocol error: " << e.what() << '\n';
        return kTransport;
    } catch (const BudgetExhausted& e) {
        std::cerr << "budget exhausted: " << e.what() << '\n';
        return kBudgetExhausted;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
}

BBox parse_bbox(const std::string& text) {
    std::istringstream in(text);
    BBox b;
    char c1 = 0, c2 = 0, c3 = 0;
    std::string rest;
    if (!(in >> b.x >> c1 >> b.y >> c2 >> b.w >> c3 >> b.h) || c1 != ',' || c2 != ',' ||
        c3 != ',' || (in >> rest)) {
        throw ConfigError("--bbox must be x,y,w,h, got '" + text + "'");
    }
    return b;
}

Scene scene_from_args(const std::string& image, const std::string& bbox) {
    const fs::path path(image);
    Scene scene{path.stem().string(), read_png(path), {}};
    if (!bbox.empty()) {
        scene.target = parse_bbox(bbox);
    } else {
        auto txt = path;
        txt.replace_extension(".txt");
        if (!fs::exists(txt)) {
            throw ConfigError("no --bbox given and no annotation " + txt.string());
        }
        scene.target = read_annotation(txt, scene.image.width(), scene.image.height());
        if (!scene.target.valid()) {
            throw ConfigError(txt.string() + " holds no person box");
        }
    }
    if (!scene.target.inside(scene.image.width(), scene.image.height())) {
        throw ConfigError("target box lies outside the " + std::to_string(scene.image.width()) + "x" +
                          std::to_string(scene.image.height()) + " image");
    }
    return scene;
}

Genome read_genome(const std::string& arg) {
    if (!arg.empty() && arg.front() == '@') {
        std::ifstream in(arg.substr(1));
        if (!in) {
            throw IoError("cannot open genome file " + arg.substr(1));
        }
        std::string text;
        in >> text;
        return Genome::from_string(text);
    }
    return Genome::from_string(arg);
}

SyntheticScene synthetic_scene(const RunConfig& cfg, const Scene& scene) {
    return {scene.target, cfg.grid.dimension, scene.image.width(), scene.image.height()};
}

OracleProvider provider_for(const RunConfig& cfg) {
    // Remote adapters are shared between scenes; synthetic ones are per scene.
    if (cfg.oracle.kind == OracleKind::Subprocess || cfg.oracle.kind == OracleKind::Http) {
        auto shared = std::shared_ptr<Oracle>(make_oracle(cfg.oracle, {}));
        struct Forward final : Oracle {
            explicit Forward(std::shared_ptr<Oracle> o) : inner(std::move(o)) {}
            std::vector<Detection> query(const Image& img) override { return inner->query(img); }
            std::string name() const override { return inner->name(); }
            bool concurrent() const override { return inner->concurrent(); }
            std::shared_ptr<Oracle> inner;
        };
        return [shared](const Scene&) -> std::unique_ptr<Oracle> {
            return std::make_unique<Forward>(shared);
        };
    }
    return [cfg](const Scene& scene) { return make_oracle(cfg.oracle, synthetic_scene(cfg, scene)); };
}

std::vector<Scene> load_dataset(const RunConfig& cfg) {
    if (cfg.dataset_dir.empty()) {
        throw ConfigError("io.dataset: no dataset directory configured");
    }
    const auto samples = ingest_dataset(cfg.dataset_dir, cfg.min_height,
                                        [](const std::string& w) { std::cerr << "warning: " << w << '\n'; });
    std::vector<Scene> scenes;
    scenes.reserve(samples.size());
    for (const auto& s : samples) {
        scenes.push_back(load_scene(s));
    }
    return scenes;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

} // namespace

int run_attack_cmd(const Common& common, const AttackArgs& args) {
    return guarded([&] {
        const auto cfg = load_config(common);
        const auto scene = scene_from_args(args.image, args.bbox);
        auto oracle = make_oracle(cfg.oracle, synthetic_scene(cfg, scene));
        const auto attack_cfg = cfg.attack_config();

        QueryLedger clean_ledger;
        const double clean_conf =
            target_confidence(detect(*oracle, scene.image, clean_ledger), scene.target, cfg.iou_threshold);

        AttackObserver observer;
        observer.on_generation = [](const GenerationEvent& e) {
            std::cerr << "generation " << e.generation << ": best conf " << 1.0 - e.best_fit << ", "
                      << e.queries_used << " queries\n";
        };
        const auto result = run_attack(scene, *oracle, attack_cfg, observer);
        if (result.status == AttackStatus::Aborted) {
            throw TransportError(result.error);
        }

        fs::create_directories(cfg.out_dir);
        const fs::path out(cfg.out_dir);
        const auto sample =
            make_adversarial_sample(scene.image, scene.id, result.best_genome, attack_cfg.grid, scene.target);
        write_png(out / (scene.id + "_adv.png"), sample.image);
        const auto spec = decode_genome(result.best_genome, attack_cfg.grid);
        write_json(out / (scene.id + "_result.json"),
                   {{"id", scene.id},
                    {"target", {scene.target.x, scene.target.y, scene.target.w, scene.target.h}},
                    {"clean_conf", clean_conf},
                    {"final_conf", result.best_confidence()},
                    {"success", result.success},
                    {"status", to_string(result.status)},
                    {"queries", result.queries_used},
                    {"generations", result.generations_run},
                    {"history", result.history},
                    {"genome", result.best_genome.to_string()},
                    {"anchor", {spec.anchor.u, spec.anchor.v}},
                    {"config", to_json(cfg)}});
        std::cout << scene.id << ": " << to_string(result.status) << ", conf " << clean_conf << " -> "
                  << result.best_confidence() << " in " << result.queries_used << " queries\n";
        if (result.status == AttackStatus::BudgetExhausted) {
            return static_cast<int>(kBudgetExhausted);
        }
        return static_cast<int>(kOk);
    });
}

int run_evaluate_cmd(const Common& common) {
    return guarded([&] {
        const auto cfg = load_config(common);
        const auto scenes = load_dataset(cfg);
        SuiteOptions options;
        options.jobs = cfg.jobs;
        auto report = run_suite(scenes, provider_for(cfg), cfg.attack_config(), options);
        report.config = to_json(cfg);
        fs::create_directories(cfg.out_dir);
        const auto [json_path, csv_path] = write_report(report, fs::path(cfg.out_dir) / "report");
        std::cout << "ASR " << report.asr << " over " << report.samples.size() << " samples, mean queries "
                  << report.mean_queries << "\n"
                  << "wrote " << json_path.string() << " and " << csv_path.string() << '\n';
        return static_cast<int>(kOk);
    });
}

int run_ablate_cmd(const Common& common, const AblateArgs& args) {
    return guarded([&] {
        const auto cfg = load_config(common);
        AblationSweep sweep{ablation_axis_from_string(args.axis), args.values};
        sweep.validate();
        const auto scenes = load_dataset(cfg);
        SuiteOptions options;
        options.jobs = cfg.jobs;
        const auto rows = ablate(scenes, provider_for(cfg), sweep, cfg.attack_config(), options);
        fs::create_directories(cfg.out_dir);
        write_ablation(rows, sweep.axis, fs::path(cfg.out_dir) / ("ablation_" + to_string(sweep.axis)));
        for (const auto& r : rows) {
            std::cout << to_string(sweep.axis) << '=' << r.value << "  ASR " << r.asr << "  mean queries "
                      << r.mean_queries << '\n';
        }
        return static_cast<int>(kOk);
    });
}

int run_render_cmd(const Common& common, const RenderArgs& args) {
    return guarded([&] {
        const auto cfg = load_config(common);
        const auto scene = scene_from_args(args.image, args.bbox);
        const auto genome = read_genome(args.genome);
        const auto sample = make_adversarial_sample(scene.image, scene.id, genome, cfg.grid, scene.target);
        fs::path out = args.output;
        if (out.empty()) {
            fs::create_directories(cfg.out_dir);
            out = fs::path(cfg.out_dir) / (scene.id + "_render.png");
        }
        write_png(out, sample.image);
        std::cout << "wrote " << out.string() << '\n';
        return static_cast<int>(kOk);
    });
}

int run_splice_cmd(const Common& common, const SpliceArgs& args) {
    return guarded([&] {
        const auto cfg = load_config(common);
        const auto spec = decode_genome(read_genome(args.genome), cfg.grid);
        SpliceParams params{args.tiles_x, args.tiles_y, args.offset_x, args.offset_y, args.cell_px, 255};
        const auto texture = splice_pattern(spec, params);
        fs::path out = args.output;
        if (out.empty()) {
            fs::create_directories(cfg.out_dir);
            out = fs::path(cfg.out_dir) / "texture.png";
        }
        write_png(out, texture);
        std::cout << "wrote " << out.string() << " (" << texture.width() << "x" << texture.height() << ")\n";
        return static_cast<int>(kOk);
    });
}

namespace {

struct CheckLog {
    int failures = 0;
    void line(bool ok, const std::string& what) {
        std::cout << (ok ? "ok    " : "FAIL  ") << what << '\n';
        failures += ok ? 0 : 1;
    }
};

Image random_image(Rng& rng, int w, int h) {
    Image img(w, h);
    const auto base = static_cast<int>(uniform_index(rng, 256));
    const auto spread = static_cast<int>(uniform_index(rng, 64));
    for (auto& p : img.pixels()) {
        const int v = base + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(2 * spread + 1))) - spread;
        p = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
    }
    return img;
}

} // namespace

int run_oracle_check_cmd(const Common& common, const OracleCheckArgs& args) {
    return guarded([&] {
        const auto cfg = load_config(common);
        if (cfg.oracle.kind != OracleKind::Subprocess && cfg.oracle.kind != OracleKind::Http) {
            throw ConfigError("oracle-check needs oracle.kind subprocess or http");
        }
        CheckLog log;
        auto oracle = make_oracle(cfg.oracle, {});
        log.line(true, "handshake / connection: " + oracle->name());

        Rng rng(mix_seed(cfg.seed, 0x0C));
        int round_trip_ok = 0;
        for (int i = 0; i < args.round_trips; ++i) {
            const auto img = random_image(rng, 32 + static_cast<int>(uniform_index(rng, 64)),
                                          32 + static_cast<int>(uniform_index(rng, 64)));
            // query() enforces id matching and response shape.
            oracle->query(img);
            ++round_trip_ok;
        }
        log.line(round_trip_ok == args.round_trips,
                 std::to_string(round_trip_ok) + "/" + std::to_string(args.round_trips) +
                     " round-trips with matching ids");

        // Malformed requests must be answered with an error and leave the adapter usable.
        auto check_error_reply = [&](const std::string& raw, std::optional<std::int64_t> id, const std::string& what) {
            std::string reply;
            if (auto* sub = dynamic_cast<SubprocessOracle*>(oracle.get())) {
                reply = sub->exchange_raw(raw);
            } else {
                auto [status, body] = dynamic_cast<HttpOracle&>(*oracle).post_raw(raw);
                if (status == 0) {
                    throw TransportError("adapter unreachable: " + body);
                }
                reply = body;
            }
            bool ok = false;
            try {
                const auto j = json::parse(reply);
                ok = j.is_object() && j.contains("error") &&
                     (!id || (j.contains("id") && j["id"] == *id));
            } catch (const json::parse_error&) {
                ok = false;
            }
            log.line(ok, what + " answered with an error object");
        };
        check_error_reply("{not json", std::nullopt, "non-JSON request");
        check_error_reply(json{{"id", 424242}}.dump(), 424242, "request without image");
        check_error_reply(json{{"id", 424243}, {"image_png_b64", "@@@@"}}.dump(), 424243, "undecodable image");
        oracle->query(Image(8, 8, 128));
        log.line(true, "adapter still answers after malformed input");

        int echo_ok = 0;
        double worst = 0.0;
        for (int i = 0; i < args.echo_images; ++i) {
            const auto img = random_image(rng, 40 + static_cast<int>(uniform_index(rng, 40)),
                                          40 + static_cast<int>(uniform_index(rng, 40)));
            const BBox full{0, 0, img.width(), img.height()};
            MonotoneOracle reference({full, 1, img.width(), img.height()});
            const double want = target_confidence(reference.query(img), full);
            const double got = target_confidence(oracle->query(img), full);
            worst = std::max(worst, std::abs(want - got));
            echo_ok += std::abs(want - got) <= 1.0 / 255.0 ? 1 : 0;
        }
        if (args.echo_images > 0) {
            std::ostringstream msg;
            msg << echo_ok << "/" << args.echo_images
                << " echo scores match the in-process monotone oracle within 1/255 (worst " << worst << ")";
            log.line(echo_ok == args.echo_images, msg.str());
        }
        std::cout << (log.failures == 0 ? "adapter conforms" : "adapter does NOT conform") << '\n';
        return static_cast<int>(log.failures == 0 ? kOk : kTransport);
    });
}

} // namespace advgrid::cli
