#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <mutex>

#include "advgrid/compositor.hpp"
#include "advgrid/config.hpp"
#include "advgrid/errors.hpp"
#include "advgrid/evaluation.hpp"
#include "advgrid/optimizer.hpp"
#include "advgrid/oracle.hpp"
#include "advgrid/png_io.hpp"
#include "advgrid/tps.hpp"

namespace py = pybind11;
using namespace advgrid;

namespace {

using Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
    if (a.ndim() != 2) {
        throw ConfigError("expected a 2-D uint8 array (height, width)");
    }
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    std::vector<std::uint8_t> px(a.data(), a.data() + a.size());
    return Image(w, h, std::move(px));
}

Array to_array(const Image& img) {
    Array out({img.height(), img.width()});
    std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
    return out;
}

nlohmann::json to_json(const py::handle& obj) {
    if (obj.is_none()) {
        return nlohmann::json::object();
    }
    const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
    return nlohmann::json::parse(text);
}

py::object from_json(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig config_from(const py::object& obj) {
    if (py::isinstance<RunConfig>(obj)) {
        return obj.cast<RunConfig>();
    }
    return run_config_from_json(to_json(obj));
}

Detection detection_from(const py::handle& h) {
    if (py::isinstance<Detection>(h)) {
        return h.cast<Detection>();
    }
    if (py::isinstance<py::dict>(h)) {
        const auto d = h.cast<py::dict>();
        const auto b = d["bbox"].cast<std::vector<int>>();
        if (b.size() != 4) {
            throw ProtocolError("detection bbox must have 4 entries");
        }
        Detection det{{b[0], b[1], b[2], b[3]}, d["score"].cast<double>(), "person"};
        if (d.contains("class")) {
            det.class_label = d["class"].cast<std::string>();
        }
        return det;
    }
    const auto t = h.cast<py::sequence>();
    Detection det{t[0].cast<BBox>(), t[1].cast<double>(), "person"};
    if (t.size() > 2) {
        det.class_label = t[2].cast<std::string>();
    }
    return det;
}

std::shared_ptr<Oracle> callback_oracle(py::function fn, std::string name) {
    auto holder = std::make_shared<py::function>(std::move(fn));
    auto call = [holder](const Image& img) {
        py::gil_scoped_acquire gil;
        const py::object out = (*holder)(to_array(img));
        std::vector<Detection> dets;
        for (const auto& item : out) {
            dets.push_back(detection_from(item));
        }
        return dets;
    };
    // The holder must be released with the GIL held.
    return std::shared_ptr<Oracle>(new CallbackOracle(call, std::move(name)), [](Oracle* o) {
        py::gil_scoped_acquire gil;
        delete o;
    });
}

// Serialises calls into oracles that are not thread safe.
struct Shared final : Oracle {
    explicit Shared(std::shared_ptr<Oracle> o) : inner(std::move(o)) {}
    std::vector<Detection> query(const Image& img) override {
        if (inner->concurrent()) {
            return inner->query(img);
        }
        std::lock_guard lock(*mutex);
        return inner->query(img);
    }
    std::string name() const override { return inner->name(); }
    bool concurrent() const override { return true; }
    std::shared_ptr<Oracle> inner;
    std::shared_ptr<std::mutex> mutex = std::make_shared<std::mutex>();
};

OracleProvider provider(const RunConfig& cfg, std::shared_ptr<Oracle> oracle) {
    if (oracle) {
        auto shared = std::make_shared<Shared>(std::move(oracle));
        return [shared](const Scene&) -> std::unique_ptr<Oracle> { return std::make_unique<Shared>(*shared); };
    }
    return [cfg](const Scene& s) {
        return make_oracle(cfg.oracle, {s.target, cfg.grid.dimension, s.image.width(), s.image.height()});
    };
}

std::vector<Scene> scenes_from(const py::sequence& items) {
    std::vector<Scene> scenes;
    for (const auto& item : items) {
        const auto t = item.cast<py::sequence>();
        if (t.size() != 3) {
            throw ConfigError("scenes are (id, image, bbox) triples");
        }
        scenes.push_back({t[0].cast<std::string>(), to_image(t[1].cast<Array>()), t[2].cast<BBox>()});
    }
    return scenes;
}

std::shared_ptr<Oracle> oracle_or_synthetic(const RunConfig& cfg, const Scene& scene,
                                            std::shared_ptr<Oracle> oracle) {
    if (oracle) {
        return oracle;
    }
    return make_oracle(cfg.oracle, {scene.target, cfg.grid.dimension, scene.image.width(), scene.image.height()});
}

} // namespace

PYBIND11_MODULE(_advgrid, m) {
    m.doc() = "Black-box grid perturbation attack against person detectors";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
    py::register_exception<BudgetExhausted>(m, "BudgetExhausted", base.ptr());
    py::register_exception<TransportError>(m, "TransportError", base.ptr());
    py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.attr("DETECTION_THRESHOLD") = kDetectionThreshold;

    py::class_<BBox>(m, "BBox")
        .def(py::init<>())
        .def(py::init([](int x, int y, int w, int h) { return BBox{x, y, w, h}; }), py::arg("x"), py::arg("y"),
             py::arg("w"), py::arg("h"))
        .def(py::init([](const py::tuple& t) {
            if (t.size() != 4) {
                throw ConfigError("a box is (x, y, w, h)");
            }
            return BBox{t[0].cast<int>(), t[1].cast<int>(), t[2].cast<int>(), t[3].cast<int>()};
        }))
        .def_readwrite("x", &BBox::x)
        .def_readwrite("y", &BBox::y)
        .def_readwrite("w", &BBox::w)
        .def_readwrite("h", &BBox::h)
        .def("as_tuple", [](const BBox& b) { return py::make_tuple(b.x, b.y, b.w, b.h); })
        .def(py::self == py::self)
        .def("__repr__", [](const BBox& b) {
            return "BBox(" + std::to_string(b.x) + ", " + std::to_string(b.y) + ", " + std::to_string(b.w) + ", " +
                   std::to_string(b.h) + ")";
        });
    py::implicitly_convertible<py::tuple, BBox>();

    m.def("iou", &iou, py::arg("a"), py::arg("b"));

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init<>())
        .def_readwrite("dimension", &GridSpec::dimension)
        .def_readwrite("width_ratio", &GridSpec::width_ratio)
        .def_property(
            "anchor", [](const GridSpec& s) { return py::make_tuple(s.anchor.u, s.anchor.v); },
            [](GridSpec& s, std::pair<double, double> a) { s.anchor = {a.first, a.second}; })
        .def_readwrite("cells", &GridSpec::cells)
        .def_readwrite("color", &GridSpec::color)
        .def("validate", &GridSpec::validate)
        .def("opaque_count", &GridSpec::opaque_count)
        .def(py::self == py::self);

    py::class_<GridSettings>(m, "GridSettings")
        .def(py::init<>())
        .def_readwrite("dimension", &GridSettings::dimension)
        .def_readwrite("width_ratio", &GridSettings::width_ratio)
        .def_readwrite("color", &GridSettings::color)
        .def_readwrite("anchor_bits", &GridSettings::anchor_bits)
        .def_property(
            "fixed_anchor", [](const GridSettings& s) { return py::make_tuple(s.fixed_anchor.u, s.fixed_anchor.v); },
            [](GridSettings& s, std::pair<double, double> a) { s.fixed_anchor = {a.first, a.second}; })
        .def_property_readonly("genome_length", [](const GridSettings& s) { return s.layout().length(); });

    m.def("encode_genome", [](const GridSpec& spec, int anchor_bits) { return encode_genome(spec, anchor_bits).to_string(); },
          py::arg("spec"), py::arg("anchor_bits"));
    m.def("decode_genome",
          [](const std::string& bits, const GridSettings& settings) {
              return decode_genome(Genome::from_string(bits), settings);
          },
          py::arg("genome"), py::arg("settings"));
    m.def("hamming_distance", [](const std::string& a, const std::string& b) {
        return hamming_distance(Genome::from_string(a), Genome::from_string(b));
    });
    m.def("grid_geometry",
          [](const GridSpec& spec, const BBox& target) {
              const auto g = grid_geometry(spec, target);
              return py::make_tuple(g.block, g.cells);
          },
          py::arg("spec"), py::arg("target"));

    m.def("compose",
          [](const Array& clean, const GridSpec& spec, const BBox& target) {
              const auto img = to_image(clean);
              return to_array(compose(img, spec, target, mask_from_bbox(target, img.width(), img.height())));
          },
          py::arg("image"), py::arg("spec"), py::arg("target"));
    m.def("render_genome",
          [](const Array& clean, const std::string& genome, const GridSettings& settings, const BBox& target) {
              return to_array(make_adversarial_sample(to_image(clean), "", Genome::from_string(genome), settings, target)
                                  .image);
          },
          py::arg("image"), py::arg("genome"), py::arg("settings"), py::arg("target"));
    m.def("splice_pattern",
          [](const GridSpec& spec, int tiles_x, int tiles_y, int offset_x, int offset_y, int cell_px,
             std::uint8_t background) {
              return to_array(splice_pattern(spec, {tiles_x, tiles_y, offset_x, offset_y, cell_px, background}));
          },
          py::arg("spec"), py::arg("tiles_x") = 2, py::arg("tiles_y") = 2, py::arg("offset_x") = 0,
          py::arg("offset_y") = 0, py::arg("cell_px") = 10, py::arg("background") = 255);

    py::class_<TpsWarp>(m, "TpsWarp")
        .def("__call__", [](const TpsWarp& w, double x, double y) {
            const auto p = w(Point2{x, y});
            return py::make_tuple(p.x, p.y);
        })
        .def_property_readonly("regularization", &TpsWarp::regularization)
        .def("affine", &TpsWarp::affine)
        .def("weights", &TpsWarp::weights);
    m.def("fit_tps",
          [](const std::vector<std::pair<double, double>>& src, const std::vector<std::pair<double, double>>& dst,
             double lambda) {
              std::vector<Point2> s;
              std::vector<Point2> d;
              for (auto [x, y] : src) {
                  s.push_back({x, y});
              }
              for (auto [x, y] : dst) {
                  d.push_back({x, y});
              }
              return fit_tps(s, d, lambda);
          },
          py::arg("src"), py::arg("dst"), py::arg("regularization") = 0.0);
    m.def("warp_image", [](const Array& img, const TpsWarp& w) { return to_array(warp_image(to_image(img), w)); },
          py::arg("image"), py::arg("warp"));

    py::class_<Detection>(m, "Detection")
        .def(py::init([](const BBox& b, double score, std::string label) { return Detection{b, score, label}; }),
             py::arg("bbox"), py::arg("score"), py::arg("class_label") = "person")
        .def_readwrite("bbox", &Detection::bbox)
        .def_readwrite("score", &Detection::score)
        .def_readwrite("class_label", &Detection::class_label)
        .def(py::self == py::self);

    m.def("target_confidence", &target_confidence, py::arg("detections"), py::arg("target"),
          py::arg("iou_threshold") = 0.45);

    py::class_<Oracle, std::shared_ptr<Oracle>>(m, "Oracle")
        .def("query", [](Oracle& o, const Array& img) {
            const auto image = to_image(img);
            py::gil_scoped_release release;
            return o.query(image);
        })
        .def_property_readonly("name", &Oracle::name)
        .def_property_readonly("concurrent", &Oracle::concurrent);

    m.def("monotone_oracle",
          [](const BBox& box, int ref_width, int ref_height) -> std::shared_ptr<Oracle> {
              return std::make_shared<MonotoneOracle>(SyntheticScene{box, 1, ref_width, ref_height});
          },
          py::arg("bbox"), py::arg("ref_width") = 0, py::arg("ref_height") = 0);
    m.def("rugged_oracle",
          [](const BBox& box, int dimension, std::vector<std::uint8_t> pattern, int ref_width,
             int ref_height) -> std::shared_ptr<Oracle> {
              return std::make_shared<RuggedOracle>(SyntheticScene{box, dimension, ref_width, ref_height},
                                                    std::move(pattern));
          },
          py::arg("bbox"), py::arg("dimension"), py::arg("hidden_pattern"), py::arg("ref_width") = 0,
          py::arg("ref_height") = 0);
    m.def("subprocess_oracle",
          [](std::string cmd, int timeout_ms) -> std::shared_ptr<Oracle> {
              return std::make_shared<SubprocessOracle>(std::move(cmd), std::chrono::milliseconds(timeout_ms));
          },
          py::arg("cmd"), py::arg("timeout_ms") = 30000);
    m.def("http_oracle",
          [](std::string url, int timeout_ms) -> std::shared_ptr<Oracle> {
              return std::make_shared<HttpOracle>(std::move(url), std::chrono::milliseconds(timeout_ms));
          },
          py::arg("url"), py::arg("timeout_ms") = 30000);
    m.def("callback_oracle", &callback_oracle, py::arg("fn"), py::arg("name") = "python");

    auto proto = m.def_submodule("protocol", "Adapter wire format");
    proto.attr("VERSION") = protocol::kVersion;
    proto.def("make_request", [](std::int64_t id, const Array& img) { return protocol::make_request(id, to_image(img)); },
              py::arg("id"), py::arg("image"));
    proto.def("parse_response", &protocol::parse_response, py::arg("line"), py::arg("expected_id"));

    py::class_<RunConfig>(m, "Config")
        .def(py::init([](const py::object& overrides) { return run_config_from_json(to_json(overrides)); }),
             py::arg("overrides") = py::none())
        .def_static("load",
                    [](std::optional<std::string> path, const std::map<std::string, std::string>& overrides) {
                        std::optional<std::filesystem::path> p;
                        if (path) {
                            p = *path;
                        }
                        return parse_config(p, {overrides.begin(), overrides.end()});
                    },
                    py::arg("path") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{})
        .def("to_dict", [](const RunConfig& c) { return from_json(advgrid::to_json(c)); })
        .def_static("defaults", [] { return from_json(default_config_json()); })
        .def_property_readonly("grid", [](const RunConfig& c) { return c.grid; })
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("jobs", &RunConfig::jobs);

    py::enum_<AttackStatus>(m, "AttackStatus")
        .value("Succeeded", AttackStatus::Succeeded)
        .value("Completed", AttackStatus::Completed)
        .value("BudgetExhausted", AttackStatus::BudgetExhausted)
        .value("Aborted", AttackStatus::Aborted);

    py::class_<AttackResult>(m, "AttackResult")
        .def_property_readonly("best_genome", [](const AttackResult& r) { return r.best_genome.to_string(); })
        .def_readonly("best_fit", &AttackResult::best_fit)
        .def_property_readonly("best_confidence", &AttackResult::best_confidence)
        .def_readonly("success", &AttackResult::success)
        .def_readonly("queries_used", &AttackResult::queries_used)
        .def_readonly("generations_run", &AttackResult::generations_run)
        .def_readonly("history", &AttackResult::history)
        .def_readonly("status", &AttackResult::status)
        .def_readonly("error", &AttackResult::error);

    m.def("run_attack",
          [](const Array& image, const BBox& target, const py::object& config, std::shared_ptr<Oracle> oracle) {
              const auto cfg = config_from(config);
              const Scene scene{"scene", to_image(image), target};
              const auto o = oracle_or_synthetic(cfg, scene, std::move(oracle));
              py::gil_scoped_release release;
              return run_attack(scene, *o, cfg.attack_config());
          },
          py::arg("image"), py::arg("target"), py::arg("config") = py::none(), py::arg("oracle") = nullptr);
    m.def("random_search",
          [](const Array& image, const BBox& target, std::size_t budget, const py::object& config,
             std::shared_ptr<Oracle> oracle) {
              const auto cfg = config_from(config);
              const Scene scene{"scene", to_image(image), target};
              const auto o = oracle_or_synthetic(cfg, scene, std::move(oracle));
              py::gil_scoped_release release;
              return random_search(scene, *o, cfg.attack_config(), budget);
          },
          py::arg("image"), py::arg("target"), py::arg("budget"), py::arg("config") = py::none(),
          py::arg("oracle") = nullptr);

    m.def("asr", [](const std::vector<double>& confs) { return asr(confs); }, py::arg("final_confidences"));

    m.def("evaluate",
          [](const py::sequence& scene_items, const py::object& config, std::shared_ptr<Oracle> oracle) {
              const auto cfg = config_from(config);
              const auto scenes = scenes_from(scene_items);
              const auto prov = provider(cfg, std::move(oracle));
              EvaluationReport report;
              {
                  py::gil_scoped_release release;
                  report = run_suite(scenes, prov, cfg.attack_config(), {cfg.jobs, {}});
              }
              report.config = advgrid::to_json(cfg);
              return from_json(report_to_json(report));
          },
          py::arg("scenes"), py::arg("config") = py::none(), py::arg("oracle") = nullptr,
          "Runs the attack on (id, image, bbox) scenes and returns the report as a dict.");

    m.def("read_png", [](const std::string& path) { return to_array(read_png(path)); }, py::arg("path"));
    m.def("write_png", [](const std::string& path, const Array& img) { write_png(path, to_image(img)); },
          py::arg("path"), py::arg("image"));
}
