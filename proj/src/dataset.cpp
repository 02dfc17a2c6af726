#include "advgrid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "advgrid/errors.hpp"
#include "advgrid/png_io.hpp"

namespace advgrid {

BBox denormalize_box(double cx, double cy, double w, double h, int width, int height) {
    const auto x0 = std::clamp(static_cast<int>(std::lround((cx - w / 2.0) * width)), 0, width);
    const auto y0 = std::clamp(static_cast<int>(std::lround((cy - h / 2.0) * height)), 0, height);
    const auto x1 = std::clamp(static_cast<int>(std::lround((cx + w / 2.0) * width)), 0, width);
    const auto y1 = std::clamp(static_cast<int>(std::lround((cy + h / 2.0) * height)), 0, height);
    return {x0, y0, x1 - x0, y1 - y0};
}

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

} // namespace

BBox read_annotation(const std::filesystem::path& txt, int width, int height) {
    std::ifstream in(txt);
    if (!in) {
        throw IoError("cannot open " + txt.string());
    }
    BBox best;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::istringstream ls(line);
        int cls = 0;
        double cx = 0, cy = 0, w = 0, h = 0;
        std::string extra;
        if (!(ls >> cls >> cx >> cy >> w >> h) || (ls >> extra)) {
            throw ConfigError(txt.string() + ":" + std::to_string(lineno) +
                              ": expected 'class cx cy w h', got '" + line + "'");
        }
        if (!(w > 0 && h > 0 && cx >= 0 && cx <= 1 && cy >= 0 && cy <= 1 && w <= 1 && h <= 1)) {
            throw ConfigError(txt.string() + ":" + std::to_string(lineno) +
                              ": normalised box values must lie in [0, 1] with positive size");
        }
        if (cls != 0) {
            continue;
        }
        const auto box = denormalize_box(cx, cy, w, h, width, height);
        if (box.valid() && (!best.valid() || box.h > best.h)) {
            best = box;
        }
    }
    return best;
}

std::vector<DatasetSample> ingest_dataset(const std::filesystem::path& dir, int min_height,
                                          const WarningSink& warn) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError(dir.string() + " is not a directory");
    }
    std::vector<DatasetSample> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || lowercase(entry.path().extension().string()) != ".png") {
            continue;
        }
        const auto& image = entry.path();
        auto txt = image;
        txt.replace_extension(".txt");
        if (!std::filesystem::exists(txt)) {
            if (warn) {
                warn("skipping " + image.filename().string() + ": no annotation " +
                     txt.filename().string());
            }
            continue;
        }
        const auto [width, height] = png_dimensions(image);
        const auto target = read_annotation(txt, width, height);
        if (!target.valid()) {
            if (warn) {
                warn("skipping " + image.filename().string() + ": no person box");
            }
            continue;
        }
        if (target.h < min_height) {
            continue;
        }
        out.push_back({image.stem().string(), image, target});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

Scene load_scene(const DatasetSample& sample) {
    Scene scene{sample.id, read_png(sample.image_path), sample.target};
    if (!scene.target.inside(scene.image.width(), scene.image.height())) {
        throw ConfigError(sample.id + ": target box lies outside the image");
    }
    return scene;
}

} // namespace advgrid
