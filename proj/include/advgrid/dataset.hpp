#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "advgrid/image.hpp"
#include "advgrid/optimizer.hpp"

namespace advgrid {

struct DatasetSample {
    std::string id;
    std::filesystem::path image_path;
    BBox target;
};

/// Converts one normalised "cx cy w h" box to pixels, clamped to the image.
BBox denormalize_box(double cx, double cy, double w, double h, int width, int height);

/// Tallest class-0 box of a "class cx cy w h" annotation file, in pixels of a
/// width x height image. Invalid (empty) box when the file holds no person.
BBox read_annotation(const std::filesystem::path& txt, int width, int height);

using WarningSink = std::function<void(const std::string&)>;

/// Scans `dir` for PNG images with sibling same-stem .txt annotations
/// ("class cx cy w h" per line, normalised). The tallest class-0 box becomes
/// the target; targets shorter than min_height are dropped. Sorted by id.
/// Missing annotations are skipped with a warning; malformed lines throw
/// ConfigError naming the file and line.
std::vector<DatasetSample> ingest_dataset(const std::filesystem::path& dir, int min_height = 120,
                                          const WarningSink& warn = {});

Scene load_scene(const DatasetSample& sample);

} // namespace advgrid
