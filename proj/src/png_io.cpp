#include "advgrid/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "advgrid/errors.hpp"

namespace advgrid {
namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.width() <= 0 || img.height() <= 0) {
        throw IoError("cannot encode an empty image");
    }
    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(img.width());
    desc.height = static_cast<png_uint_32>(img.height());
    desc.format = PNG_FORMAT_GRAY;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&desc, nullptr, &size, 0, img.pixels().data(), 0, nullptr)) {
        throw IoError(std::string("png encode: ") + desc.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&desc, out.data(), &size, 0, img.pixels().data(), 0, nullptr)) {
        throw IoError(std::string("png encode: ") + desc.message);
    }
    out.resize(size);
    return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
        throw IoError(std::string("png decode: ") + desc.message);
    }
    desc.format = PNG_FORMAT_GRAY;
    Image img(static_cast<int>(desc.width), static_cast<int>(desc.height));
    if (!png_image_finish_read(&desc, nullptr, img.pixels().data(), 0, nullptr)) {
        png_image_free(&desc);
        throw IoError(std::string("png decode: ") + desc.message);
    }
    return img;
}

Image read_png(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    try {
        return decode_png(bytes);
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_png(const std::filesystem::path& path, const Image& img) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint8_t head[24];
    if (!in.read(reinterpret_cast<char*>(head), sizeof head) || png_sig_cmp(head, 0, 8) != 0) {
        throw IoError(path.string() + ": not a PNG file");
    }
    // IHDR is always the first chunk; width and height are big-endian at 16..23.
    auto be32 = [&](int off) {
        return (static_cast<std::uint32_t>(head[off]) << 24) |
               (static_cast<std::uint32_t>(head[off + 1]) << 16) |
               (static_cast<std::uint32_t>(head[off + 2]) << 8) |
               static_cast<std::uint32_t>(head[off + 3]);
    };
    return {static_cast<int>(be32(16)), static_cast<int>(be32(20))};
}

} // namespace advgrid
