#include "advgrid/grid.hpp"

#include <algorithm>
#include <cmath>

#include "advgrid/errors.hpp"

namespace advgrid {
namespace {

constexpr int kMaxAnchorBits = 24;

std::uint32_t anchor_levels(int bits) { return (std::uint32_t{1} << bits) - 1; }

void write_bits(std::vector<std::uint8_t>& out, std::uint32_t value, int bits) {
    for (int b = bits - 1; b >= 0; --b) {
        out.push_back(static_cast<std::uint8_t>((value >> b) & 1U));
    }
}

std::uint32_t read_bits(const std::vector<std::uint8_t>& in, std::size_t offset, int bits) {
    std::uint32_t value = 0;
    for (int b = 0; b < bits; ++b) {
        value = (value << 1) | (in[offset + static_cast<std::size_t>(b)] & 1U);
    }
    return value;
}

} // namespace

void GridSpec::validate() const {
    if (dimension < 1) {
        throw ConfigError("grid dimension must be >= 1");
    }
    if (!(width_ratio > 0.0 && width_ratio <= 1.0)) {
        throw ConfigError("grid width_ratio must lie in (0, 1]");
    }
    if (!(anchor.u >= 0.0 && anchor.u <= 1.0 && anchor.v >= 0.0 && anchor.v <= 1.0)) {
        throw ConfigError("grid anchor must lie in [0, 1]^2");
    }
    const auto expected = static_cast<std::size_t>(dimension) * static_cast<std::size_t>(dimension);
    if (cells.size() != expected) {
        throw ConfigError("grid must have D*D = " + std::to_string(expected) + " cells, got " +
                          std::to_string(cells.size()));
    }
    if (std::any_of(cells.begin(), cells.end(), [](std::uint8_t c) { return c > 1; })) {
        throw ConfigError("grid cells must be 0 or 1");
    }
}

std::size_t GridSpec::opaque_count() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

void GenomeLayout::validate() const {
    if (dimension < 1) {
        throw ConfigError("grid dimension must be >= 1");
    }
    if (anchor_bits < 0 || anchor_bits > kMaxAnchorBits) {
        throw ConfigError("anchor_bits must lie in [0, " + std::to_string(kMaxAnchorBits) + "]");
    }
}

std::string Genome::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

Genome Genome::from_string(std::string_view text) {
    Genome g;
    g.bits.reserve(text.size());
    for (char c : text) {
        if (c == '0' || c == '1') {
            g.bits.push_back(static_cast<std::uint8_t>(c - '0'));
        } else if (c != ' ' && c != '\n' && c != '\r' && c != '\t') {
            throw ConfigError(std::string("genome text may only contain 0/1, found '") + c + "'");
        }
    }
    return g;
}

std::size_t hamming_distance(const Genome& a, const Genome& b) {
    if (a.size() != b.size()) {
        throw ConfigError("hamming distance of genomes with different lengths");
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a.bits[i] != b.bits[i] ? 1 : 0;
    }
    return d;
}

std::uint32_t quantize_anchor(double fraction, int bits) {
    if (bits == 0) {
        return 0;
    }
    const auto levels = anchor_levels(bits);
    const double scaled = std::floor(std::clamp(fraction, 0.0, 1.0) * levels + 0.5);
    return std::min(static_cast<std::uint32_t>(scaled), levels);
}

Genome encode_genome(const GridSpec& spec, int anchor_bits) {
    spec.validate();
    GenomeLayout{spec.dimension, anchor_bits}.validate();
    Genome g;
    g.bits.reserve(GenomeLayout{spec.dimension, anchor_bits}.length());
    write_bits(g.bits, quantize_anchor(spec.anchor.u, anchor_bits), anchor_bits);
    write_bits(g.bits, quantize_anchor(spec.anchor.v, anchor_bits), anchor_bits);
    g.bits.insert(g.bits.end(), spec.cells.begin(), spec.cells.end());
    return g;
}

GridSpec decode_genome(const Genome& genome, const GridSettings& settings) {
    const auto layout = settings.layout();
    layout.validate();
    if (genome.size() != layout.length()) {
        throw ConfigError("genome has " + std::to_string(genome.size()) + " bits, layout needs " +
                          std::to_string(layout.length()));
    }
    GridSpec spec;
    spec.dimension = settings.dimension;
    spec.width_ratio = settings.width_ratio;
    spec.color = settings.color;
    if (settings.anchor_bits == 0) {
        spec.anchor = settings.fixed_anchor;
    } else {
        const double levels = anchor_levels(settings.anchor_bits);
        const auto b = static_cast<std::size_t>(settings.anchor_bits);
        spec.anchor.u = read_bits(genome.bits, 0, settings.anchor_bits) / levels;
        spec.anchor.v = read_bits(genome.bits, b, settings.anchor_bits) / levels;
    }
    const auto first = genome.bits.begin() + static_cast<std::ptrdiff_t>(layout.cell_offset());
    spec.cells.reserve(genome.size() - layout.cell_offset());
    std::transform(first, genome.bits.end(), std::back_inserter(spec.cells),
                   [](std::uint8_t b) { return static_cast<std::uint8_t>(b & 1U); });
    return spec;
}

GridSpec decode_genome(const Genome& genome, int dimension, int anchor_bits) {
    GridSettings settings;
    settings.dimension = dimension;
    settings.anchor_bits = anchor_bits;
    return decode_genome(genome, settings);
}

BlockGeometry grid_geometry(const GridSpec& spec, const BBox& target) {
    spec.validate();
    if (!target.valid()) {
        throw GeometryError("target box must have positive extent");
    }
    // Square block, side a fraction of the box height; narrow boxes clamp it.
    int side = static_cast<int>(std::lround(spec.width_ratio * target.h));
    side = std::min({side, target.w, target.h});
    if (side < spec.dimension) {
        throw GeometryError("block side " + std::to_string(side) + " px cannot hold " +
                            std::to_string(spec.dimension) + " cells of at least 1 px");
    }
    const int slack_x = target.w - side;
    const int slack_y = target.h - side;
    const int dx = std::clamp(static_cast<int>(std::lround(spec.anchor.u * slack_x)), 0, slack_x);
    const int dy = std::clamp(static_cast<int>(std::lround(spec.anchor.v * slack_y)), 0, slack_y);

    BlockGeometry geo;
    geo.block = {target.x + dx, target.y + dy, side, side};
    const int d = spec.dimension;
    geo.cells.reserve(static_cast<std::size_t>(d) * static_cast<std::size_t>(d));
    for (int r = 0; r < d; ++r) {
        const int y0 = r * side / d;
        const int y1 = (r + 1) * side / d;
        for (int c = 0; c < d; ++c) {
            const int x0 = c * side / d;
            const int x1 = (c + 1) * side / d;
            geo.cells.push_back({geo.block.x + x0, geo.block.y + y0, x1 - x0, y1 - y0});
        }
    }
    return geo;
}

Genome random_genome(std::size_t length, Rng& rng) {
    if (length == 0) {
        throw ConfigError("genome length must be positive");
    }
    Genome g;
    g.bits.resize(length);
    for (auto& b : g.bits) {
        b = random_bit(rng) ? 1 : 0;
    }
    return g;
}

} // namespace advgrid
