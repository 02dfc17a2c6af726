#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "advgrid/image.hpp"
#include "advgrid/rng.hpp"

namespace advgrid {

/// Location of the block's top-left corner inside the admissible placement
/// region of the target box, as fractions in [0, 1].
struct Anchor {
    double u = 0.0;
    double v = 0.0;
    friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// The physical grid: a square block of D x D connected cells, each opaque or
/// transparent, painted in one grayscale colour.
struct GridSpec {
    int dimension = 8;
    double width_ratio = 0.2;
    Anchor anchor{};
    std::vector<std::uint8_t> cells; // D*D entries, 1 = opaque
    std::uint8_t color = 0;

    /// Throws ConfigError if any invariant is broken.
    void validate() const;
    std::size_t opaque_count() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Bit layout: [u (anchor_bits)] ++ [v (anchor_bits)] ++ [cells (D*D)], MSB first.
struct GenomeLayout {
    int dimension = 8;
    int anchor_bits = 8;

    std::size_t length() const {
        return 2 * static_cast<std::size_t>(anchor_bits) +
               static_cast<std::size_t>(dimension) * static_cast<std::size_t>(dimension);
    }
    std::size_t cell_offset() const { return 2 * static_cast<std::size_t>(anchor_bits); }
    void validate() const;
};

struct Genome {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    std::string to_string() const;
    static Genome from_string(std::string_view text);

    friend bool operator==(const Genome&, const Genome&) = default;
};

std::size_t hamming_distance(const Genome& a, const Genome& b);

/// Round-half-up quantisation of a fraction onto 2^bits - 1 levels.
std::uint32_t quantize_anchor(double fraction, int bits);

Genome encode_genome(const GridSpec& spec, int anchor_bits);

/// Parameters a genome does not carry. When anchor_bits is zero the anchor is
/// taken from fixed_anchor.
struct GridSettings {
    int dimension = 8;
    double width_ratio = 0.2;
    std::uint8_t color = 0;
    int anchor_bits = 8;
    Anchor fixed_anchor{};

    GenomeLayout layout() const { return {dimension, anchor_bits}; }
};

GridSpec decode_genome(const Genome& genome, const GridSettings& settings);

/// Convenience overload with default width/colour settings.
GridSpec decode_genome(const Genome& genome, int dimension, int anchor_bits);

struct BlockGeometry {
    BBox block;
    std::vector<BBox> cells; // row-major, D*D
};

/// Places the block inside the target box. Throws GeometryError if a cell
/// would be narrower than one pixel.
BlockGeometry grid_geometry(const GridSpec& spec, const BBox& target);

Genome random_genome(std::size_t length, Rng& rng);

} // namespace advgrid
