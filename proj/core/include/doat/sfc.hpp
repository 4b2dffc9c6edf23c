#pragma once

// Mapping from delay space onto the wrapping one-dimensional ring.
//
// A position is rescaled into the unit hypercube, quantized onto a grid of
// 2^order cells per axis and ranked along a space-filling curve. The rank
// divided by the cell count is the ring coordinate in [0, 1).
//
// Locality only holds one way: cells that are close on the ring are close in
// space, but spatial neighbours can sit far apart on the ring. The Hilbert
// curve is open: its first and last cells lie in opposite corners, so the
// ring wrap joins two points a full side length apart. The Moore curve (four
// Hilbert quadrants arranged into a loop) is closed, which removes that jump;
// it is the default for two-dimensional data. Hilbert works in any dimension.

#include "doat/delay_space.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace doat {

class RingCoord {
public:
    constexpr RingCoord() = default;
    /// Throws std::invalid_argument unless 0 <= value < 1.
    explicit RingCoord(double value);

    /// Reduces any finite value into [0, 1).
    static RingCoord wrap(double value);

    constexpr double value() const noexcept { return value_; }

    friend constexpr auto operator<=>(RingCoord, RingCoord) = default;

private:
    double value_ = 0.0;
};

enum class Direction : std::uint8_t { clockwise, anticlockwise };

constexpr Direction opposite(Direction d) noexcept {
    return d == Direction::clockwise ? Direction::anticlockwise : Direction::clockwise;
}

std::string_view to_string(Direction d) noexcept;

struct UnitSquarePoint {
    std::vector<double> u;
};

enum class CurveKind : std::uint8_t { hilbert, moore };

std::string_view to_string(CurveKind kind) noexcept;
/// Throws ConfigError for unknown names.
CurveKind parse_curve_kind(std::string_view name);

struct CurveParams {
    int order = 16;
    CurveKind kind = CurveKind::moore;

    /// Throws ConfigError unless 1 <= order <= 30 and dim * order <= 64.
    void validate(std::size_t dim) const;
};

/// Affine rescale with box.min -> 0 and box.max -> 1, clamped into [0, 1].
UnitSquarePoint to_unit_square(const DelayPoint& p, const BoundingBox& box);

/// Grid cell holding `u` at the given order. Cells are half-open per axis;
/// the top edge belongs to the last cell.
std::vector<std::uint32_t> grid_cell(const UnitSquarePoint& u, int order);

/// Rank of a grid cell along the curve, in [0, 2^(dim*order)).
std::uint64_t curve_rank(std::span<const std::uint32_t> cell, const CurveParams& params);

RingCoord curve_index(const UnitSquarePoint& u, const CurveParams& params);

/// Convenience: to_unit_square followed by curve_index.
RingCoord ring_coordinate(const DelayPoint& p, const BoundingBox& box, const CurveParams& params);

/// Shortest arc between two ring positions, in [0, 0.5].
double ring_distance(RingCoord a, RingCoord b) noexcept;

/// Arc travelled clockwise (increasing values) from `from` to `to`, in [0, 1).
double clockwise_offset(RingCoord from, RingCoord to) noexcept;

/// `a` moved by `dist` in direction `dir`, wrapped into [0, 1).
RingCoord ring_target(RingCoord a, double dist, Direction dir);

}  // namespace doat
