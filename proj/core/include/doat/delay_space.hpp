#pragma once

// Delay space: node positions in a low-dimensional Euclidean space where
// distance is one-way latency in milliseconds.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <vector>

namespace doat {

class DelayPoint {
public:
    DelayPoint() = default;
    explicit DelayPoint(std::vector<double> coords);
    DelayPoint(std::initializer_list<double> coords) : DelayPoint(std::vector<double>(coords)) {}

    std::size_t dim() const noexcept { return coords_.size(); }
    double operator[](std::size_t axis) const { return coords_[axis]; }
    std::span<const double> coords() const noexcept { return coords_; }

    friend bool operator==(const DelayPoint&, const DelayPoint&) = default;

private:
    std::vector<double> coords_;
};

struct BoundingBox {
    std::vector<double> min;
    std::vector<double> max;

    /// A box with the same [lo, hi] range on every axis.
    static BoundingBox cube(std::size_t dim, double lo, double hi);

    std::size_t dim() const noexcept { return min.size(); }
    /// Throws DimensionError unless min < max on every axis.
    void validate() const;
};

/// `n` points drawn independently and uniformly per axis from `box`.
std::vector<DelayPoint> generate_uniform(std::size_t n, const BoundingBox& box, std::uint64_t seed);

/// Coordinate file: one `<id> <x1> ... <xd>` record per line, `#` comments.
/// Records are returned in file order; ids must be unique.
std::vector<DelayPoint> load_coordinates(const std::filesystem::path& path);
std::vector<DelayPoint> parse_coordinates(std::istream& in);

void write_coordinates(std::ostream& out, std::span<const DelayPoint> points);
void write_coordinates(const std::filesystem::path& path, std::span<const DelayPoint> points);

/// Euclidean distance. Throws DimensionError on mismatched dimensions.
double delay(const DelayPoint& a, const DelayPoint& b);

/// Mean delay over all unordered distinct pairs. Needs at least two points.
double average_pairwise_delay(std::span<const DelayPoint> points);

}  // namespace doat
