#include "doat/sfc.hpp"

#include "doat/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace doat {

RingCoord::RingCoord(double value) : value_(value) {
    if (!(value >= 0.0 && value < 1.0)) {
        throw std::invalid_argument("ring coordinate out of [0,1): " + std::to_string(value));
    }
}

RingCoord RingCoord::wrap(double value) {
    double v = value - std::floor(value);
    if (v >= 1.0) {
        v = 0.0;
    }
    return RingCoord(v);
}

std::string_view to_string(Direction d) noexcept {
    return d == Direction::clockwise ? "cw" : "acw";
}

std::string_view to_string(CurveKind kind) noexcept {
    switch (kind) {
    case CurveKind::hilbert:
        return "hilbert";
    case CurveKind::moore:
        return "moore";
    }
    return "?";
}

CurveKind parse_curve_kind(std::string_view name) {
    if (name == "hilbert") {
        return CurveKind::hilbert;
    }
    if (name == "moore") {
        return CurveKind::moore;
    }
    throw ConfigError("unknown curve kind '" + std::string(name) + "'");
}

void CurveParams::validate(std::size_t dim) const {
    if (order < 1 || order > 30) {
        throw ConfigError("curve order must be in [1, 30], got " + std::to_string(order));
    }
    if (kind == CurveKind::moore && dim != 2) {
        throw ConfigError("the moore curve is only defined for two dimensions; use hilbert for " + std::to_string(dim) + "-dimensional data");
    }
    if (dim == 0 || dim * static_cast<std::size_t>(order) > 64) {
        throw ConfigError("curve index for dimension " + std::to_string(dim) + " at order " +
                          std::to_string(order) + " does not fit in 64 bits");
    }
}

UnitSquarePoint to_unit_square(const DelayPoint& p, const BoundingBox& box) {
    if (p.dim() != box.dim()) {
        throw DimensionError("point dimension " + std::to_string(p.dim()) + " does not match box dimension " +
                             std::to_string(box.dim()));
    }
    box.validate();
    UnitSquarePoint out;
    out.u.resize(p.dim());
    for (std::size_t i = 0; i < p.dim(); ++i) {
        const double t = (p[i] - box.min[i]) / (box.max[i] - box.min[i]);
        out.u[i] = std::clamp(t, 0.0, 1.0);
    }
    return out;
}

std::vector<std::uint32_t> grid_cell(const UnitSquarePoint& u, int order) {
    const double side = std::ldexp(1.0, order);
    const auto last = static_cast<std::uint32_t>(side) - 1;
    std::vector<std::uint32_t> cell(u.u.size());
    for (std::size_t i = 0; i < u.u.size(); ++i) {
        const double scaled = std::floor(std::clamp(u.u[i], 0.0, 1.0) * side);
        cell[i] = std::min(static_cast<std::uint32_t>(scaled), last);
    }
    return cell;
}

namespace {

// Skilling's transform ("Programming the Hilbert curve", AIP Conf. Proc. 707,
// 2004): converts axes to the transposed Hilbert index in place.
void axes_to_transpose(std::span<std::uint32_t> x, int bits) {
    const std::size_t n = x.size();
    const std::uint32_t m = 1u << (bits - 1);
    for (std::uint32_t q = m; q > 1; q >>= 1) {
        const std::uint32_t p = q - 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] & q) {
                x[0] ^= p;
            } else {
                const std::uint32_t t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
    }
    for (std::size_t i = 1; i < n; ++i) {
        x[i] ^= x[i - 1];
    }
    std::uint32_t t = 0;
    for (std::uint32_t q = m; q > 1; q >>= 1) {
        if (x[n - 1] & q) {
            t ^= q - 1;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        x[i] ^= t;
    }
}

std::uint64_t hilbert_rank(std::span<const std::uint32_t> cell, int order) {
    std::vector<std::uint32_t> x(cell.begin(), cell.end());
    axes_to_transpose(x, order);
    std::uint64_t rank = 0;
    for (int b = order - 1; b >= 0; --b) {
        for (std::uint32_t xi : x) {
            rank = (rank << 1) | ((xi >> b) & 1u);
        }
    }
    return rank;
}

// Rank on the 2-D Hilbert curve of side n that enters at (0,0) and leaves
// at (n-1,0).
std::uint64_t hilbert_rank_2d(std::uint64_t n, std::uint64_t x, std::uint64_t y) {
    std::uint64_t d = 0;
    for (std::uint64_t s = n / 2; s > 0; s /= 2) {
        const std::uint64_t rx = (x & s) ? 1 : 0;
        const std::uint64_t ry = (y & s) ? 1 : 0;
        d += s * s * ((3 * rx) ^ ry);
        if (ry == 0) {
            if (rx == 1) {
                x = n - 1 - x;
                y = n - 1 - y;
            }
            std::swap(x, y);
        }
    }
    return d;
}

// Moore curve: four Hilbert curves of half the side, visited bottom-left,
// top-left, top-right, bottom-right. It starts at (h-1, 0) and ends next to
// it at (h, 0), so the ring wrap joins two adjacent cells.
std::uint64_t moore_rank(std::uint64_t x, std::uint64_t y, int order) {
    const std::uint64_t h = std::uint64_t{1} << (order - 1);
    std::uint64_t quadrant = 0;
    std::uint64_t lx = 0;
    std::uint64_t ly = 0;
    if (x < h && y < h) {
        quadrant = 0;  // local (lx, ly) -> (h-1-ly, lx)
        lx = y;
        ly = h - 1 - x;
    } else if (x < h) {
        quadrant = 1;  // local (lx, ly) -> (h-1-ly, lx+h)
        lx = y - h;
        ly = h - 1 - x;
    } else if (y >= h) {
        quadrant = 2;  // local (lx, ly) -> (h+ly, 2h-1-lx)
        lx = 2 * h - 1 - y;
        ly = x - h;
    } else {
        quadrant = 3;  // local (lx, ly) -> (h+ly, h-1-lx)
        lx = h - 1 - y;
        ly = x - h;
    }
    return quadrant * h * h + hilbert_rank_2d(h, lx, ly);
}

}  // namespace

std::uint64_t curve_rank(std::span<const std::uint32_t> cell, const CurveParams& params) {
    params.validate(cell.size());
    const std::uint64_t limit = std::uint64_t{1} << params.order;
    for (std::uint32_t c : cell) {
        if (c >= limit) {
            throw std::out_of_range("grid cell outside curve order");
        }
    }
    switch (params.kind) {
    case CurveKind::hilbert:
        return hilbert_rank(cell, params.order);
    case CurveKind::moore:
        return moore_rank(cell[0], cell[1], params.order);
    }
    throw ConfigError("unsupported curve kind");
}

RingCoord curve_index(const UnitSquarePoint& u, const CurveParams& params) {
    params.validate(u.u.size());
    const auto cell = grid_cell(u, params.order);
    const std::uint64_t rank = curve_rank(cell, params);
    const int bits = static_cast<int>(u.u.size()) * params.order;
    double v = std::ldexp(static_cast<double>(rank), -bits);
    if (v >= 1.0) {
        v = std::nextafter(1.0, 0.0);  // only reachable when bits > 53
    }
    return RingCoord(v);
}

RingCoord ring_coordinate(const DelayPoint& p, const BoundingBox& box, const CurveParams& params) {
    return curve_index(to_unit_square(p, box), params);
}

double ring_distance(RingCoord a, RingCoord b) noexcept {
    const double d = std::fabs(a.value() - b.value());
    return std::min(d, 1.0 - d);
}

double clockwise_offset(RingCoord from, RingCoord to) noexcept {
    double d = to.value() - from.value();
    if (d < 0.0) {
        d += 1.0;
    }
    return d;
}

RingCoord ring_target(RingCoord a, double dist, Direction dir) {
    if (!(dist > 0.0 && dist <= 0.5)) {
        throw std::invalid_argument("ring_target distance must be in (0, 0.5]");
    }
    return RingCoord::wrap(dir == Direction::clockwise ? a.value() + dist : a.value() - dist);
}

}  // namespace doat
