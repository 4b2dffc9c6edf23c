#include "doat/delay_space.hpp"

#include "doat/error.hpp"
#include "doat/rng.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

namespace doat {

DelayPoint::DelayPoint(std::vector<double> coords) : coords_(std::move(coords)) {
    for (double c : coords_) {
        if (!std::isfinite(c)) {
            throw DimensionError("delay point coordinates must be finite");
        }
    }
}

BoundingBox BoundingBox::cube(std::size_t dim, double lo, double hi) {
    return BoundingBox{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
}

void BoundingBox::validate() const {
    if (min.size() != max.size() || min.empty()) {
        throw DimensionError("bounding box needs matching non-empty min/max vectors");
    }
    for (std::size_t i = 0; i < min.size(); ++i) {
        if (!(min[i] < max[i])) {
            throw DimensionError("bounding box axis " + std::to_string(i) + " is degenerate");
        }
    }
}

std::vector<DelayPoint> generate_uniform(std::size_t n, const BoundingBox& box, std::uint64_t seed) {
    if (n == 0) {
        throw Error("generate_uniform needs n >= 1");
    }
    box.validate();
    Rng rng(seed);
    std::vector<DelayPoint> points;
    points.reserve(n);
    std::vector<double> coords(box.dim());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < box.dim(); ++a) {
            coords[a] = rng.uniform(box.min[a], box.max[a]);
        }
        points.emplace_back(coords);
    }
    return points;
}

namespace {

bool parse_double(std::string_view tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

std::vector<DelayPoint> parse_coordinates(std::istream& in) {
    std::vector<DelayPoint> points;
    std::unordered_set<std::uint64_t> ids;
    std::size_t dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        std::istringstream fields(line);
        std::string tok;
        if (!(fields >> tok) || tok.front() == '#') {
            continue;
        }
        std::uint64_t id = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), id);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            throw ParseError(lineno, "bad node id '" + tok + "'");
        }
        if (!ids.insert(id).second) {
            throw ParseError(lineno, "duplicate node id " + tok);
        }
        std::vector<double> coords;
        while (fields >> tok) {
            if (tok.front() == '#') {
                break;
            }
            double v = 0;
            if (!parse_double(tok, v)) {
                throw ParseError(lineno, "bad coordinate '" + tok + "'");
            }
            coords.push_back(v);
        }
        if (coords.empty()) {
            throw ParseError(lineno, "record has no coordinates");
        }
        if (dim == 0) {
            dim = coords.size();
        } else if (coords.size() != dim) {
            throw DimensionError("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                                 " coordinates, found " + std::to_string(coords.size()));
        }
        points.emplace_back(std::move(coords));
    }
    return points;
}

std::vector<DelayPoint> load_coordinates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open coordinate file " + path.string());
    }
    return parse_coordinates(in);
}

void write_coordinates(std::ostream& out, std::span<const DelayPoint> points) {
    char buf[64];
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << i;
        for (double c : points[i].coords()) {
            auto res = std::to_chars(buf, buf + sizeof buf, c);
            out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

void write_coordinates(const std::filesystem::path& path, std::span<const DelayPoint> points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write coordinate file " + path.string());
    }
    write_coordinates(out, points);
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

double delay(const DelayPoint& a, const DelayPoint& b) {
    if (a.dim() != b.dim()) {
        throw DimensionError("delay between points of dimension " + std::to_string(a.dim()) + " and " +
                             std::to_string(b.dim()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double average_pairwise_delay(std::span<const DelayPoint> points) {
    if (points.size() < 2) {
        throw Error("average_pairwise_delay needs at least two points");
    }
    // Row sums keep the accumulation well conditioned for large n.
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double row = 0.0;
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            row += delay(points[i], points[j]);
        }
        total += row;
    }
    const double pairs = 0.5 * static_cast<double>(points.size()) * static_cast<double>(points.size() - 1);
    return total / pairs;
}

}  // namespace doat
