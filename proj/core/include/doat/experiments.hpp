#pragma once

// Evaluation scenarios: synchronous and asynchronous member registration,
// update throttling and coordinate-offset sensitivity, measured against
// brute-force oracles.
//
// Members are hosts that share a position with a randomly chosen DOAT node
// and register with that node. Every query starts at a DOAT node. For each
// query:
//   query_time  sum of the link delays along the forwarding path
//   R           delay from the origin to the member the overlay returned
//   C           delay from the origin to the closest registered member
//   error       (R - C) / D, D being the mean pairwise delay of the dataset

#include "doat/bloom.hpp"
#include "doat/delay_space.hpp"
#include "doat/overlay.hpp"
#include "doat/sfc.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace doat {

enum class Mode : std::uint8_t { synchronous, asynchronous };

std::string_view to_string(Mode m) noexcept;
/// Throws ConfigError for anything but "synchronous" / "asynchronous".
Mode parse_mode(std::string_view name);

struct DatasetSpec {
    /// When set, coordinates are read from this file and `n`/`box` only
    /// describe the generated alternative.
    std::string path;
    std::size_t n = 1000;
    BoundingBox box = BoundingBox::cube(2, -100.0, 100.0);
};

struct Scenario {
    std::string id = "run";
    DatasetSpec dataset;
    /// Fraction of DOAT nodes that host a member, in (0, 1].
    double density = 0.1;
    Mode mode = Mode::synchronous;
    /// Throttle interval as a multiple of the member inter-arrival time.
    double update_interval = 0.0;
    double inter_arrival_ms = 1000.0;
    /// Fraction of nodes querying after each arrival (asynchronous mode).
    double query_fraction = 0.1;
    BloomParams bloom;
    CurveParams curve;
    bool distance_classes = true;
    std::size_t groups = 1;
    /// Mean coordinate offsets for sensitivity runs, in ms.
    std::vector<double> offsets;
    /// Recompute D on perturbed positions (otherwise keep the original D).
    bool offset_recompute_d = true;
    std::uint32_t query_ttl = 64;
    /// Maintain exact group sets beside every filter to detect false
    /// positives; costs memory and time.
    bool track_exact_sets = false;
    double max_time_ms = 1e7;
    std::uint64_t seed = 1;

    /// Throws ConfigError describing the first invalid field.
    void validate() const;
    /// Number of members per group for `n` nodes.
    std::size_t members_per_group(std::size_t n) const;
};

struct QueryMetric {
    std::uint32_t origin = 0;
    std::string group;
    double offset_ms = 0.0;
    std::uint32_t hops = 0;
    double query_time = 0.0;
    double R = 0.0;
    double C = 0.0;
    double error = 0.0;
    bool success = false;

    friend bool operator==(const QueryMetric&, const QueryMetric&) = default;
};

struct RunMetrics {
    std::string scenario_id;
    std::uint64_t seed = 0;
    std::size_t n_nodes = 0;
    double density_pct = 0.0;
    Mode mode = Mode::synchronous;
    double update_interval = 0.0;
    std::vector<QueryMetric> queries;
    std::size_t members = 0;
    std::uint64_t route_updates = 0;
    /// Route updates per node per registered member.
    double overhead = 0.0;
    /// Mean pairwise delay of the unperturbed dataset.
    double D = 0.0;
    /// Every default and seed the run depended on, as text.
    std::map<std::string, std::string> metadata;

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct Summary {
    std::size_t queries = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double mean_error = 0.0;
    double mean_query_time = 0.0;
    double mean_hops = 0.0;
    /// Mean of query_time / hops over queries with at least one hop.
    double mean_hop_delay = 0.0;
};

/// Means over successful queries; when `offset` is given only queries with
/// that offset count.
Summary summarize(const RunMetrics& m, std::optional<double> offset = std::nullopt);

struct Member {
    std::uint64_t id = 0;
    std::string group;
    std::uint32_t node = 0;
    double arrival = 0.0;
};

/// Exhaustive scan for the member of `group` nearest to `origin` among
/// `members` (positions looked up by node serial). Ties go to the lowest
/// member id. Throws Error when the group has no member.
std::pair<const Member*, double> oracle_closest_member(const DelayPoint& origin, const std::string& group,
                                                        std::span<const Member> members,
                                                        std::span<const DelayPoint> positions);

/// (R - C) / D. Throws Error unless D > 0.
double accuracy_error(double R, double C, double D);

/// Dataset and overlay shared by every run with the same dataset, seed and
/// overlay parameters. Built once, copied per run.
struct PreparedOverlay {
    std::vector<DelayPoint> positions;
    double D = 0.0;
    std::unique_ptr<Overlay> overlay;
    std::string key;
};

struct RunOptions {
    /// Message trace sink; also receives the build phase when preparing.
    std::ostream* trace = nullptr;
    /// Check every routing table after each settle phase.
    bool check_invariants = true;
};

std::vector<DelayPoint> load_dataset(const Scenario& s);
/// Runs whose scenarios share this key can share one prepared overlay.
std::string overlay_key(const Scenario& s);
PreparedOverlay prepare_overlay(const Scenario& s, const RunOptions& opt = {});

RunMetrics run_synchronous(const Scenario& s, const RunOptions& opt = {});
RunMetrics run_synchronous(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt = {});

RunMetrics run_asynchronous(const Scenario& s, const RunOptions& opt = {});
RunMetrics run_asynchronous(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt = {});

/// One synchronous registration, then for each offset: move every host by
/// a random displacement of mean length `offset`, query from all nodes over
/// the stale overlay and record the errors. Requires two-dimensional data.
RunMetrics run_offset_sweep(const Scenario& s, const RunOptions& opt = {});
RunMetrics run_offset_sweep(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt = {});

/// Dispatches on the scenario: offset sweep when offsets are given,
/// otherwise by mode.
RunMetrics run_scenario(const Scenario& s, const RunOptions& opt = {});

/// Displacement law for offset runs: direction uniform on the circle,
/// length uniform on [0.5, 1.5] times `offset`. The same `seed` gives the
/// same directions and relative lengths for every offset.
std::vector<DelayPoint> perturb(std::span<const DelayPoint> positions, double offset, std::uint64_t seed);

/// Counts routing entries whose filter matches a group that the exact
/// shadow sets say is absent (requires track_exact_sets).
std::size_t count_false_positive_entries(const Overlay& ov, std::span<const std::string> groups);

}  // namespace doat
