#pragma once

// Scenario files.
//
// Line-oriented `key = value` pairs grouped under `[section]` headers;
// `#` and `;` start comments. Unknown sections and keys are errors, and
// every value not given keeps the Scenario default. Lists are comma
// separated; seed lists also accept ranges such as `1..10`.
//
//   [run]      id, seed, mode (synchronous|asynchronous)
//   [dataset]  path | n, min, max, dim
//   [members]  density, groups, inter_arrival_ms, query_fraction
//   [overlay]  curve (moore|hilbert), curve_order, bloom_m, bloom_k,
//              distance_classes, update_interval, query_ttl,
//              track_exact_sets, max_time_ms
//   [offsets]  offsets_ms, recompute_d
//   [sweep]    nodes, densities, update_intervals, seeds
//   [output]   results, aggregate, trace
//
// Relative paths are resolved against the directory holding the file.

#include "doat/experiments.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace doat {

struct SweepAxes {
    std::vector<std::size_t> nodes;
    std::vector<double> densities;
    std::vector<double> update_intervals;
    std::vector<std::uint64_t> seeds;
};

struct Config {
    Scenario scenario;
    /// Set when the file has a [sweep] section.
    std::optional<SweepAxes> sweep;
    std::string results_path;
    std::string aggregate_path;
    std::string trace_path;
};

/// Throws ConfigError (with the line number) on any problem, including
/// values that fail Scenario::validate.
Config parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
Config load_config(const std::filesystem::path& path);

/// The scenario list of a sweep in a fixed order: nodes, then densities,
/// then intervals, then seeds, each axis in file order. Without a [sweep]
/// section this is the single configured scenario.
std::vector<Scenario> expand_sweep(const Config& c);

/// Runs every scenario, sharing one overlay build among scenarios with the
/// same overlay_key. Up to `jobs` builds proceed in parallel; the result
/// order matches `scenarios` whatever the job count.
std::vector<RunMetrics> run_all(const std::vector<Scenario>& scenarios, unsigned jobs, const RunOptions& opt = {});

}  // namespace doat
