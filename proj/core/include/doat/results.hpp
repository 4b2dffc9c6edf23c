#pragma once

// Result tables.
//
// Per-query CSV: comment lines `# key = value` carry the run metadata, then
// one header row and one row per query. Numbers are written in shortest
// round-trip form, so reading a file back reproduces the metrics exactly.
//
// Aggregated CSV: one row per sweep point with the mean and standard
// deviation of the per-run means across seeds.

#include "doat/experiments.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace doat {

inline constexpr const char* kResultColumns =
    "scenario_id,seed,n_nodes,density_pct,mode,update_interval,offset_ms,query_origin,group,hops,query_time_ms,R_ms,"
    "C_ms,error,success";

void write_results(std::ostream& out, const RunMetrics& m);
void write_results(const std::filesystem::path& path, const RunMetrics& m);

/// Parses one run's CSV. Throws ParseError on malformed input.
RunMetrics read_results(std::istream& in);
RunMetrics read_results(const std::filesystem::path& path);

struct AggregateRow {
    std::string scenario_id;
    std::size_t n_nodes = 0;
    double density_pct = 0.0;
    std::string mode;
    double update_interval = 0.0;
    double offset_ms = 0.0;
    std::size_t runs = 0;
    std::size_t queries = 0;
    double success_rate = 0.0;
    double mean_error = 0.0;
    double sd_error = 0.0;
    double mean_query_time = 0.0;
    double sd_query_time = 0.0;
    double mean_hops = 0.0;
    double sd_hops = 0.0;
    double mean_hop_delay = 0.0;
    double mean_overhead = 0.0;
    double sd_overhead = 0.0;
    double mean_D = 0.0;
};

inline constexpr const char* kAggregateColumns =
    "scenario_id,n_nodes,density_pct,mode,update_interval,offset_ms,runs,queries,success_rate,mean_error,sd_error,"
    "mean_query_time_ms,sd_query_time_ms,mean_hops,sd_hops,mean_hop_delay_ms,mean_overhead,sd_overhead,mean_D_ms";

/// Groups runs by sweep point (scenario id, nodes, density, mode, interval,
/// offset). Rows come out sorted by that key and each group is reduced in
/// seed order, so the result does not depend on the order of `runs`.
std::vector<AggregateRow> aggregate(std::span<const RunMetrics> runs);

void write_aggregate(std::ostream& out, std::span<const AggregateRow> rows);
void write_aggregate(const std::filesystem::path& path, std::span<const AggregateRow> rows);

}  // namespace doat
