// doat: dataset generation, scenario runs, sweeps and trace inspection.
//
// Exit codes: 0 success, 1 usage, 2 configuration or input error,
// 3 run did not settle, 4 internal invariant breach.

#include "doat/config.hpp"
#include "doat/delay_space.hpp"
#include "doat/error.hpp"
#include "doat/experiments.hpp"
#include "doat/results.hpp"
#include "doat/sim.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kConfig = 2, kNonQuiescent = 3, kInvariant = 4 };

struct GenerateArgs {
    std::size_t n = 0;
    double min = -100.0;
    double max = 100.0;
    std::size_t dim = 2;
    std::uint64_t seed = 1;
    std::string out;
};

struct RunArgs {
    std::string config;
    std::string out;
    std::string trace;
    std::optional<std::uint64_t> seed;
};

struct SweepArgs {
    std::string config;
    std::string out;
    std::string results;
    unsigned jobs = 1;
};

void print_summary(std::ostream& os, const doat::RunMetrics& m) {
    const auto emit = [&](const doat::Summary& s, const std::string& label) {
        os << m.scenario_id << label << ": n=" << m.n_nodes << " density=" << m.density_pct << "% members=" << m.members
           << " queries=" << s.queries << " success=" << s.success_rate << " error=" << s.mean_error
           << " query_time=" << s.mean_query_time << "ms hops=" << s.mean_hops << " overhead=" << m.overhead
           << " D=" << m.D << "ms\n";
    };
    std::vector<double> offsets;
    for (const auto& q : m.queries) {
        if (std::find(offsets.begin(), offsets.end(), q.offset_ms) == offsets.end()) {
            offsets.push_back(q.offset_ms);
        }
    }
    if (offsets.size() <= 1) {
        emit(doat::summarize(m), "");
        return;
    }
    for (double o : offsets) {
        std::ostringstream label;
        label << " offset=" << o << "ms";
        emit(doat::summarize(m, o), label.str());
    }
}

int cmd_generate(const GenerateArgs& a) {
    const auto pts = doat::generate_uniform(a.n, doat::BoundingBox::cube(a.dim, a.min, a.max), a.seed);
    if (a.out.empty() || a.out == "-") {
        doat::write_coordinates(std::cout, pts);
    } else {
        doat::write_coordinates(a.out, pts);
    }
    return kOk;
}

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent);
    }
}

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
    ensure_parent(path);
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*f) {
        throw doat::Error("cannot write " + path);
    }
    return f;
}

int cmd_run(const RunArgs& a) {
    doat::Config cfg = doat::load_config(a.config);
    if (cfg.sweep) {
        throw doat::ConfigError(a.config + " describes a sweep; use 'doat sweep'");
    }
    if (a.seed) {
        cfg.scenario.seed = *a.seed;
    }
    const std::string out = a.out.empty() ? cfg.results_path : a.out;
    const std::string trace_path = a.trace.empty() ? cfg.trace_path : a.trace;

    std::unique_ptr<std::ofstream> trace;
    doat::RunOptions opt;
    if (!trace_path.empty()) {
        trace = open_out(trace_path);
        opt.trace = trace.get();
    }
    const doat::RunMetrics m = doat::run_scenario(cfg.scenario, opt);
    if (out.empty() || out == "-") {
        doat::write_results(std::cout, m);
    } else {
        ensure_parent(out);
        doat::write_results(out, m);
    }
    print_summary(std::cerr, m);
    return kOk;
}

int cmd_sweep(const SweepArgs& a) {
    const doat::Config cfg = doat::load_config(a.config);
    const auto scenarios = doat::expand_sweep(cfg);
    const unsigned jobs = a.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.jobs;
    const auto runs = doat::run_all(scenarios, jobs);

    const std::string results_dir = a.results.empty() ? std::string() : a.results;
    if (!results_dir.empty()) {
        std::filesystem::create_directories(results_dir);
        for (std::size_t i = 0; i < runs.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "run-%04zu.csv", i);
            doat::write_results(std::filesystem::path(results_dir) / name, runs[i]);
        }
    }
    const auto rows = doat::aggregate(runs);
    const std::string out = a.out.empty() ? cfg.aggregate_path : a.out;
    if (out.empty() || out == "-") {
        doat::write_aggregate(std::cout, rows);
    } else {
        ensure_parent(out);
        doat::write_aggregate(out, rows);
    }
    std::cerr << runs.size() << " runs, " << rows.size() << " sweep points\n";
    return kOk;
}

int cmd_validate(const std::string& path) {
    const doat::Config cfg = doat::load_config(path);
    const auto scenarios = doat::expand_sweep(cfg);
    std::cout << path << ": ok, " << scenarios.size() << (scenarios.size() == 1 ? " run" : " runs") << '\n';
    return kOk;
}

int cmd_trace_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw doat::Error("cannot open " + path);
    }
    const auto t = doat::summarize_trace(in);
    std::cout << "messages " << t.lines << "\ndropped " << t.dropped << "\nfirst_time_ms " << t.first_time
              << "\nlast_time_ms " << t.last_time << '\n';
    for (const auto& [kind, n] : t.by_kind) {
        std::cout << "kind " << kind << ' ' << n << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DOAT anycast overlay simulator"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "Write a uniform random coordinate file");
    g->add_option("--n", gen.n, "Number of hosts")->required()->check(CLI::PositiveNumber);
    g->add_option("--min", gen.min, "Lower bound of every axis")->capture_default_str();
    g->add_option("--max", gen.max, "Upper bound of every axis")->capture_default_str();
    g->add_option("--dim", gen.dim, "Dimensions")->capture_default_str()->check(CLI::PositiveNumber);
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    g->add_option("--out", gen.out, "Output file (default: standard output)");

    RunArgs run;
    auto* r = app.add_subcommand("run", "Run one scenario and write its per-query CSV");
    r->add_option("--config", run.config, "Scenario file")->required()->check(CLI::ExistingFile);
    r->add_option("--out", run.out, "Results CSV (default: [output] results, else standard output)");
    r->add_option("--trace", run.trace, "Message trace file");
    r->add_option("--seed", run.seed, "Override the configured seed");

    SweepArgs sweep;
    auto* s = app.add_subcommand("sweep", "Run every point of a sweep and write the aggregated CSV");
    s->add_option("--config", sweep.config, "Scenario file with a [sweep] section")->required()->check(CLI::ExistingFile);
    s->add_option("--out", sweep.out, "Aggregated CSV (default: [output] aggregate, else standard output)");
    s->add_option("--results", sweep.results, "Directory for per-run CSV files");
    s->add_option("--jobs", sweep.jobs, "Parallel overlay builds (0 = all cores)")->capture_default_str();

    std::string validate_path;
    auto* v = app.add_subcommand("validate", "Check a scenario file without running it");
    v->add_option("--config", validate_path, "Scenario file")->required()->check(CLI::ExistingFile);

    std::string trace_path;
    auto* t = app.add_subcommand("trace-summary", "Count the messages in a trace file");
    t->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (g->parsed()) {
            if (!(gen.min < gen.max)) {
                std::cerr << "generate: --min must be below --max\n";
                return kUsage;
            }
            return cmd_generate(gen);
        }
        if (r->parsed()) {
            return cmd_run(run);
        }
        if (s->parsed()) {
            return cmd_sweep(sweep);
        }
        if (v->parsed()) {
            return cmd_validate(validate_path);
        }
        return cmd_trace_summary(trace_path);
    } catch (const doat::NonQuiescentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNonQuiescent;
    } catch (const doat::InvariantError& e) {
        std::cerr << "invariant breach: " << e.what() << '\n';
        return kInvariant;
    } catch (const doat::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInvariant;
    }
}
