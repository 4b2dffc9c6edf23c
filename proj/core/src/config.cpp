#include "doat/config.hpp"

#include "doat/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace doat {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = v.find(',', start);
        out.push_back(trim(std::string_view(v).substr(start, comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

class Reader {
public:
    Reader(std::size_t line, std::string key) : line_(line), key_(std::move(key)) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("line " + std::to_string(line_) + ": " + key_ + ": " + what);
    }

    double real(const std::string& v) const {
        double x = 0.0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || std::isnan(x)) {
            fail("expected a number, got '" + v + "'");
        }
        return x;
    }

    template <typename T>
    T integer(const std::string& v) const {
        T x = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
            fail("expected a non-negative integer, got '" + v + "'");
        }
        return x;
    }

    bool boolean(const std::string& v) const {
        if (v == "true") {
            return true;
        }
        if (v == "false") {
            return false;
        }
        fail("expected true or false, got '" + v + "'");
    }

    std::vector<double> reals(const std::string& v) const {
        std::vector<double> out;
        for (const auto& item : split_list(v)) {
            out.push_back(real(item));
        }
        return out;
    }

    std::vector<std::uint64_t> seeds(const std::string& v) const {
        std::vector<std::uint64_t> out;
        for (const auto& item : split_list(v)) {
            const auto dots = item.find("..");
            if (dots == std::string::npos) {
                out.push_back(integer<std::uint64_t>(item));
                continue;
            }
            const auto lo = integer<std::uint64_t>(trim(std::string_view(item).substr(0, dots)));
            const auto hi = integer<std::uint64_t>(trim(std::string_view(item).substr(dots + 2)));
            if (hi < lo) {
                fail("empty seed range '" + item + "'");
            }
            for (auto s = lo; s <= hi; ++s) {
                out.push_back(s);
            }
        }
        return out;
    }

private:
    std::size_t line_;
    std::string key_;
};

std::string resolve(const std::string& p, const std::filesystem::path& base) {
    if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) {
        return p;
    }
    return (base / p).lexically_normal().string();
}

}  // namespace

Config parse_config(std::istream& in, const std::filesystem::path& base_dir) {
    Config c;
    Scenario& s = c.scenario;
    double box_min = -100.0;
    double box_max = 100.0;
    std::size_t dim = 2;
    std::string section;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#;");
        const std::string text = trim(std::string_view(line).substr(0, comment));
        if (text.empty()) {
            continue;
        }
        if (text.front() == '[') {
            if (text.back() != ']') {
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            }
            section = trim(std::string_view(text).substr(1, text.size() - 2));
            static const std::set<std::string> known = {"run",     "dataset", "members", "overlay",
                                                        "offsets", "sweep",   "output"};
            if (!known.contains(section)) {
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            }
            if (section == "sweep" && !c.sweep) {
                c.sweep = SweepAxes{};
            }
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(text).substr(0, eq));
        const std::string value = trim(std::string_view(text).substr(eq + 1));
        const std::string full = section + "." + key;
        const Reader r(lineno, full);
        if (section.empty()) {
            r.fail("key outside of any section");
        }
        if (!seen.insert(full).second) {
            r.fail("given twice");
        }

        if (full == "run.id") {
            s.id = value;
        } else if (full == "run.seed") {
            s.seed = r.integer<std::uint64_t>(value);
        } else if (full == "run.mode") {
            try {
                s.mode = parse_mode(value);
            } catch (const ConfigError& e) {
                r.fail(e.what());
            }
        } else if (full == "dataset.path") {
            s.dataset.path = resolve(value, base_dir);
        } else if (full == "dataset.n") {
            s.dataset.n = r.integer<std::size_t>(value);
        } else if (full == "dataset.min") {
            box_min = r.real(value);
        } else if (full == "dataset.max") {
            box_max = r.real(value);
        } else if (full == "dataset.dim") {
            dim = r.integer<std::size_t>(value);
        } else if (full == "members.density") {
            s.density = r.real(value);
        } else if (full == "members.groups") {
            s.groups = r.integer<std::size_t>(value);
        } else if (full == "members.inter_arrival_ms") {
            s.inter_arrival_ms = r.real(value);
        } else if (full == "members.query_fraction") {
            s.query_fraction = r.real(value);
        } else if (full == "overlay.curve") {
            try {
                s.curve.kind = parse_curve_kind(value);
            } catch (const ConfigError& e) {
                r.fail(e.what());
            }
        } else if (full == "overlay.curve_order") {
            s.curve.order = r.integer<int>(value);
        } else if (full == "overlay.bloom_m") {
            s.bloom.m = r.integer<std::uint32_t>(value);
        } else if (full == "overlay.bloom_k") {
            s.bloom.k = r.integer<std::uint32_t>(value);
        } else if (full == "overlay.distance_classes") {
            s.distance_classes = r.boolean(value);
        } else if (full == "overlay.update_interval") {
            s.update_interval = r.real(value);
        } else if (full == "overlay.query_ttl") {
            s.query_ttl = r.integer<std::uint32_t>(value);
        } else if (full == "overlay.track_exact_sets") {
            s.track_exact_sets = r.boolean(value);
        } else if (full == "overlay.max_time_ms") {
            s.max_time_ms = r.real(value);
        } else if (full == "offsets.offsets_ms") {
            s.offsets = r.reals(value);
        } else if (full == "offsets.recompute_d") {
            s.offset_recompute_d = r.boolean(value);
        } else if (full == "sweep.nodes") {
            for (double n : r.reals(value)) {
                if (n < 2 || n != std::floor(n)) {
                    r.fail("node counts must be integers >= 2");
                }
                c.sweep->nodes.push_back(static_cast<std::size_t>(n));
            }
        } else if (full == "sweep.densities") {
            c.sweep->densities = r.reals(value);
        } else if (full == "sweep.update_intervals") {
            c.sweep->update_intervals = r.reals(value);
        } else if (full == "sweep.seeds") {
            c.sweep->seeds = r.seeds(value);
        } else if (full == "output.results") {
            c.results_path = resolve(value, base_dir);
        } else if (full == "output.aggregate") {
            c.aggregate_path = resolve(value, base_dir);
        } else if (full == "output.trace") {
            c.trace_path = resolve(value, base_dir);
        } else {
            r.fail("unknown key");
        }
    }

    if (!(box_min < box_max)) {
        throw ConfigError("dataset.min must be below dataset.max");
    }
    if (dim == 0) {
        throw ConfigError("dataset.dim must be positive");
    }
    s.dataset.box = BoundingBox::cube(dim, box_min, box_max);

    if (c.sweep) {
        // An axis that is listed must be non-empty; an axis that is not
        // listed falls back to the single configured value.
        auto& a = *c.sweep;
        auto check = [&](const char* key, bool empty) {
            if (seen.contains(std::string("sweep.") + key) && empty) {
                throw ConfigError(std::string("sweep.") + key + " must not be empty");
            }
        };
        check("nodes", a.nodes.empty());
        check("densities", a.densities.empty());
        check("update_intervals", a.update_intervals.empty());
        check("seeds", a.seeds.empty());
        if (a.nodes.empty() && a.densities.empty() && a.update_intervals.empty() && a.seeds.empty()) {
            throw ConfigError("[sweep] needs at least one axis");
        }
        if (!a.nodes.empty() && !s.dataset.path.empty()) {
            throw ConfigError("sweep.nodes cannot be combined with dataset.path");
        }
        for (const auto& sc : expand_sweep(c)) {
            sc.validate();
        }
    } else {
        s.validate();
    }
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    try {
        return parse_config(in, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<Scenario> expand_sweep(const Config& c) {
    if (!c.sweep) {
        return {c.scenario};
    }
    const auto& a = *c.sweep;
    const auto nodes = a.nodes.empty() ? std::vector<std::size_t>{c.scenario.dataset.n} : a.nodes;
    const auto dens = a.densities.empty() ? std::vector<double>{c.scenario.density} : a.densities;
    const auto ints = a.update_intervals.empty() ? std::vector<double>{c.scenario.update_interval} : a.update_intervals;
    const auto seeds = a.seeds.empty() ? std::vector<std::uint64_t>{c.scenario.seed} : a.seeds;
    std::vector<Scenario> out;
    for (auto n : nodes) {
        for (double d : dens) {
            for (double i : ints) {
                for (auto seed : seeds) {
                    Scenario s = c.scenario;
                    s.dataset.n = n;
                    s.density = d;
                    s.update_interval = i;
                    s.seed = seed;
                    out.push_back(std::move(s));
                }
            }
        }
    }
    return out;
}

std::vector<RunMetrics> run_all(const std::vector<Scenario>& scenarios, unsigned jobs, const RunOptions& opt) {
    // Scenarios sharing an overlay form one job, in order of first appearance.
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        scenarios[i].validate();
        const auto key = overlay_key(scenarios[i]);
        auto [it, fresh] = index.emplace(key, groups.size());
        if (fresh) {
            groups.emplace_back();
        }
        groups[it->second].push_back(i);
    }

    std::vector<RunMetrics> out(scenarios.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (true) {
            const std::size_t g = next.fetch_add(1);
            if (g >= groups.size()) {
                return;
            }
            try {
                const auto prep = prepare_overlay(scenarios[groups[g].front()], opt);
                for (std::size_t i : groups[g]) {
                    const Scenario& s = scenarios[i];
                    if (!s.offsets.empty()) {
                        out[i] = run_offset_sweep(s, prep, opt);
                    } else if (s.mode == Mode::synchronous) {
                        out[i] = run_synchronous(s, prep, opt);
                    } else {
                        out[i] = run_asynchronous(s, prep, opt);
                    }
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = groups.size();
                return;
            }
        }
    };

    // A shared trace stream would interleave, so tracing runs serially.
    const unsigned n = opt.trace ? 1u : std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(groups.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return out;
}

}  // namespace doat
