#include "doat/results.hpp"

#include "doat/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace doat {

namespace {

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string checked_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") != std::string::npos) {
        throw Error("CSV field may not contain commas, quotes or newlines: '" + s + "'");
    }
    return s;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(line, "expected a number, got '" + s + "'");
    }
    return v;
}

template <typename T>
T parse_uint(const std::string& s, std::size_t line) {
    T v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(line, "expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

// Fields of RunMetrics that live in the metadata block.
std::map<std::string, std::string> metadata_of(const RunMetrics& m) {
    auto md = m.metadata;
    md["scenario_id"] = m.scenario_id;
    md["seed"] = std::to_string(m.seed);
    md["n_nodes"] = std::to_string(m.n_nodes);
    md["density_pct"] = num(m.density_pct);
    md["mode"] = std::string(to_string(m.mode));
    md["update_interval"] = num(m.update_interval);
    md["members"] = std::to_string(m.members);
    md["route_updates"] = std::to_string(m.route_updates);
    md["overhead"] = num(m.overhead);
    md["average_delay_ms"] = num(m.D);
    return md;
}

const std::string& required(const std::map<std::string, std::string>& md, const std::string& key) {
    auto it = md.find(key);
    if (it == md.end()) {
        throw ParseError(0, "results metadata lacks '" + key + "'");
    }
    return it->second;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double mu = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mu) * (x - mu);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void write_results(std::ostream& out, const RunMetrics& m) {
    for (const auto& [k, v] : metadata_of(m)) {
        out << "# " << k << " = " << v << '\n';
    }
    out << kResultColumns << '\n';
    const std::string prefix = checked_field(m.scenario_id) + ',' + std::to_string(m.seed) + ',' +
                               std::to_string(m.n_nodes) + ',' + num(m.density_pct) + ',' +
                               std::string(to_string(m.mode)) + ',' + num(m.update_interval) + ',';
    for (const auto& q : m.queries) {
        out << prefix << num(q.offset_ms) << ',' << q.origin << ',' << checked_field(q.group) << ',' << q.hops << ','
            << num(q.query_time) << ',' << num(q.R) << ',' << num(q.C) << ',' << num(q.error) << ','
            << (q.success ? 1 : 0) << '\n';
    }
}

void write_results(const std::filesystem::path& path, const RunMetrics& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_results(out, m);
    if (!out) {
        throw Error("error writing " + path.string());
    }
}

RunMetrics read_results(std::istream& in) {
    RunMetrics m;
    std::map<std::string, std::string> md;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            if (header) {
                throw ParseError(lineno, "metadata after the header row");
            }
            const auto eq = line.find(" = ");
            if (eq == std::string::npos) {
                throw ParseError(lineno, "metadata line needs 'key = value'");
            }
            md[trim(std::string_view(line).substr(1, eq - 1))] = line.substr(eq + 3);
            continue;
        }
        if (!header) {
            if (line != kResultColumns) {
                throw ParseError(lineno, "unexpected header row");
            }
            header = true;
            continue;
        }
        const auto f = split(line);
        if (f.size() != 15) {
            throw ParseError(lineno, "expected 15 fields, got " + std::to_string(f.size()));
        }
        QueryMetric q;
        q.offset_ms = parse_double(f[6], lineno);
        q.origin = parse_uint<std::uint32_t>(f[7], lineno);
        q.group = f[8];
        q.hops = parse_uint<std::uint32_t>(f[9], lineno);
        q.query_time = parse_double(f[10], lineno);
        q.R = parse_double(f[11], lineno);
        q.C = parse_double(f[12], lineno);
        q.error = parse_double(f[13], lineno);
        if (f[14] != "0" && f[14] != "1") {
            throw ParseError(lineno, "success must be 0 or 1");
        }
        q.success = f[14] == "1";
        m.queries.push_back(std::move(q));
    }
    if (!header) {
        throw ParseError(lineno, "missing header row");
    }
    m.scenario_id = required(md, "scenario_id");
    m.seed = parse_uint<std::uint64_t>(required(md, "seed"), 0);
    m.n_nodes = parse_uint<std::size_t>(required(md, "n_nodes"), 0);
    m.density_pct = parse_double(required(md, "density_pct"), 0);
    m.mode = parse_mode(required(md, "mode"));
    m.update_interval = parse_double(required(md, "update_interval"), 0);
    m.members = parse_uint<std::size_t>(required(md, "members"), 0);
    m.route_updates = parse_uint<std::uint64_t>(required(md, "route_updates"), 0);
    m.overhead = parse_double(required(md, "overhead"), 0);
    m.D = parse_double(required(md, "average_delay_ms"), 0);
    for (const char* k : {"scenario_id", "seed", "n_nodes", "density_pct", "mode", "update_interval", "members",
                          "route_updates", "overhead", "average_delay_ms"}) {
        md.erase(k);
    }
    m.metadata = std::move(md);
    return m;
}

RunMetrics read_results(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return read_results(in);
}

std::vector<AggregateRow> aggregate(std::span<const RunMetrics> runs) {
    using Key = std::tuple<std::string, std::size_t, double, std::string, double, double>;
    std::map<Key, std::vector<std::pair<std::uint64_t, const RunMetrics*>>> groups;
    for (const auto& r : runs) {
        std::vector<double> offsets;
        for (const auto& q : r.queries) {
            if (std::find(offsets.begin(), offsets.end(), q.offset_ms) == offsets.end()) {
                offsets.push_back(q.offset_ms);
            }
        }
        if (offsets.empty()) {
            offsets.push_back(0.0);
        }
        for (double o : offsets) {
            groups[Key{r.scenario_id, r.n_nodes, r.density_pct, std::string(to_string(r.mode)), r.update_interval, o}]
                .emplace_back(r.seed, &r);
        }
    }

    std::vector<AggregateRow> rows;
    for (auto& [key, members] : groups) {
        std::stable_sort(members.begin(), members.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        AggregateRow row;
        std::tie(row.scenario_id, row.n_nodes, row.density_pct, row.mode, row.update_interval, row.offset_ms) = key;
        std::vector<double> err, qt, hops, hop_delay, overhead, D;
        std::size_t successes = 0;
        for (const auto& [seed, run] : members) {
            const Summary s = summarize(*run, row.offset_ms);
            row.queries += s.queries;
            successes += s.successes;
            err.push_back(s.mean_error);
            qt.push_back(s.mean_query_time);
            hops.push_back(s.mean_hops);
            hop_delay.push_back(s.mean_hop_delay);
            overhead.push_back(run->overhead);
            D.push_back(run->D);
        }
        row.runs = members.size();
        row.success_rate = row.queries == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(row.queries);
        row.mean_error = mean_of(err);
        row.sd_error = sd_of(err);
        row.mean_query_time = mean_of(qt);
        row.sd_query_time = sd_of(qt);
        row.mean_hops = mean_of(hops);
        row.sd_hops = sd_of(hops);
        row.mean_hop_delay = mean_of(hop_delay);
        row.mean_overhead = mean_of(overhead);
        row.sd_overhead = sd_of(overhead);
        row.mean_D = mean_of(D);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_aggregate(std::ostream& out, std::span<const AggregateRow> rows) {
    out << kAggregateColumns << '\n';
    for (const auto& r : rows) {
        out << checked_field(r.scenario_id) << ',' << r.n_nodes << ',' << num(r.density_pct) << ',' << r.mode << ','
            << num(r.update_interval) << ',' << num(r.offset_ms) << ',' << r.runs << ',' << r.queries << ','
            << num(r.success_rate) << ',' << num(r.mean_error) << ',' << num(r.sd_error) << ','
            << num(r.mean_query_time) << ',' << num(r.sd_query_time) << ',' << num(r.mean_hops) << ','
            << num(r.sd_hops) << ',' << num(r.mean_hop_delay) << ',' << num(r.mean_overhead) << ','
            << num(r.sd_overhead) << ',' << num(r.mean_D) << '\n';
    }
}

void write_aggregate(const std::filesystem::path& path, std::span<const AggregateRow> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    write_aggregate(out, rows);
    if (!out) {
        throw Error("error writing " + path.string());
    }
}

}  // namespace doat
