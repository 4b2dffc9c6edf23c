#include "doat/experiments.hpp"

#include "doat/error.hpp"
#include "doat/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace doat {

namespace {

constexpr std::uint64_t kMemberSalt = 0x6d656d62;   // member placement
constexpr std::uint64_t kArrivalSalt = 0x61727276;  // arrival order
constexpr std::uint64_t kQuerySalt = 0x71727973;    // asynchronous query origins
constexpr std::uint64_t kOffsetSalt = 0x6f666673;   // coordinate offsets

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string group_name(std::size_t j) { return "g" + std::to_string(j); }

BoundingBox bounding_cube(std::span<const DelayPoint> points) {
    double lo = points.front()[0];
    double hi = lo;
    for (const auto& p : points) {
        for (double c : p.coords()) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
    }
    if (!(lo < hi)) {
        hi = lo + 1.0;
    }
    return BoundingBox::cube(points.front().dim(), lo, hi);
}

void check_tables(const Overlay& ov) {
    for (std::uint32_t s : ov.live()) {
        const std::string err = ov.sim().node(s).check_invariants();
        if (!err.empty()) {
            throw InvariantError("node " + std::to_string(s) + ": " + err);
        }
    }
}

void settle(Overlay& ov, const RunOptions& opt) {
    ov.settle();
    if (opt.check_invariants) {
        check_tables(ov);
    }
}

// Members of every group, each on a distinct random node.
std::vector<Member> place_members(const Scenario& s, std::size_t n) {
    const std::size_t per_group = s.members_per_group(n);
    const Rng base = Rng(s.seed).fork(kMemberSalt);
    std::vector<Member> out;
    for (std::size_t j = 0; j < s.groups; ++j) {
        Rng rng = base.fork(j);
        std::vector<std::uint32_t> nodes(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            nodes[i] = i;
        }
        rng.shuffle(std::span(nodes));
        for (std::size_t i = 0; i < per_group; ++i) {
            out.push_back(Member{out.size(), group_name(j), nodes[i], 0.0});
        }
    }
    return out;
}

Overlay branch(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt) {
    if (!prep.overlay) {
        throw Error("prepared overlay is empty");
    }
    if (prep.key != overlay_key(s)) {
        throw ConfigError("prepared overlay does not match scenario '" + s.id + "'");
    }
    Overlay ov(*prep.overlay);
    ov.sim().set_trace(opt.trace);
    const double interval = s.update_interval * s.inter_arrival_ms;
    for (std::uint32_t n : ov.live()) {
        ov.sim().node(n).set_update_interval(interval);
    }
    ov.sim().reset_counts();
    return ov;
}

RunMetrics base_metrics(const Scenario& s, const PreparedOverlay& prep, std::size_t members) {
    RunMetrics m;
    m.scenario_id = s.id;
    m.seed = s.seed;
    m.n_nodes = prep.positions.size();
    m.density_pct = s.density * 100.0;
    m.mode = s.mode;
    m.update_interval = s.update_interval;
    m.members = members;
    m.D = prep.D;

    auto& md = m.metadata;
    md["rng"] = Rng::kAlgorithm;
    md["dataset"] = s.dataset.path.empty() ? "uniform" : s.dataset.path;
    md["dimensions"] = std::to_string(prep.positions.front().dim());
    md["density"] = num(s.density);
    md["groups"] = std::to_string(s.groups);
    md["member_model"] = "hosts co-located with distinct random DOAT nodes, registered at that node";
    md["inter_arrival_ms"] = num(s.inter_arrival_ms);
    md["query_fraction"] = num(s.query_fraction);
    md["bloom_m"] = std::to_string(s.bloom.m);
    md["bloom_k"] = std::to_string(s.bloom.k);
    md["bloom_hash"] = "fnv1a64 double hashing";
    md["curve"] = std::string(to_string(s.curve.kind));
    md["curve_order"] = std::to_string(s.curve.order);
    md["distance_classes"] = s.distance_classes ? "true" : "false";
    md["query_ttl"] = std::to_string(s.query_ttl);
    md["resolve_ttl"] = std::to_string(resolve_ttl_for(m.n_nodes));
    md["track_exact_sets"] = s.track_exact_sets ? "true" : "false";
    md["max_time_ms"] = num(s.max_time_ms);
    if (!s.offsets.empty()) {
        std::string list;
        for (double o : s.offsets) {
            list += (list.empty() ? "" : ",") + num(o);
        }
        md["offsets_ms"] = list;
        md["offset_law"] = "direction uniform on circle, length uniform on [0.5o, 1.5o]";
        md["offset_recompute_d"] = s.offset_recompute_d ? "true" : "false";
    }
    return m;
}

// Turns finished query records into metrics. `positions` are the host
// positions in force when the queries ran.
void collect(const Overlay& ov, std::span<const Member> members, std::span<const DelayPoint> positions, double D,
             double offset, RunMetrics& out) {
    double last_arrival = 0.0;
    for (const auto& m : members) {
        last_arrival = std::max(last_arrival, m.arrival);
    }
    auto all_arrived = [&](double t) { return last_arrival <= t; };
    std::size_t hop_order_violations = 0;
    for (const auto& [id, q] : ov.queries()) {
        QueryMetric qm;
        qm.origin = q.origin;
        qm.group = q.group.bytes();
        qm.offset_ms = offset;

        // Only members that had arrived when the query was issued count.
        std::span<const Member> known = members;
        std::vector<Member> arrived;
        if (!all_arrived(q.issued_at)) {
            std::copy_if(members.begin(), members.end(), std::back_inserter(arrived),
                         [&](const Member& m) { return m.arrival <= q.issued_at; });
            known = arrived;
        }
        const auto& origin_pos = positions[q.origin];
        qm.C = oracle_closest_member(origin_pos, qm.group, known, positions).second;

        if (q.response && q.response->status == QueryStatus::found && q.response->member) {
            const auto& path = q.response->path;
            qm.success = true;
            qm.hops = static_cast<std::uint32_t>(path.size() - 1);
            for (std::size_t k = 1; k < path.size(); ++k) {
                qm.query_time += delay(positions[path[k - 1].serial], positions[path[k].serial]);
            }
            const auto address = q.response->member->address;
            if (address >= members.size()) {
                throw InvariantError("query returned an unknown member");
            }
            qm.R = delay(origin_pos, positions[members[address].node]);
            qm.error = accuracy_error(qm.R, qm.C, D);
            // Ring distance to the target must shrink on every hop.
            const auto& h = q.response->hop_dists;
            for (std::size_t k = 1; k < h.size(); ++k) {
                hop_order_violations += h[k] < h[k - 1] ? 0 : 1;
            }
        } else {
            qm.hops = q.response ? static_cast<std::uint32_t>(q.response->path.size() - 1) : 0;
            qm.R = std::numeric_limits<double>::quiet_NaN();
            qm.error = std::numeric_limits<double>::quiet_NaN();
        }
        out.queries.push_back(std::move(qm));
    }
    auto& count = out.metadata["hop_order_violations"];
    count = std::to_string((count.empty() ? 0 : std::stoull(count)) + hop_order_violations);
}

void register_all(Overlay& ov, std::span<const Member> members, std::span<const DelayPoint> positions, double at) {
    for (const auto& m : members) {
        ov.register_member(ov.make_member(GroupId(m.group), m.id, positions[m.node]), m.node, at);
    }
}

void query_all(Overlay& ov, std::size_t groups, double at) {
    for (std::size_t j = 0; j < groups; ++j) {
        const GroupId g(group_name(j));
        for (std::uint32_t n : ov.live()) {
            ov.issue_query(n, g, at);
        }
    }
}

void finish_overhead(RunMetrics& m, const Overlay& ov) {
    m.route_updates = ov.sim().counts().route_updates();
    m.overhead = m.members == 0 ? 0.0
                                : static_cast<double>(m.route_updates) /
                                      (static_cast<double>(m.n_nodes) * static_cast<double>(m.members));
}

void note_false_positives(const Scenario& s, const Overlay& ov, RunMetrics& m) {
    if (!s.track_exact_sets) {
        return;
    }
    std::vector<std::string> groups;
    for (std::size_t j = 0; j < s.groups; ++j) {
        groups.push_back(group_name(j));
    }
    m.metadata["false_positive_entries"] = std::to_string(count_false_positive_entries(ov, groups));
}

}  // namespace

std::string_view to_string(Mode m) noexcept {
    return m == Mode::synchronous ? "synchronous" : "asynchronous";
}

Mode parse_mode(std::string_view name) {
    if (name == "synchronous") {
        return Mode::synchronous;
    }
    if (name == "asynchronous") {
        return Mode::asynchronous;
    }
    throw ConfigError("unknown mode '" + std::string(name) + "' (expected synchronous or asynchronous)");
}

void Scenario::validate() const {
    if (id.empty()) {
        throw ConfigError("scenario id must not be empty");
    }
    if (dataset.path.empty()) {
        if (dataset.n < 2) {
            throw ConfigError("dataset needs at least 2 nodes");
        }
        dataset.box.validate();
    }
    if (!(density > 0.0 && density <= 1.0)) {
        throw ConfigError("density must be in (0, 1], got " + num(density));
    }
    if (!(query_fraction > 0.0 && query_fraction <= 1.0)) {
        throw ConfigError("query fraction must be in (0, 1], got " + num(query_fraction));
    }
    if (!(update_interval >= 0.0)) {
        throw ConfigError("update interval must be >= 0");
    }
    if (!(inter_arrival_ms > 0.0) || !std::isfinite(inter_arrival_ms)) {
        throw ConfigError("inter-arrival time must be positive and finite");
    }
    if (groups == 0) {
        throw ConfigError("at least one group is required");
    }
    for (double o : offsets) {
        if (!(o >= 0.0) || !std::isfinite(o)) {
            throw ConfigError("offsets must be finite and >= 0");
        }
    }
    if (query_ttl == 0) {
        throw ConfigError("query ttl must be positive");
    }
    if (!(max_time_ms > 0.0)) {
        throw ConfigError("max time must be positive");
    }
    bloom.validate();
    if (dataset.path.empty()) {
        curve.validate(dataset.box.dim());
    }
}

std::size_t Scenario::members_per_group(std::size_t n) const {
    const auto m = static_cast<std::size_t>(std::llround(density * static_cast<double>(n)));
    return std::clamp<std::size_t>(m, 1, n);
}

Summary summarize(const RunMetrics& m, std::optional<double> offset) {
    Summary s;
    double hop_delay = 0.0;
    std::size_t with_hops = 0;
    for (const auto& q : m.queries) {
        if (offset && q.offset_ms != *offset) {
            continue;
        }
        ++s.queries;
        if (!q.success) {
            continue;
        }
        ++s.successes;
        s.mean_error += q.error;
        s.mean_query_time += q.query_time;
        s.mean_hops += q.hops;
        if (q.hops > 0) {
            hop_delay += q.query_time / q.hops;
            ++with_hops;
        }
    }
    if (s.successes > 0) {
        const auto k = static_cast<double>(s.successes);
        s.mean_error /= k;
        s.mean_query_time /= k;
        s.mean_hops /= k;
    }
    if (with_hops > 0) {
        s.mean_hop_delay = hop_delay / static_cast<double>(with_hops);
    }
    s.success_rate = s.queries == 0 ? 0.0 : static_cast<double>(s.successes) / static_cast<double>(s.queries);
    return s;
}

std::pair<const Member*, double> oracle_closest_member(const DelayPoint& origin, const std::string& group,
                                                        std::span<const Member> members,
                                                        std::span<const DelayPoint> positions) {
    const Member* best = nullptr;
    double best_d = 0.0;
    for (const auto& m : members) {
        if (m.group != group) {
            continue;
        }
        const double d = delay(origin, positions[m.node]);
        if (!best || d < best_d || (d == best_d && m.id < best->id)) {
            best = &m;
            best_d = d;
        }
    }
    if (!best) {
        throw Error("group '" + group + "' has no members");
    }
    return {best, best_d};
}

double accuracy_error(double R, double C, double D) {
    if (!(D > 0.0)) {
        throw Error("accuracy error needs a positive average delay");
    }
    return (R - C) / D;
}

std::string overlay_key(const Scenario& s) {
    std::ostringstream k;
    k << s.dataset.path << '|' << s.dataset.n << '|';
    for (std::size_t i = 0; i < s.dataset.box.dim(); ++i) {
        k << num(s.dataset.box.min[i]) << ',' << num(s.dataset.box.max[i]) << ';';
    }
    k << '|' << s.seed << '|' << to_string(s.curve.kind) << s.curve.order << '|' << s.bloom.m << ',' << s.bloom.k
      << '|' << s.distance_classes << s.track_exact_sets << '|' << s.query_ttl << '|' << num(s.max_time_ms);
    return k.str();
}

std::vector<DelayPoint> load_dataset(const Scenario& s) {
    if (!s.dataset.path.empty()) {
        auto pts = load_coordinates(s.dataset.path);
        if (pts.size() < 2) {
            throw ConfigError("dataset " + s.dataset.path + " needs at least 2 hosts");
        }
        return pts;
    }
    return generate_uniform(s.dataset.n, s.dataset.box, s.seed);
}

PreparedOverlay prepare_overlay(const Scenario& s, const RunOptions& opt) {
    s.validate();
    PreparedOverlay prep;
    prep.positions = load_dataset(s);
    prep.D = average_pairwise_delay(prep.positions);
    prep.key = overlay_key(s);

    OverlayParams p;
    p.box = s.dataset.path.empty() ? s.dataset.box : bounding_cube(prep.positions);
    p.curve = s.curve;
    p.node.bloom = s.bloom;
    p.node.query_ttl = s.query_ttl;
    p.node.track_exact_sets = s.track_exact_sets;
    p.node.distance_classes = s.distance_classes;
    p.seed = s.seed;
    p.max_time = s.max_time_ms;
    prep.overlay = std::make_unique<Overlay>(prep.positions, p);
    prep.overlay->sim().set_trace(opt.trace);
    prep.overlay->build();
    if (opt.check_invariants) {
        check_tables(*prep.overlay);
    }
    prep.overlay->sim().set_trace(nullptr);
    return prep;
}

RunMetrics run_synchronous(const Scenario& s, const RunOptions& opt) {
    return run_synchronous(s, prepare_overlay(s, opt), opt);
}

RunMetrics run_synchronous(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt) {
    Overlay ov = branch(s, prep, opt);
    const auto members = place_members(s, prep.positions.size());
    RunMetrics m = base_metrics(s, prep, members.size());

    register_all(ov, members, prep.positions, ov.sim().now());
    settle(ov, opt);
    finish_overhead(m, ov);
    note_false_positives(s, ov, m);

    query_all(ov, s.groups, ov.sim().now());
    settle(ov, opt);
    collect(ov, members, prep.positions, prep.D, 0.0, m);
    return m;
}

RunMetrics run_asynchronous(const Scenario& s, const RunOptions& opt) {
    return run_asynchronous(s, prepare_overlay(s, opt), opt);
}

RunMetrics run_asynchronous(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt) {
    Overlay ov = branch(s, prep, opt);
    auto members = place_members(s, prep.positions.size());
    RunMetrics m = base_metrics(s, prep, members.size());

    // Arrival order is random across groups; member ids stay as placed so
    // query responses map straight back to members.
    std::vector<std::size_t> order(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng arrivals = Rng(s.seed).fork(kArrivalSalt);
    arrivals.shuffle(std::span(order));

    const double T = s.inter_arrival_ms;
    const double start = ov.sim().now() + T;
    const auto live = ov.live();
    const auto per_round =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(s.query_fraction * static_cast<double>(live.size()))),
                                1, live.size());
    Rng origins = Rng(s.seed).fork(kQuerySalt);
    std::set<std::string> arrived_groups;

    for (std::size_t i = 0; i < order.size(); ++i) {
        Member& mem = members[order[i]];
        mem.arrival = start + static_cast<double>(i) * T;
        ov.register_member(ov.make_member(GroupId(mem.group), mem.id, prep.positions[mem.node]), mem.node,
                           mem.arrival);
        arrived_groups.insert(mem.group);

        std::vector<std::uint32_t> pick = live;
        origins.shuffle(std::span(pick));
        pick.resize(per_round);
        std::sort(pick.begin(), pick.end());
        for (const auto& g : arrived_groups) {
            for (std::uint32_t o : pick) {
                ov.issue_query(o, GroupId(g), mem.arrival + T / 2);
            }
        }
    }
    settle(ov, opt);
    finish_overhead(m, ov);
    note_false_positives(s, ov, m);
    collect(ov, members, prep.positions, prep.D, 0.0, m);
    return m;
}

std::vector<DelayPoint> perturb(std::span<const DelayPoint> positions, double offset, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<DelayPoint> out;
    out.reserve(positions.size());
    for (const auto& p : positions) {
        if (p.dim() != 2) {
            throw DimensionError("coordinate offsets are defined for two-dimensional data only");
        }
        const double theta = 2.0 * std::numbers::pi * rng.uniform01();
        const double len = offset * (0.5 + rng.uniform01());
        out.emplace_back(DelayPoint{p[0] + len * std::cos(theta), p[1] + len * std::sin(theta)});
    }
    return out;
}

RunMetrics run_offset_sweep(const Scenario& s, const RunOptions& opt) {
    return run_offset_sweep(s, prepare_overlay(s, opt), opt);
}

RunMetrics run_offset_sweep(const Scenario& s, const PreparedOverlay& prep, const RunOptions& opt) {
    if (s.offsets.empty()) {
        throw ConfigError("offset sweep needs at least one offset");
    }
    Overlay registered = branch(s, prep, opt);
    const auto members = place_members(s, prep.positions.size());
    RunMetrics m = base_metrics(s, prep, members.size());

    register_all(registered, members, prep.positions, registered.sim().now());
    settle(registered, opt);
    finish_overhead(m, registered);
    note_false_positives(s, registered, m);

    const std::uint64_t offset_seed = Rng(s.seed).fork(kOffsetSalt).next_u64();
    for (double o : s.offsets) {
        Overlay ov(registered);
        const auto moved = perturb(prep.positions, o, offset_seed);
        const double D = s.offset_recompute_d ? average_pairwise_delay(moved) : prep.D;
        m.metadata["average_delay_ms@" + num(o)] = num(D);
        const double now = ov.sim().now();
        ov.sim().perturb_positions(moved, now);
        query_all(ov, s.groups, now);
        settle(ov, opt);
        collect(ov, members, moved, D, o, m);
    }
    return m;
}

RunMetrics run_scenario(const Scenario& s, const RunOptions& opt) {
    s.validate();
    if (!s.offsets.empty()) {
        return run_offset_sweep(s, opt);
    }
    return s.mode == Mode::synchronous ? run_synchronous(s, opt) : run_asynchronous(s, opt);
}

std::size_t count_false_positive_entries(const Overlay& ov, std::span<const std::string> groups) {
    std::size_t count = 0;
    for (std::uint32_t n : ov.live()) {
        const Node& node = ov.sim().node(n);
        if (!node.config().track_exact_sets) {
            throw Error("false-positive accounting needs exact set tracking");
        }
        auto check = [&](const Announcement& a) {
            for (const auto& g : groups) {
                const GroupId id(g);
                if (a.filter.contains(id) && !a.exact.contains(id)) {
                    ++count;
                }
            }
        };
        check(node.local_announcement());
        for (const auto& e : node.table()) {
            check(e.received);
        }
    }
    return count;
}

}  // namespace doat
