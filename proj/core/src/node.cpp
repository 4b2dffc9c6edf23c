#include "doat/node.hpp"

#include "doat/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

namespace doat {

std::pair<double, std::uint32_t> clockwise_key(const NodeId& from, const NodeId& to) noexcept {
    double off = clockwise_offset(from.ring, to.ring);
    if (off == 0.0 && to.serial <= from.serial) {
        off = 1.0;
    }
    return {off, to.serial};
}

bool between_clockwise(const NodeId& a, const NodeId& x, const NodeId& b) noexcept {
    if (x == a) {
        return false;
    }
    return clockwise_key(a, x) < clockwise_key(a, b);
}

std::string_view to_string(QueryStatus s) noexcept {
    switch (s) {
    case QueryStatus::found:
        return "found";
    case QueryStatus::not_found:
        return "not_found";
    case QueryStatus::ttl_exhausted:
        return "ttl_exhausted";
    }
    return "?";
}

namespace {

void put_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

void put_id(std::string& out, const NodeId& id) {
    put_double(out, id.ring.value());
    out += ':';
    out += std::to_string(id.serial);
}

void put_opt_id(std::string& out, const std::optional<NodeId>& id) {
    if (id) {
        put_id(out, *id);
    } else {
        out += '-';
    }
}

void put_alternates(std::string& out, const Alternates& a) {
    out += "alt=";
    put_opt_id(out, a.anticlockwise);
    out += ',';
    put_opt_id(out, a.clockwise);
}

void put_bytes(std::string& out, std::span<const std::uint8_t> bytes) {
    static constexpr char hex[] = "0123456789abcdef";
    for (std::uint8_t b : bytes) {
        out += hex[b >> 4];
        out += hex[b & 15];
    }
}

void put_tag(std::string& out, const ProbeTag& t) {
    out += to_string(t.dir);
    out += '/';
    put_double(out, t.dist);
    out += t.purpose == ProbePurpose::join ? "/join" : "/reprobe";
}

void put_member(std::string& out, const MemberRecord& m) {
    out += m.group.bytes();
    out += '@';
    out += std::to_string(m.address);
    out += '/';
    put_double(out, m.ring.value());
}

void put_path(std::string& out, const std::vector<NodeId>& path, const std::vector<double>& hops) {
    out += "path=";
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i) {
            out += '>';
        }
        out += std::to_string(path[i].serial);
    }
    out += " hops=";
    for (std::size_t i = 0; i < hops.size(); ++i) {
        if (i) {
            out += ',';
        }
        put_double(out, hops[i]);
    }
}

}  // namespace

std::string_view message_kind(const Message& m) noexcept {
    static constexpr std::string_view names[] = {"JoinProbe", "JoinAccept", "Register", "RouteUpdate",
                                                 "Query",     "QueryResponse", "Leave"};
    return names[m.index()];
}

std::string describe(const Message& m) {
    std::string out;
    std::visit(
        [&out](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, JoinProbe>) {
                out += "target=";
                put_double(out, msg.target.value());
                out += " joiner=";
                put_id(out, msg.joiner);
                out += " tag=";
                put_tag(out, msg.tag);
                out += " ttl=" + std::to_string(msg.ttl);
            } else if constexpr (std::is_same_v<T, JoinAccept>) {
                out += "tag=";
                if (msg.tag) {
                    put_tag(out, *msg.tag);
                } else {
                    out += "link";
                }
                out += ' ';
                put_alternates(out, msg.alternates);
            } else if constexpr (std::is_same_v<T, Register>) {
                put_member(out, msg.member);
                out += " ttl=" + std::to_string(msg.ttl);
            } else if constexpr (std::is_same_v<T, RouteUpdate>) {
                out += "bloom=";
                put_bytes(out, msg.announcement.filter.bytes());
                out += " exact=";
                for (const auto& g : msg.announcement.exact) {
                    out += g.bytes();
                    out += ';';
                }
                out += ' ';
                put_alternates(out, msg.alternates);
            } else if constexpr (std::is_same_v<T, Query>) {
                out += "q=" + std::to_string(msg.state.query_id) + " group=" + msg.state.group.bytes() + ' ';
                put_path(out, msg.state.path, msg.state.hop_dists);
                out += " ttl=" + std::to_string(msg.state.ttl);
            } else if constexpr (std::is_same_v<T, QueryResponse>) {
                out += "q=" + std::to_string(msg.query_id) + " group=" + msg.group.bytes() + " status=";
                out += to_string(msg.status);
                out += " member=";
                if (msg.member) {
                    put_member(out, *msg.member);
                } else {
                    out += '-';
                }
                out += ' ';
                put_path(out, msg.path, msg.hop_dists);
            } else if constexpr (std::is_same_v<T, Leave>) {
                put_alternates(out, msg.alternates);
            }
        },
        m);
    return out;
}

Node::Node(NodeId id, DelayPoint position, NodeConfig config)
    : id_(id), position_(std::move(position)), config_(config), local_{BloomFilter(config.bloom), {}} {}

// ---------------------------------------------------------------------------
// table maintenance

NeighborEntry* Node::entry(std::uint32_t serial) {
    for (auto& e : table_) {
        if (e.id.serial == serial) {
            return &e;
        }
    }
    return nullptr;
}

const NeighborEntry* Node::find_neighbor(std::uint32_t serial) const {
    for (const auto& e : table_) {
        if (e.id.serial == serial) {
            return &e;
        }
    }
    return nullptr;
}

int distance_class(double dist) {
    if (!(dist > 0.0)) {
        return std::numeric_limits<int>::max();
    }
    return static_cast<int>(std::lround(-std::log2(dist)));
}

bool Node::closer(const NeighborEntry& a, const NeighborEntry& b) const {
    if (config_.distance_classes) {
        return a.dist_class > b.dist_class;
    }
    return a.dist < b.dist;
}

namespace {

auto table_order(const NeighborEntry& e) {
    return std::make_tuple(e.dist, e.dir == Direction::clockwise ? 0 : 1, e.id);
}

void place(NeighborEntry& e, const NodeId& self) {
    const auto key = clockwise_key(self, e.id);
    e.dist = ring_distance(self.ring, e.id.ring);
    e.dist_class = distance_class(e.dist);
    e.dir = key.first <= 0.5 ? Direction::clockwise : Direction::anticlockwise;
}

}  // namespace

void Node::sort_table() {
    std::sort(table_.begin(), table_.end(),
              [](const NeighborEntry& a, const NeighborEntry& b) { return table_order(a) < table_order(b); });
}

bool Node::add_neighbor(const NodeId& n) {
    if (n.serial == id_.serial) {
        return false;
    }
    if (auto* e = entry(n.serial)) {
        if (e->id != n) {
            e->id = n;
            place(*e, id_);
            sort_table();
        }
        return false;
    }
    NeighborEntry e{};
    e.id = n;
    e.received = empty_announcement();
    place(e, id_);
    table_.push_back(std::move(e));
    sort_table();
    return true;
}

bool Node::remove_neighbor(std::uint32_t serial) {
    auto it = std::find_if(table_.begin(), table_.end(),
                           [serial](const NeighborEntry& e) { return e.id.serial == serial; });
    if (it == table_.end()) {
        return false;
    }
    table_.erase(it);
    return true;
}

Alternates Node::alternates() const {
    Alternates a;
    const NeighborEntry* succ = nullptr;
    const NeighborEntry* pred = nullptr;
    for (const auto& e : table_) {
        const auto key = clockwise_key(id_, e.id);
        if (!succ || key < clockwise_key(id_, succ->id)) {
            succ = &e;
        }
        if (!pred || key > clockwise_key(id_, pred->id)) {
            pred = &e;
        }
    }
    if (pred) {
        a.anticlockwise = pred->id;
    }
    if (succ) {
        a.clockwise = succ->id;
    }
    return a;
}

Announcement Node::empty_announcement() const {
    return Announcement{BloomFilter(config_.bloom), {}};
}

void Node::mark_pending(std::uint32_t serial) {
    if (auto* e = entry(serial)) {
        e->pending = true;
    }
}

void Node::mark_all_pending() {
    for (auto& e : table_) {
        e.pending = true;
    }
}

void Node::mark_pending_farther_than(const NeighborEntry& from) {
    for (auto& e : table_) {
        if (closer(from, e)) {
            e.pending = true;
        }
    }
}

void Node::refresh_immediates(const Alternates& before) {
    const Alternates after = alternates();
    if (after == before) {
        return;
    }
    for (const auto* id : {&before.anticlockwise, &before.clockwise, &after.anticlockwise, &after.clockwise}) {
        if (*id) {
            mark_pending((*id)->serial);
        }
    }
}

bool Node::has_pending() const {
    return std::any_of(table_.begin(), table_.end(), [](const NeighborEntry& e) { return e.pending; });
}

std::optional<NodeId> Node::next_hop(RingCoord target, std::optional<std::uint32_t> exclude) const {
    auto best_key = std::make_pair(ring_distance(id_.ring, target), id_);
    std::optional<NodeId> best;
    for (const auto& e : table_) {
        if (exclude && e.id.serial == *exclude) {
            continue;
        }
        auto key = std::make_pair(ring_distance(e.id.ring, target), e.id);
        if (key < best_key) {
            best_key = key;
            best = e.id;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// announcements and throttled updates


Announcement Node::compute_announcement(const NeighborEntry& to) const {
    Announcement a = local_;
    for (const auto& e : table_) {
        if (closer(e, to)) {
            a.filter.merge(e.received.filter);
            a.exact.insert(e.received.exact.begin(), e.received.exact.end());
        }
    }
    return a;
}

void Node::send(NodeOutput& out, std::uint32_t dst, Message msg) const {
    out.messages.push_back(Outgoing{dst, std::move(msg)});
}

void Node::flush(double now, NodeOutput& out) {
    if (!has_pending()) {
        return;
    }
    const double interval = config_.update_interval_ms;
    const Alternates alts = alternates();
    std::optional<double> wake;

    // Entries are visited in table order; `acc` holds the local filter plus
    // everything received from strictly closer neighbours.
    Announcement acc = local_;
    std::size_t i = 0;
    while (i < table_.size()) {
        std::size_t j = i;
        while (j < table_.size() && !closer(table_[i], table_[j])) {
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) {
            auto& e = table_[k];
            if (!e.pending) {
                continue;
            }
            const bool allowed = interval <= 0.0 || !e.ever_sent || now >= e.last_sent + interval;
            if (allowed) {
                send(out, e.id.serial, RouteUpdate{acc, alts});
                ++counters_.route_updates_sent;
                e.pending = false;
                e.ever_sent = true;
                e.last_sent = now;
            } else if (std::isfinite(interval)) {
                const double due = e.last_sent + interval;
                wake = wake ? std::min(*wake, due) : due;
            }
        }
        for (std::size_t k = i; k < j; ++k) {
            acc.filter.merge(table_[k].received.filter);
            acc.exact.insert(table_[k].received.exact.begin(), table_[k].received.exact.end());
        }
        i = j;
    }

    if (wake && (!scheduled_wake_ || *wake < *scheduled_wake_ || *scheduled_wake_ < now)) {
        scheduled_wake_ = *wake;
        out.wake_at = *wake;
    }
}

NodeOutput Node::maybe_flush_updates(double now) {
    NodeOutput out;
    flush(now, out);
    return out;
}

NodeOutput Node::on_timer(double now) {
    if (scheduled_wake_ && *scheduled_wake_ <= now) {
        scheduled_wake_.reset();
    }
    return maybe_flush_updates(now);
}

// ---------------------------------------------------------------------------
// join

NodeOutput Node::start_join(std::optional<std::uint32_t> bootstrap, double /*now*/) {
    NodeOutput out;
    if (!bootstrap || *bootstrap == id_.serial) {
        joined_ = true;
        return out;
    }
    bootstrap_ = bootstrap;
    joined_ = false;
    join_cw_ = JoinSide{};
    join_acw_ = JoinSide{};
    known_pred_.reset();
    known_succ_.reset();
    send_probe(Direction::clockwise, 0.5, out);
    return out;
}

void Node::send_probe(Direction dir, double dist, NodeOutput& out) {
    JoinSide& side = dir == Direction::clockwise ? join_cw_ : join_acw_;
    side.active = true;
    side.dist = dist;
    JoinProbe p{ring_target(id_.ring, dist, dir), id_, ProbeTag{dir, dist, ProbePurpose::join}, config_.resolve_ttl};
    send(out, *bootstrap_, p);
}

void Node::observe_for_join(const NodeId& x, const Alternates& alts) {
    if (known_pred_ && known_succ_) {
        return;
    }
    if (!alts.anticlockwise && !alts.clockwise) {
        known_pred_ = x;
        known_succ_ = x;
        return;
    }
    const NodeId cw = alts.clockwise.value_or(*alts.anticlockwise);
    const NodeId acw = alts.anticlockwise.value_or(*alts.clockwise);
    if (between_clockwise(x, id_, cw) || cw == x) {
        known_pred_ = x;
        known_succ_ = cw;
    } else if (between_clockwise(acw, id_, x)) {
        known_pred_ = acw;
        known_succ_ = x;
    }
}

void Node::continue_join(Direction dir, const NodeId& resolved, NodeOutput& out) {
    JoinSide& side = dir == Direction::clockwise ? join_cw_ : join_acw_;
    const double next = side.dist / 2.0;
    bool stop = next < 0x1.0p-40;
    if (known_pred_ && known_succ_) {
        const NodeId& imm = dir == Direction::clockwise ? *known_succ_ : *known_pred_;
        const double gap = dir == Direction::clockwise ? clockwise_offset(id_.ring, imm.ring)
                                                       : clockwise_offset(imm.ring, id_.ring);
        stop = stop || resolved == imm || next <= gap;
    }
    if (stop) {
        side.active = false;
        side.done = true;
    } else {
        send_probe(dir, next, out);
    }
}

void Node::finish_join_if_done(NodeOutput& out) {
    if (joined_ || !join_cw_.done || !join_acw_.done) {
        return;
    }
    for (const auto& imm : {known_pred_, known_succ_}) {
        if (!imm || imm->serial == id_.serial) {
            continue;
        }
        const Alternates before = alternates();
        if (add_neighbor(*imm)) {
            built_.insert(*imm);
            send(out, imm->serial, JoinAccept{std::nullopt, alternates()});
            refresh_immediates(before);
        }
    }
    joined_ = true;
}

void Node::on_join_probe(const JoinProbe& p, NodeOutput& out) {
    if (auto hop = next_hop(p.target, p.joiner.serial)) {
        if (p.ttl == 0) {
            throw InvariantError("target resolution exceeded its hop budget");
        }
        JoinProbe fwd = p;
        fwd.ttl = p.ttl - 1;
        send(out, hop->serial, fwd);
        return;
    }
    Alternates alts = alternates();
    if (alts.anticlockwise && alts.anticlockwise->serial == p.joiner.serial) {
        alts.anticlockwise.reset();
    }
    if (alts.clockwise && alts.clockwise->serial == p.joiner.serial) {
        alts.clockwise.reset();
    }
    const Alternates before = alternates();
    if (add_neighbor(p.joiner)) {
        if (!compute_announcement(*entry(p.joiner.serial)).filter.empty()) {
            mark_pending(p.joiner.serial);
        }
        refresh_immediates(before);
    }
    send(out, p.joiner.serial, JoinAccept{p.tag, alts});
}

void Node::on_join_accept(const NodeId& from, const JoinAccept& a, NodeOutput& out) {
    const Alternates before = alternates();
    if (add_neighbor(from)) {
        if (!compute_announcement(*entry(from.serial)).filter.empty()) {
            mark_pending(from.serial);
        }
        refresh_immediates(before);
    }
    if (auto* e = entry(from.serial)) {
        e->alternates = a.alternates;
    }
    if (!a.tag) {
        return;
    }
    if (a.tag->purpose == ProbePurpose::reprobe) {
        return;
    }
    if (joined_) {
        return;
    }
    built_.insert(from);
    observe_for_join(from, a.alternates);
    if (a.tag->dist == 0.5) {
        // The antipodal probe serves both directions.
        join_cw_.dist = join_acw_.dist = 0.5;
        continue_join(Direction::clockwise, from, out);
        continue_join(Direction::anticlockwise, from, out);
    } else {
        continue_join(a.tag->dir, from, out);
    }
    finish_join_if_done(out);
}

// ---------------------------------------------------------------------------
// registration

NodeOutput Node::handle_register(const Register& reg, double now) {
    NodeOutput out;
    if (auto hop = next_hop(reg.member.ring)) {
        if (reg.ttl == 0) {
            throw InvariantError("registration exceeded its hop budget");
        }
        Register fwd = reg;
        fwd.ttl = reg.ttl - 1;
        send(out, hop->serial, fwd);
        return out;
    }
    auto& records = registry_[reg.member.group];
    auto it = std::find_if(records.begin(), records.end(),
                           [&](const MemberRecord& m) { return m.address == reg.member.address; });
    if (it != records.end()) {
        *it = reg.member;
    } else {
        records.push_back(reg.member);
    }
    ++counters_.registrations_installed;
    bool changed = local_.filter.insert(reg.member.group);
    if (config_.track_exact_sets) {
        changed |= local_.exact.insert(reg.member.group).second;
    }
    if (changed) {
        mark_all_pending();
    }
    flush(now, out);
    return out;
}

std::vector<MemberRecord> Node::take_registry() {
    std::vector<MemberRecord> all;
    for (auto& [group, records] : registry_) {
        all.insert(all.end(), records.begin(), records.end());
    }
    registry_.clear();
    local_ = empty_announcement();
    return all;
}

NodeOutput Node::handle_route_update(const NodeId& from, const RouteUpdate& upd, double now) {
    NodeOutput out;
    auto* e = entry(from.serial);
    if (!e || e->id != from) {
        ++counters_.ignored_updates;
        return out;
    }
    e->alternates = upd.alternates;
    if (!(e->received == upd.announcement)) {
        e->received = upd.announcement;
        mark_pending_farther_than(*e);
    }
    flush(now, out);
    return out;
}

// ---------------------------------------------------------------------------
// queries

NodeOutput Node::start_query(std::uint64_t query_id, const GroupId& group, double now) {
    QueryState q;
    q.query_id = query_id;
    q.group = group;
    q.origin = id_;
    q.path = {id_};
    q.ttl = config_.query_ttl;
    return handle_query(q, now);
}

void Node::respond(const QueryState& q, QueryStatus status, std::optional<MemberRecord> member, NodeOutput& out) {
    QueryResponse r{q.query_id, q.group, status, std::move(member), q.path, q.hop_dists};
    send(out, q.origin.serial, std::move(r));
}

NodeOutput Node::handle_query(const QueryState& q, double /*now*/) {
    NodeOutput out;
    if (auto it = registry_.find(q.group); it != registry_.end() && !it->second.empty()) {
        const MemberRecord* best = nullptr;
        for (const auto& m : it->second) {
            if (!best || std::make_pair(ring_distance(m.ring, q.origin.ring), m.address) <
                             std::make_pair(ring_distance(best->ring, q.origin.ring), best->address)) {
                best = &m;
            }
        }
        ++counters_.queries_answered;
        respond(q, QueryStatus::found, *best, out);
        return out;
    }
    for (const auto& e : table_) {
        if (!e.received.filter.contains(q.group)) {
            continue;
        }
        const bool visited = std::any_of(q.path.begin(), q.path.end(),
                                         [&](const NodeId& v) { return v.serial == e.id.serial; });
        if (visited) {
            continue;
        }
        if (q.ttl == 0) {
            respond(q, QueryStatus::ttl_exhausted, std::nullopt, out);
            return out;
        }
        QueryState fwd = q;
        fwd.path.push_back(e.id);
        fwd.hop_dists.push_back(e.dist);
        fwd.ttl = q.ttl - 1;
        send(out, e.id.serial, Query{std::move(fwd)});
        return out;
    }
    respond(q, QueryStatus::not_found, std::nullopt, out);
    return out;
}

void Node::on_query_response(const QueryResponse& r, NodeOutput& out) {
    out.completed.push_back(r);
}

// ---------------------------------------------------------------------------
// departure and failure

void Node::adopt_alternate(const Alternates& alts, std::uint32_t departed, NodeOutput& out) {
    std::optional<NodeId> pick;
    for (const auto& c : {alts.anticlockwise, alts.clockwise}) {
        if (!c || c->serial == id_.serial || c->serial == departed) {
            continue;
        }
        if (!pick || std::make_pair(ring_distance(id_.ring, c->ring), *c) <
                         std::make_pair(ring_distance(id_.ring, pick->ring), *pick)) {
            pick = c;
        }
    }
    if (pick && add_neighbor(*pick)) {
        send(out, pick->serial, JoinAccept{std::nullopt, alternates()});
    }
}

NodeOutput Node::handle_leave(double /*now*/) {
    NodeOutput out;
    const Alternates alts = alternates();
    for (const auto& e : table_) {
        send(out, e.id.serial, Leave{alts});
    }
    table_.clear();
    joined_ = false;
    scheduled_wake_.reset();
    return out;
}

void Node::on_leave(const NodeId& from, const Leave& l, NodeOutput& out) {
    if (!entry(from.serial)) {
        return;
    }
    const Alternates before = alternates();
    remove_neighbor(from.serial);
    adopt_alternate(l.alternates, from.serial, out);
    mark_all_pending();
    refresh_immediates(before);
}

NodeOutput Node::detect_failure_and_repair(std::uint32_t dead_serial, double now) {
    NodeOutput out;
    auto* e = entry(dead_serial);
    if (!e) {
        return out;
    }
    const Alternates stored = e->alternates;
    const double dist = e->dist;
    const Direction dir = e->dir;
    const Alternates before = alternates();
    remove_neighbor(dead_serial);

    const bool usable = (stored.anticlockwise && stored.anticlockwise->serial != id_.serial &&
                         stored.anticlockwise->serial != dead_serial) ||
                        (stored.clockwise && stored.clockwise->serial != id_.serial &&
                         stored.clockwise->serial != dead_serial);
    if (usable) {
        adopt_alternate(stored, dead_serial, out);
    } else if (!table_.empty() && dist > 0.0) {
        ++counters_.reprobes;
        JoinProbe p{ring_target(id_.ring, dist, dir), id_, ProbeTag{dir, dist, ProbePurpose::reprobe},
                    config_.resolve_ttl};
        send(out, table_.front().id.serial, p);
    }
    mark_all_pending();
    refresh_immediates(before);
    flush(now, out);
    return out;
}

// ---------------------------------------------------------------------------

NodeOutput Node::handle(const NodeId& from, const Message& msg, double now) {
    NodeOutput out;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, JoinProbe>) {
                on_join_probe(m, out);
            } else if constexpr (std::is_same_v<T, JoinAccept>) {
                on_join_accept(from, m, out);
            } else if constexpr (std::is_same_v<T, Register>) {
                out = handle_register(m, now);
            } else if constexpr (std::is_same_v<T, RouteUpdate>) {
                out = handle_route_update(from, m, now);
            } else if constexpr (std::is_same_v<T, Query>) {
                out = handle_query(m.state, now);
            } else if constexpr (std::is_same_v<T, QueryResponse>) {
                on_query_response(m, out);
            } else if constexpr (std::is_same_v<T, Leave>) {
                on_leave(from, m, out);
            }
        },
        msg);
    if (!std::holds_alternative<Register>(msg) && !std::holds_alternative<RouteUpdate>(msg)) {
        flush(now, out);
    }
    return out;
}

std::string Node::check_invariants() const {
    for (std::size_t i = 0; i < table_.size(); ++i) {
        const auto& e = table_[i];
        if (e.id.serial == id_.serial) {
            return "node lists itself as a neighbour";
        }
        if (e.dist != ring_distance(id_.ring, e.id.ring)) {
            return "stale ring distance for neighbour " + std::to_string(e.id.serial);
        }
        if (i > 0 && !(table_order(table_[i - 1]) < table_order(e))) {
            return "routing table out of order at entry " + std::to_string(i);
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (table_[j].id.serial == e.id.serial) {
                return "duplicate neighbour " + std::to_string(e.id.serial);
            }
        }
    }
    return {};
}

}  // namespace doat
