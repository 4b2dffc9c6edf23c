#pragma once

// DOAT overlay node.
//
// Every handler is a transition (state, message, now) -> outgoing messages.
// Nodes never read a clock or touch shared state; the simulator decides when
// handlers run and delivers what they emit.
//
// Routing table: entry 0 is the local registry, followed by neighbours in
// ascending ring distance (ties: clockwise side first, then NodeId). The
// filter announced to a neighbour at distance d is the union of the local
// registry filter and the filters received from neighbours strictly closer
// than d. Queries take the first matching entry, so hop lengths shrink along
// every path in a settled overlay.
//
// "Closer" compares distance classes by default: a link's class is the
// nearest power of two of its ring distance, which is the probe level it was
// built for. Comparing raw distances lets announcement areas grow along
// chains of links that are only marginally shorter than one another (two
// fingers of the same level on opposite sides, say), which inflates paths.

#include "doat/bloom.hpp"
#include "doat/delay_space.hpp"
#include "doat/sfc.hpp"

#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace doat {

/// Overlay identity: ring position plus a unique serial (join order) that
/// breaks ties. Ordering is lexicographic, which is also ring order.
struct NodeId {
    RingCoord ring;
    std::uint32_t serial = 0;

    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Clockwise position of `to` as seen from `from`: smaller keys come first
/// when walking clockwise. `from` itself sorts last.
std::pair<double, std::uint32_t> clockwise_key(const NodeId& from, const NodeId& to) noexcept;

/// True when `x` lies strictly inside the clockwise arc from `a` to `b`.
bool between_clockwise(const NodeId& a, const NodeId& x, const NodeId& b) noexcept;

struct MemberRecord {
    GroupId group;
    std::uint64_t address = 0;
    DelayPoint position;
    RingCoord ring;

    friend bool operator==(const MemberRecord&, const MemberRecord&) = default;
};

/// Direct neighbours of a node in both directions, as advertised to others.
struct Alternates {
    std::optional<NodeId> anticlockwise;
    std::optional<NodeId> clockwise;

    friend bool operator==(const Alternates&, const Alternates&) = default;
};

/// A routing announcement. `exact` mirrors the filter with the true group set
/// when exact-set shadowing is enabled; it is empty otherwise.
struct Announcement {
    BloomFilter filter{BloomParams{}};
    std::set<GroupId> exact;

    friend bool operator==(const Announcement&, const Announcement&) = default;
};

enum class ProbePurpose : std::uint8_t { join, reprobe };

struct ProbeTag {
    Direction dir = Direction::clockwise;
    double dist = 0.5;
    ProbePurpose purpose = ProbePurpose::join;

    friend bool operator==(const ProbeTag&, const ProbeTag&) = default;
};

struct JoinProbe {
    RingCoord target;
    NodeId joiner;
    ProbeTag tag;
    std::uint32_t ttl = 0;
};

/// Sent by a node that has added the receiver as a neighbour. `tag` is set
/// when it answers a probe; without it the message is a plain link request.
struct JoinAccept {
    std::optional<ProbeTag> tag;
    Alternates alternates;
};

struct Register {
    MemberRecord member;
    std::uint32_t ttl = 0;
};

struct RouteUpdate {
    Announcement announcement;
    Alternates alternates;
};

struct QueryState {
    std::uint64_t query_id = 0;
    GroupId group{"?"};
    NodeId origin;
    std::vector<NodeId> path;       // visited nodes, origin first
    std::vector<double> hop_dists;  // ring distance of each hop taken
    std::uint32_t ttl = 64;
};

struct Query {
    QueryState state;
};

enum class QueryStatus : std::uint8_t { found, not_found, ttl_exhausted };

std::string_view to_string(QueryStatus s) noexcept;

struct QueryResponse {
    std::uint64_t query_id = 0;
    GroupId group{"?"};
    QueryStatus status = QueryStatus::not_found;
    std::optional<MemberRecord> member;
    std::vector<NodeId> path;
    std::vector<double> hop_dists;
};

struct Leave {
    Alternates alternates;
};

using Message = std::variant<JoinProbe, JoinAccept, Register, RouteUpdate, Query, QueryResponse, Leave>;

std::string_view message_kind(const Message& m) noexcept;
/// Canonical one-line rendering of the payload, used for trace digests.
std::string describe(const Message& m);

struct Outgoing {
    std::uint32_t dst = 0;  // destination serial
    Message message;
};

struct NodeOutput {
    std::vector<Outgoing> messages;
    std::optional<double> wake_at;
    std::vector<QueryResponse> completed;  // responses to queries this node originated
};

struct NodeConfig {
    BloomParams bloom;
    /// Minimum spacing of updates to one neighbour; 0 flushes synchronously
    /// and infinity sends only the first update.
    double update_interval_ms = 0.0;
    std::uint32_t query_ttl = 64;
    std::uint32_t resolve_ttl = 64;
    bool track_exact_sets = false;
    /// Compare neighbours by distance class (nearest power of two) when
    /// deciding what is "closer"; false compares exact ring distances.
    bool distance_classes = true;
};

/// Nearest power-of-two level of a ring distance: round(-log2 d).
int distance_class(double dist);

struct NeighborEntry {
    NodeId id;
    double dist = 0.0;
    int dist_class = 0;
    Direction dir = Direction::clockwise;
    Announcement received;
    Alternates alternates;

    bool pending = false;
    bool ever_sent = false;
    double last_sent = 0.0;
};

struct NodeCounters {
    std::uint64_t route_updates_sent = 0;
    std::uint64_t ignored_updates = 0;
    std::uint64_t registrations_installed = 0;
    std::uint64_t queries_answered = 0;
    std::uint64_t reprobes = 0;
};

using Registry = std::map<GroupId, std::vector<MemberRecord>>;

class Node {
public:
    Node(NodeId id, DelayPoint position, NodeConfig config);

    const NodeId& id() const noexcept { return id_; }
    const DelayPoint& position() const noexcept { return position_; }
    const NodeConfig& config() const noexcept { return config_; }
    void set_resolve_ttl(std::uint32_t ttl) noexcept { config_.resolve_ttl = ttl; }
    void set_update_interval(double ms) noexcept { config_.update_interval_ms = ms; }

    // -- neighbour construction ------------------------------------------

    /// Begins joining through `bootstrap`, or joins alone when there is none.
    NodeOutput start_join(std::optional<std::uint32_t> bootstrap, double now);
    bool joined() const noexcept { return joined_; }
    /// Nodes added by this node's own probes (the set it built on join).
    const std::set<NodeId>& built_neighbors() const noexcept { return built_; }

    /// Greedy step toward `target`: the neighbour strictly closer than this
    /// node, or nullopt when this node is the closest it knows of.
    std::optional<NodeId> next_hop(RingCoord target, std::optional<std::uint32_t> exclude = {}) const;

    // -- message handlers ------------------------------------------------

    NodeOutput handle(const NodeId& from, const Message& msg, double now);
    NodeOutput on_timer(double now);

    NodeOutput handle_register(const Register& reg, double now);
    NodeOutput handle_route_update(const NodeId& from, const RouteUpdate& upd, double now);
    NodeOutput handle_query(const QueryState& q, double now);

    /// Starts a query for `group` at this node.
    NodeOutput start_query(std::uint64_t query_id, const GroupId& group, double now);

    /// Graceful departure: tells every neighbour about our direct neighbours.
    /// The node is left with an empty table.
    NodeOutput handle_leave(double now);
    /// Replaces a failed neighbour with one of its advertised alternates, or
    /// re-probes its position when none is known.
    NodeOutput detect_failure_and_repair(std::uint32_t dead_serial, double now);

    /// Sends every pending update the throttle allows.
    NodeOutput maybe_flush_updates(double now);

    Announcement compute_announcement(const NeighborEntry& to) const;

    // -- inspection ------------------------------------------------------

    const std::vector<NeighborEntry>& table() const noexcept { return table_; }
    const NeighborEntry* find_neighbor(std::uint32_t serial) const;
    const Announcement& local_announcement() const noexcept { return local_; }
    const Registry& registry() const noexcept { return registry_; }
    const NodeCounters& counters() const noexcept { return counters_; }
    Alternates alternates() const;
    bool has_pending() const;

    /// Hands over all member records, emptying the registry.
    std::vector<MemberRecord> take_registry();

    /// Checks the ordering and distance invariants of the routing table.
    /// Returns an empty string when they hold.
    std::string check_invariants() const;

private:
    struct JoinSide {
        bool active = false;
        bool done = false;
        double dist = 0.0;
    };

    void flush(double now, NodeOutput& out);
    void send(NodeOutput& out, std::uint32_t dst, Message msg) const;
    bool add_neighbor(const NodeId& n);
    bool remove_neighbor(std::uint32_t serial);
    NeighborEntry* entry(std::uint32_t serial);
    void sort_table();
    void mark_all_pending();
    void mark_pending_farther_than(const NeighborEntry& from);
    bool closer(const NeighborEntry& a, const NeighborEntry& b) const;
    void mark_pending(std::uint32_t serial);
    void refresh_immediates(const Alternates& before);
    void adopt_alternate(const Alternates& alts, std::uint32_t departed, NodeOutput& out);
    Announcement empty_announcement() const;

    void on_join_probe(const JoinProbe& p, NodeOutput& out);
    void on_join_accept(const NodeId& from, const JoinAccept& a, NodeOutput& out);
    void on_leave(const NodeId& from, const Leave& l, NodeOutput& out);
    void on_query_response(const QueryResponse& r, NodeOutput& out);
    void observe_for_join(const NodeId& x, const Alternates& alts);
    void continue_join(Direction dir, const NodeId& resolved, NodeOutput& out);
    void send_probe(Direction dir, double dist, NodeOutput& out);
    void finish_join_if_done(NodeOutput& out);
    void respond(const QueryState& q, QueryStatus status, std::optional<MemberRecord> member, NodeOutput& out);

    NodeId id_;
    DelayPoint position_;
    NodeConfig config_;

    Registry registry_;
    Announcement local_;
    std::vector<NeighborEntry> table_;
    NodeCounters counters_;
    std::optional<double> scheduled_wake_;

    bool joined_ = false;
    std::optional<std::uint32_t> bootstrap_;
    JoinSide join_cw_;
    JoinSide join_acw_;
    std::optional<NodeId> known_pred_;
    std::optional<NodeId> known_succ_;
    std::set<NodeId> built_;
};

}  // namespace doat
