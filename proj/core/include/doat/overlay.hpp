#pragma once

// Scenario-level driver around the simulator: builds the overlay one join
// at a time, registers members, issues queries and applies churn.

#include "doat/node.hpp"
#include "doat/rng.hpp"
#include "doat/sfc.hpp"
#include "doat/sim.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace doat {

struct OverlayParams {
    BoundingBox box = BoundingBox::cube(2, -100.0, 100.0);
    CurveParams curve;
    NodeConfig node;
    std::uint64_t seed = 1;
    /// Budget for each settle phase, in simulated milliseconds.
    double max_time = 1e7;
};

struct QueryRecord {
    std::uint64_t query_id = 0;
    std::uint32_t origin = 0;
    GroupId group{"?"};
    double issued_at = 0.0;
    std::optional<QueryResponse> response;
    double completed_at = 0.0;
};

struct Resolution {
    NodeId node;
    std::uint32_t hops = 0;
};

/// Hop budget for greedy resolution in an overlay of `n` nodes.
std::uint32_t resolve_ttl_for(std::size_t n);

class Overlay {
public:
    Overlay(std::vector<DelayPoint> positions, OverlayParams params);
    /// Copies are independent overlays; an idle one can be copied to branch
    /// several experiments off the same build.
    Overlay(const Overlay& other);
    Overlay(Overlay&& other) noexcept;
    Overlay& operator=(const Overlay&) = delete;
    Overlay& operator=(Overlay&&) = delete;

    Simulator& sim() noexcept { return sim_; }
    const Simulator& sim() const noexcept { return sim_; }
    const OverlayParams& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return sim_.size(); }

    RingCoord ring_of(const DelayPoint& p) const;
    std::vector<std::uint32_t> live() const;
    const NodeId& id_of(std::uint32_t serial) const { return sim_.node(serial).id(); }

    /// Joins `serial` through a seeded random live bootstrap and settles.
    void join(std::uint32_t serial);
    /// Joins every node in serial order.
    void build();

    /// Lets all in-flight traffic settle. Throws NonQuiescentError when the
    /// time budget runs out.
    RunStatus settle();

    MemberRecord make_member(const GroupId& group, std::uint64_t address, const DelayPoint& position) const;
    /// Sends a registration for `m` into the overlay at `entry` at time `at`.
    void register_member(const MemberRecord& m, std::uint32_t entry, double at);

    /// Starts a query at `origin` at time `at`; returns its id.
    std::uint64_t issue_query(std::uint32_t origin, const GroupId& group, double at);
    const std::map<std::uint64_t, QueryRecord>& queries() const noexcept { return queries_; }
    void clear_queries() { queries_.clear(); }

    /// Graceful leave, then re-registration of the node's members.
    void leave(std::uint32_t serial);
    /// Crash without goodbye, detected by the node's neighbours.
    void fail(std::uint32_t serial);
    /// Moves a node. When its ring coordinate shifts by more than
    /// `threshold` it leaves and rejoins at the new position; returns
    /// whether that happened.
    bool reinsert_on_drift(std::uint32_t serial, const DelayPoint& new_position, double threshold);

    /// Greedy walk over the current tables (no messages).
    Resolution resolve_target(std::uint32_t start, RingCoord target) const;
    /// Exhaustive scan: the live node closest to `target` on the ring.
    NodeId nearest_on_ring(RingCoord target) const;

private:
    void bind_callbacks();
    std::uint32_t pick_bootstrap(std::uint32_t joiner);

    OverlayParams params_;
    Simulator sim_;
    Rng rng_;
    std::uint64_t next_query_ = 1;
    std::map<std::uint64_t, QueryRecord> queries_;
};

}  // namespace doat
