#include "doat/overlay.hpp"

#include "doat/error.hpp"

#include <bit>
#include <cmath>

namespace doat {

std::uint32_t resolve_ttl_for(std::size_t n) {
    const auto log2n = n <= 1 ? 0u : static_cast<std::uint32_t>(std::bit_width(n - 1));
    return 2 * log2n + 16;
}

Overlay::Overlay(std::vector<DelayPoint> positions, OverlayParams params)
    : params_(std::move(params)), sim_(std::move(positions)), rng_(params_.seed) {
    params_.box.validate();
    params_.curve.validate(params_.box.dim());
    params_.node.bloom.validate();
    bind_callbacks();
}

Overlay::Overlay(const Overlay& other)
    : params_(other.params_), sim_(other.sim_), rng_(other.rng_), next_query_(other.next_query_), queries_(other.queries_) {
    bind_callbacks();
}

Overlay::Overlay(Overlay&& other) noexcept
    : params_(std::move(other.params_)),
      sim_(std::move(other.sim_)),
      rng_(other.rng_),
      next_query_(other.next_query_),
      queries_(std::move(other.queries_)) {
    bind_callbacks();
}

void Overlay::bind_callbacks() {
    sim_.on_query_complete([this](const QueryResponse& r, std::uint32_t, double now) {
        auto it = queries_.find(r.query_id);
        if (it != queries_.end()) {
            it->second.response = r;
            it->second.completed_at = now;
        }
    });
}

RingCoord Overlay::ring_of(const DelayPoint& p) const {
    return ring_coordinate(p, params_.box, params_.curve);
}

std::vector<std::uint32_t> Overlay::live() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t s = 0; s < sim_.size(); ++s) {
        if (sim_.alive(s)) {
            out.push_back(s);
        }
    }
    return out;
}

std::uint32_t Overlay::pick_bootstrap(std::uint32_t joiner) {
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t s : live()) {
        if (s != joiner && sim_.node(s).joined()) {
            candidates.push_back(s);
        }
    }
    if (candidates.empty()) {
        return joiner;
    }
    return candidates[rng_.below(candidates.size())];
}

RunStatus Overlay::settle() {
    const RunStatus st = sim_.run_until_quiescent(sim_.now() + params_.max_time);
    if (!st.quiescent) {
        throw NonQuiescentError("overlay did not settle within the time budget");
    }
    return st;
}

void Overlay::join(std::uint32_t serial) {
    if (serial >= sim_.size()) {
        throw Error("join: unknown node " + std::to_string(serial));
    }
    NodeConfig cfg = params_.node;
    cfg.resolve_ttl = resolve_ttl_for(live().size() + 1);
    const DelayPoint& pos = sim_.position(serial);
    Node& n = sim_.install(Node(NodeId{ring_of(pos), serial}, pos, cfg));
    const std::uint32_t boot = pick_bootstrap(serial);
    for (std::uint32_t s : live()) {
        sim_.node(s).set_resolve_ttl(cfg.resolve_ttl);
    }
    sim_.dispatch(serial, n.start_join(boot == serial ? std::nullopt : std::optional(boot), sim_.now()));
    settle();
    if (!sim_.node(serial).joined()) {
        throw InvariantError("node " + std::to_string(serial) + " did not complete its join");
    }
}

void Overlay::build() {
    for (std::uint32_t s = 0; s < sim_.size(); ++s) {
        join(s);
    }
}

MemberRecord Overlay::make_member(const GroupId& group, std::uint64_t address, const DelayPoint& position) const {
    return MemberRecord{group, address, position, ring_of(position)};
}

void Overlay::register_member(const MemberRecord& m, std::uint32_t entry, double at) {
    const auto ttl = resolve_ttl_for(live().size());
    sim_.inject(entry, Register{m, ttl}, at);
}

std::uint64_t Overlay::issue_query(std::uint32_t origin, const GroupId& group, double at) {
    const std::uint64_t id = next_query_++;
    queries_.emplace(id, QueryRecord{id, origin, group, at, std::nullopt, 0.0});
    sim_.schedule(at, [origin, group, id](Simulator& sim) {
        if (sim.alive(origin)) {
            sim.dispatch(origin, sim.node(origin).start_query(id, group, sim.now()));
        }
    });
    return id;
}

void Overlay::leave(std::uint32_t serial) {
    if (!sim_.alive(serial)) {
        throw Error("leave: node " + std::to_string(serial) + " is not live");
    }
    Node& n = sim_.node(serial);
    auto members = n.take_registry();
    sim_.dispatch(serial, n.handle_leave(sim_.now()));
    sim_.retire(serial);
    settle();
    const auto remaining = live();
    if (remaining.empty()) {
        return;
    }
    for (const auto& m : members) {
        // The member host re-registers with any DOAT node it knows.
        register_member(m, remaining[rng_.below(remaining.size())], sim_.now());
    }
    settle();
}

void Overlay::fail(std::uint32_t serial) {
    sim_.fail_node(serial, sim_.now());
    settle();
}

bool Overlay::reinsert_on_drift(std::uint32_t serial, const DelayPoint& new_position, double threshold) {
    const RingCoord old_ring = sim_.node(serial).id().ring;
    const RingCoord new_ring = ring_of(new_position);
    if (ring_distance(old_ring, new_ring) <= threshold) {
        sim_.set_position(serial, new_position);
        return false;
    }
    auto members = sim_.node(serial).take_registry();
    sim_.dispatch(serial, sim_.node(serial).handle_leave(sim_.now()));
    sim_.retire(serial);
    settle();
    sim_.set_position(serial, new_position);
    join(serial);
    for (const auto& m : members) {
        register_member(m, serial, sim_.now());
    }
    settle();
    return true;
}

Resolution Overlay::resolve_target(std::uint32_t start, RingCoord target) const {
    Resolution r{sim_.node(start).id(), 0};
    const std::uint32_t ttl = resolve_ttl_for(live().size());
    while (auto hop = sim_.node(r.node.serial).next_hop(target)) {
        if (r.hops == ttl) {
            throw InvariantError("target resolution exceeded its hop budget");
        }
        r.node = *hop;
        ++r.hops;
    }
    return r;
}

NodeId Overlay::nearest_on_ring(RingCoord target) const {
    std::optional<std::pair<double, NodeId>> best;
    for (std::uint32_t s : live()) {
        const NodeId& id = sim_.node(s).id();
        const auto key = std::make_pair(ring_distance(id.ring, target), id);
        if (!best || key < *best) {
            best = key;
        }
    }
    if (!best) {
        throw Error("nearest_on_ring on an empty overlay");
    }
    return best->second;
}

}  // namespace doat
