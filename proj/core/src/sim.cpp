#include "doat/sim.hpp"

#include "doat/error.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <sstream>

namespace doat {

std::uint64_t MessageCounts::of(std::string_view kind) const {
    static constexpr std::string_view names[] = {"JoinProbe", "JoinAccept", "Register", "RouteUpdate",
                                                 "Query",     "QueryResponse", "Leave"};
    for (std::size_t i = 0; i < sent.size(); ++i) {
        if (names[i] == kind) {
            return sent[i];
        }
    }
    return 0;
}

namespace {

bool later(const auto& a, const auto& b) {
    return a.time > b.time || (a.time == b.time && a.seq > b.seq);
}

}  // namespace

Simulator::Simulator(std::vector<DelayPoint> positions)
    : positions_(std::move(positions)), nodes_(positions_.size()), alive_(positions_.size(), false) {}

Node& Simulator::install(Node n) {
    const auto serial = n.id().serial;
    if (serial >= nodes_.size()) {
        throw Error("node serial " + std::to_string(serial) + " has no position");
    }
    nodes_[serial].emplace(std::move(n));
    alive_[serial] = true;
    return *nodes_[serial];
}

bool Simulator::alive(std::uint32_t serial) const {
    return serial < alive_.size() && alive_[serial];
}

Node& Simulator::node(std::uint32_t serial) {
    if (serial >= nodes_.size() || !nodes_[serial]) {
        throw Error("unknown node " + std::to_string(serial));
    }
    return *nodes_[serial];
}

const Node& Simulator::node(std::uint32_t serial) const {
    if (serial >= nodes_.size() || !nodes_[serial]) {
        throw Error("unknown node " + std::to_string(serial));
    }
    return *nodes_[serial];
}

double Simulator::link_delay(std::uint32_t a, std::uint32_t b) const {
    return a == b ? 0.0 : delay(positions_.at(a), positions_.at(b));
}

void Simulator::push(double at, Payload p) {
    std::size_t slot;
    if (!free_slots_.empty()) {
        slot = free_slots_.back();
        free_slots_.pop_back();
        slots_[slot] = std::move(p);
    } else {
        slot = slots_.size();
        slots_.push_back(std::move(p));
    }
    heap_.push_back(Key{at, next_seq_++, slot});
    std::push_heap(heap_.begin(), heap_.end(), [](const Key& a, const Key& b) { return later(a, b); });
}

void Simulator::send(std::uint32_t src, std::uint32_t dst, Message msg) {
    if (src >= nodes_.size() || dst >= nodes_.size() || !nodes_[src]) {
        throw Error("send between unknown endpoints " + std::to_string(src) + " -> " + std::to_string(dst));
    }
    ++counts_.sent[msg.index()];
    double at = now_ + link_delay(src, dst);
    const std::uint64_t pair = (static_cast<std::uint64_t>(src) << 32) | dst;
    auto [it, fresh] = last_arrival_.try_emplace(pair, at);
    if (!fresh) {
        at = std::max(at, it->second);
        it->second = at;
    }
    Payload p;
    p.kind = EventKind::message;
    p.src = src;
    p.dst = dst;
    p.from = nodes_[src]->id();
    p.msg = std::move(msg);
    push(at, std::move(p));
}

void Simulator::inject(std::uint32_t dst, Message msg, double at) {
    if (dst >= nodes_.size()) {
        throw Error("inject to unknown node " + std::to_string(dst));
    }
    Payload p;
    p.kind = EventKind::message;
    p.src = kHarness;
    p.dst = dst;
    p.msg = std::move(msg);
    push(std::max(at, now_), std::move(p));
}

void Simulator::schedule(double at, std::function<void(Simulator&)> action) {
    Payload p;
    p.kind = EventKind::action;
    p.action = std::move(action);
    push(std::max(at, now_), std::move(p));
}

void Simulator::dispatch(std::uint32_t serial, NodeOutput out) {
    for (auto& o : out.messages) {
        send(serial, o.dst, std::move(o.message));
    }
    if (out.wake_at) {
        Payload p;
        p.kind = EventKind::timer;
        p.dst = serial;
        push(std::max(*out.wake_at, now_), std::move(p));
    }
    if (query_cb_) {
        for (const auto& r : out.completed) {
            query_cb_(r, serial, now_);
        }
    }
}

void Simulator::trace(const Payload& p, bool dropped) const {
    if (!trace_ || !p.msg) {
        return;
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, now_);
    std::string line(buf, res.ptr);
    line += ' ';
    line += p.src == kHarness ? std::string("H") : std::to_string(p.src);
    line += ' ';
    line += std::to_string(p.dst);
    line += ' ';
    line += message_kind(*p.msg);
    line += ' ';
    const std::uint64_t digest = fnv1a64(describe(*p.msg));
    static constexpr char hex[] = "0123456789abcdef";
    for (int shift = 60; shift >= 0; shift -= 4) {
        line += hex[(digest >> shift) & 15];
    }
    if (dropped) {
        line += " DROP";
    }
    line += '\n';
    *trace_ << line;
}

void Simulator::deliver(Payload& p) {
    switch (p.kind) {
    case EventKind::action:
        p.action(*this);
        return;
    case EventKind::timer:
        if (alive(p.dst)) {
            dispatch(p.dst, nodes_[p.dst]->on_timer(now_));
        }
        return;
    case EventKind::message:
        break;
    }
    if (!alive(p.dst)) {
        ++counts_.dropped;
        trace(p, true);
        // The sender notices the dead peer when it holds it as a neighbour.
        if (p.src != kHarness && alive(p.src) && nodes_[p.src]->find_neighbor(p.dst)) {
            dispatch(p.src, nodes_[p.src]->detect_failure_and_repair(p.dst, now_));
        }
        return;
    }
    ++counts_.delivered;
    trace(p, false);
    const NodeId from = p.src == kHarness ? NodeId{} : p.from;
    dispatch(p.dst, nodes_[p.dst]->handle(from, *p.msg, now_));
}

RunStatus Simulator::run_until_quiescent(double max_time) {
    RunStatus status;
    const auto cmp = [](const Key& a, const Key& b) { return later(a, b); };
    while (!heap_.empty()) {
        if (heap_.front().time > max_time) {
            status.quiescent = false;
            break;
        }
        std::pop_heap(heap_.begin(), heap_.end(), cmp);
        const Key key = heap_.back();
        heap_.pop_back();
        Payload p = std::move(slots_[key.slot]);
        slots_[key.slot] = Payload{};
        free_slots_.push_back(key.slot);
        if (key.time < now_) {
            throw InvariantError("event scheduled in the past");
        }
        now_ = key.time;
        deliver(p);
        ++status.events;
    }
    status.time = now_;
    return status;
}

void Simulator::fail_node(std::uint32_t serial, double at) {
    if (serial >= nodes_.size() || !nodes_[serial]) {
        throw Error("fail_node: unknown node " + std::to_string(serial));
    }
    schedule(at, [serial](Simulator& sim) {
        if (!sim.alive_[serial]) {
            return;
        }
        sim.alive_[serial] = false;
        for (std::uint32_t s = 0; s < sim.nodes_.size(); ++s) {
            if (sim.alive(s) && sim.nodes_[s]->find_neighbor(serial)) {
                sim.dispatch(s, sim.nodes_[s]->detect_failure_and_repair(serial, sim.now_));
            }
        }
    });
}

void Simulator::retire(std::uint32_t serial) {
    if (serial < alive_.size()) {
        alive_[serial] = false;
    }
}

void Simulator::perturb_positions(std::vector<DelayPoint> moved, double at) {
    if (moved.size() != positions_.size()) {
        throw Error("perturb_positions: expected " + std::to_string(positions_.size()) + " positions");
    }
    schedule(at, [moved = std::move(moved)](Simulator& sim) mutable { sim.positions_ = std::move(moved); });
}

void Simulator::set_position(std::uint32_t serial, DelayPoint p) {
    positions_.at(serial) = std::move(p);
}

TraceSummary summarize_trace(std::istream& in) {
    TraceSummary t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string time, src, dst, kind, digest, flag;
        if (!(fields >> time >> src >> dst >> kind >> digest) || digest.size() != 16) {
            throw ParseError(t.lines + 1, "not a trace record: '" + line + "'");
        }
        const bool dropped = static_cast<bool>(fields >> flag);
        if (dropped && flag != "DROP") {
            throw ParseError(t.lines + 1, "unexpected trailing field '" + flag + "'");
        }
        double at = 0.0;
        auto [ptr, ec] = std::from_chars(time.data(), time.data() + time.size(), at);
        if (ec != std::errc() || ptr != time.data() + time.size()) {
            throw ParseError(t.lines + 1, "bad time '" + time + "'");
        }
        if (t.lines == 0) {
            t.first_time = at;
        }
        t.last_time = at;
        ++t.lines;
        t.dropped += dropped ? 1 : 0;
        ++t.by_kind[kind];
    }
    return t;
}

}  // namespace doat
