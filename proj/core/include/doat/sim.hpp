#pragma once

// Deterministic discrete-event engine.
//
// Events pop in (time, seq) order, seq being assigned at scheduling time, so
// a run is a pure function of its inputs. Link latency is the delay-space
// distance between the current positions of the endpoints; node processing
// takes no time. Messages between one ordered pair of nodes never overtake
// each other.

#include "doat/delay_space.hpp"
#include "doat/node.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <optional>
#include <unordered_map>
#include <vector>

namespace doat {

inline constexpr std::uint32_t kHarness = 0xffffffffu;

struct RunStatus {
    double time = 0.0;
    bool quiescent = true;
    std::uint64_t events = 0;
};

struct MessageCounts {
    std::array<std::uint64_t, std::variant_size_v<Message>> sent{};
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;

    std::uint64_t of(std::string_view kind) const;
    std::uint64_t route_updates() const { return sent[3]; }
};

class Simulator {
public:
    using QueryCallback = std::function<void(const QueryResponse&, std::uint32_t origin, double now)>;

    explicit Simulator(std::vector<DelayPoint> positions);

    std::size_t size() const noexcept { return nodes_.size(); }
    double now() const noexcept { return now_; }

    /// Installs the node whose serial is `node.id().serial`, replacing any
    /// previous occupant of that slot.
    Node& install(Node node);
    bool alive(std::uint32_t serial) const;
    Node& node(std::uint32_t serial);
    const Node& node(std::uint32_t serial) const;
    const DelayPoint& position(std::uint32_t serial) const { return positions_.at(serial); }
    const std::vector<DelayPoint>& positions() const noexcept { return positions_; }

    /// One-way latency between two nodes at their current positions.
    double link_delay(std::uint32_t a, std::uint32_t b) const;

    /// Schedules `msg` from `src` to `dst` at now + link delay.
    void send(std::uint32_t src, std::uint32_t dst, Message msg);
    /// Delivers a message from outside the overlay to `dst` at time `at`.
    void inject(std::uint32_t dst, Message msg, double at);
    /// Runs `action` at time `at`, ordered with the other events.
    void schedule(double at, std::function<void(Simulator&)> action);

    /// Applies a node handler's output as if emitted by `serial` right now.
    void dispatch(std::uint32_t serial, NodeOutput out);

    /// Processes events until none are left or the next one is past
    /// `max_time`; in the latter case the status is non-quiescent.
    RunStatus run_until_quiescent(double max_time);

    /// Marks `serial` dead at time `at`. Neighbours holding it are told to
    /// repair; later messages to it are dropped.
    void fail_node(std::uint32_t serial, double at);
    /// Removes a node that has already sent its goodbyes.
    void retire(std::uint32_t serial);
    /// Replaces the positions used for latency from time `at` on.
    void perturb_positions(std::vector<DelayPoint> moved, double at);
    void set_position(std::uint32_t serial, DelayPoint p);

    void set_trace(std::ostream* out) noexcept { trace_ = out; }
    void on_query_complete(QueryCallback cb) { query_cb_ = std::move(cb); }

    const MessageCounts& counts() const noexcept { return counts_; }
    void reset_counts() { counts_ = MessageCounts{}; }

private:
    enum class EventKind : std::uint8_t { message, timer, action };

    struct Payload {
        EventKind kind = EventKind::message;
        std::uint32_t src = kHarness;
        std::uint32_t dst = 0;
        NodeId from;
        std::optional<Message> msg;
        std::function<void(Simulator&)> action;
    };

    struct Key {
        double time;
        std::uint64_t seq;
        std::size_t slot;
    };

    void push(double at, Payload p);
    void deliver(Payload& p);
    void trace(const Payload& p, bool dropped) const;

    std::vector<DelayPoint> positions_;
    std::vector<std::optional<Node>> nodes_;
    std::vector<bool> alive_;

    std::vector<Key> heap_;
    std::vector<Payload> slots_;
    std::vector<std::size_t> free_slots_;
    std::uint64_t next_seq_ = 0;
    double now_ = 0.0;

    std::unordered_map<std::uint64_t, double> last_arrival_;
    MessageCounts counts_;
    std::ostream* trace_ = nullptr;
    QueryCallback query_cb_;
};

/// Totals over a trace written by Simulator::set_trace.
struct TraceSummary {
    std::uint64_t lines = 0;
    std::uint64_t dropped = 0;
    double first_time = 0.0;
    double last_time = 0.0;
    std::map<std::string, std::uint64_t> by_kind;
};

/// Throws ParseError on a line that is not a trace record.
TraceSummary summarize_trace(std::istream& in);

}  // namespace doat
