#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "oorp/rng.hpp"
#include "oorp/topology.hpp"
#include "oorp/tunnels.hpp"

namespace oorp {

enum class PacketKind : uint8_t { Data, EmptyProbe, PriorityProbe, Background };

struct Packet {
    int32_t tunnel;       // tunnel id, or background-flow id for Background kind
    int32_t commodity;    // -1 for probes and background traffic
    int32_t inject_slot;  // slot the packet entered the tunnel (delay stamp)
    int32_t enqueue_slot; // slot it entered the FIFO it currently sits in
    int32_t hop;          // index into the path's link list
    int64_t probe_sum;    // accumulated queue lengths (priority probes)
    PacketKind kind;
};

// Exogenous traffic that rides the underlay FIFOs along a fixed path.
struct BackgroundFlow {
    std::vector<NodeIndex> path;
    std::vector<LinkIndex> links;
    double rate = 0.0;
};

enum class ArrivalKind { None, Poisson, Deterministic, Controlled };

struct ArrivalProcess {
    ArrivalKind kind = ArrivalKind::None;
    double rate = 0.0;
};

// One arrival process per commodity, at the commodity's source node.
struct ArrivalSpec {
    std::vector<ArrivalProcess> per_commodity;
};

// What a policy asks the engine to do in one slot. Counts are trimmed to the
// available backlog by the engine, but must already respect link capacities.
struct SlotDecision {
    std::vector<int> tunnel_packets; // T*K
    std::vector<int> link_packets;   // E*K, only overlay-overlay links
    std::vector<std::pair<TunnelIndex, PacketKind>> probe_requests;

    void reset(int tunnels, int links, int commodities);
    int& tun(int t, int k, int K) { return tunnel_packets[static_cast<size_t>(t) * K + k]; }
    int tun(int t, int k, int K) const { return tunnel_packets[static_cast<size_t>(t) * K + k]; }
    int& lnk(int e, int k, int K) { return link_packets[static_cast<size_t>(e) * K + k]; }
    int lnk(int e, int k, int K) const { return link_packets[static_cast<size_t>(e) * K + k]; }
};

struct ExitEvent {
    TunnelIndex tunnel;
    int commodity; // -1 for probes
    PacketKind kind;
    int inject_slot;
    int exit_slot;
    int64_t probe_sum;
};

struct SlotTrace {
    int slot = 0;
    std::vector<int> injected;    // T*K packets actually sent into tunnels
    std::vector<int> tunnel_exit; // T*K packets that left tunnels this slot
    std::vector<int> direct_sent; // E*K
    std::vector<int> arrivals;    // K
    std::vector<ExitEvent> exits;
    bool tunnel_cap_exceeded = false; // some uncontrollable link got injections > capacity

    void reset(int tunnels, int links, int commodities);
};

// Serves one FIFO for one slot: eligible priority probes depart first without
// consuming capacity, then the oldest eligible packets up to `capacity`.
// Packets enqueued during the current slot are not eligible (store-and-forward
// advances one hop per slot). Departed packets are returned in order.
std::vector<Packet> fifo_serve(std::deque<Packet>& queue, int capacity, int current_slot);

// Deterministic slotted-time executor for one network instance.
class Engine {
public:
    Engine(const Topology& topo, const TunnelSet& tunnels, ArrivalSpec arrivals,
           std::vector<BackgroundFlow> background, uint64_t seed);

    const Topology& topo() const { return *topo_; }
    const TunnelSet& tunnels() const { return *tunnels_; }
    int commodity_count() const { return K_; }
    int slot() const { return slot_; }

    int64_t overlay_queue(NodeIndex i, int k) const {
        return overlay_q_[static_cast<size_t>(i) * K_ + k];
    }
    // Queue length as seen by weight computations: zero at the commodity's
    // own destination.
    int64_t weight_queue(NodeIndex i, int k) const {
        return topo_->commodities[k].destination == i ? 0 : overlay_queue(i, k);
    }
    int64_t in_flight(TunnelIndex t, int k) const {
        return in_flight_[static_cast<size_t>(t) * K_ + k];
    }
    // Per-link backlog in the waiting-room convention: packets beyond what a
    // full service slot drains. A steadily forwarding link reads zero.
    int64_t link_backlog(LinkIndex e) const;
    // Data content of a FIFO (includes empty probes and background traffic).
    int64_t link_content(LinkIndex e) const { return fifo_occupancy_[e]; }
    // Sum of link_backlog over a tunnel's uncontrollable links.
    int64_t tunnel_backlog(TunnelIndex t) const;

    int64_t delivered(int k) const { return delivered_[k]; }
    int64_t arrived(int k) const { return arrived_[k]; }
    int64_t total_backlog() const { return total_overlay_ + total_in_tunnel_; }
    int64_t commodity_backlog(int k) const {
        return overlay_per_k_[k] + in_tunnel_per_k_[k];
    }
    int64_t underlay_data_backlog() const { return total_in_tunnel_; }

    // External admissions for rate-controlled commodities, applied in the
    // arrivals phase of the next step() alongside sampled arrivals.
    void set_admissions(const std::vector<int>& admitted) { admissions_ = admitted; }

    // Advances one slot. The decision must have been computed from the state
    // as it is on entry. Throws std::logic_error when the decision violates a
    // link capacity (that is a policy bug, not load).
    void step(const SlotDecision& decision, SlotTrace& trace);

    // Verifies packet conservation per commodity; throws on violation.
    void check_conservation() const;

    int64_t tunnel_cap_exceeded_slots() const { return tunnel_cap_exceeded_; }
    int64_t max_underlay_content() const { return max_underlay_content_; }

private:
    void inject_tunnel(TunnelIndex t, int k, int count, SlotTrace& trace);
    void inject_probe(TunnelIndex t, PacketKind kind);
    void advance_packet(Packet p, LinkIndex from_link, SlotTrace& trace);

    const Topology* topo_;
    const TunnelSet* tunnels_;
    ArrivalSpec arrivals_;
    std::vector<BackgroundFlow> background_;
    int K_;
    int slot_ = 0;

    std::vector<int64_t> overlay_q_;  // N*K
    std::vector<int64_t> in_flight_;  // T*K
    std::vector<std::deque<Packet>> fifo_;       // per link: data/empty/background
    std::vector<std::deque<Packet>> probe_fifo_; // per link: priority probes
    std::vector<int64_t> fifo_occupancy_;        // per link, excludes priority probes

    std::vector<int64_t> delivered_;
    std::vector<int64_t> arrived_;
    std::vector<int64_t> overlay_per_k_;
    std::vector<int64_t> in_tunnel_per_k_;
    int64_t total_overlay_ = 0;
    int64_t total_in_tunnel_ = 0;
    int64_t tunnel_cap_exceeded_ = 0;
    int64_t max_underlay_content_ = 0;

    std::vector<int64_t> bg_arrived_;
    std::vector<int64_t> bg_delivered_;
    std::vector<int64_t> bg_in_network_;

    std::vector<Rng> arrival_rng_;
    std::vector<double> arrival_credit_; // deterministic arrivals accumulator
    std::vector<Rng> bg_rng_;
    std::vector<int> admissions_;

    std::vector<int> scratch_link_load_; // per-slot injection accounting
};

// Validates a background flow against the topology (underlay path following
// the route table) and resolves its link list.
BackgroundFlow make_background_flow(const Topology& topo,
                                    const std::vector<std::string>& node_names, double rate);

} // namespace oorp
