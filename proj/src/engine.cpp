#include "oorp/engine.hpp"

#include <algorithm>
#include <stdexcept>

namespace oorp {

void SlotDecision::reset(int tunnels, int links, int commodities) {
    tunnel_packets.assign(static_cast<size_t>(tunnels) * commodities, 0);
    link_packets.assign(static_cast<size_t>(links) * commodities, 0);
    probe_requests.clear();
}

void SlotTrace::reset(int tunnels, int links, int commodities) {
    injected.assign(static_cast<size_t>(tunnels) * commodities, 0);
    tunnel_exit.assign(static_cast<size_t>(tunnels) * commodities, 0);
    direct_sent.assign(static_cast<size_t>(links) * commodities, 0);
    arrivals.assign(commodities, 0);
    exits.clear();
    tunnel_cap_exceeded = false;
}

std::vector<Packet> fifo_serve(std::deque<Packet>& queue, int capacity, int current_slot) {
    std::vector<Packet> departed;
    // Priority probes leave first and cost no capacity.
    for (auto it = queue.begin(); it != queue.end();) {
        if (it->kind == PacketKind::PriorityProbe && it->enqueue_slot < current_slot) {
            departed.push_back(*it);
            it = queue.erase(it);
        } else {
            ++it;
        }
    }
    int served = 0;
    while (served < capacity && !queue.empty() && queue.front().enqueue_slot < current_slot) {
        departed.push_back(queue.front());
        queue.pop_front();
        ++served;
    }
    return departed;
}

BackgroundFlow make_background_flow(const Topology& topo,
                                    const std::vector<std::string>& node_names, double rate) {
    if (node_names.size() < 2)
        throw TopologyError("background flow needs at least two nodes");
    if (rate < 0) throw TopologyError("background flow rate must be >= 0");
    BackgroundFlow flow;
    flow.rate = rate;
    for (const auto& n : node_names) flow.path.push_back(topo.node_index(n));
    NodeIndex dest = flow.path.back();
    for (size_t i = 0; i + 1 < flow.path.size(); ++i) {
        NodeIndex a = flow.path[i];
        if (topo.is_overlay(a))
            throw TopologyError("background flow node '" + topo.node_name(a) +
                                "' must be an underlay node");
        auto it = topo.next_hop.find({a, dest});
        if (it == topo.next_hop.end() || it->second != flow.path[i + 1])
            throw TopologyError("background flow path deviates from underlay routing at '" +
                                topo.node_name(a) + "'");
        flow.links.push_back(topo.link_index(a, flow.path[i + 1]));
    }
    return flow;
}

Engine::Engine(const Topology& topo, const TunnelSet& tunnels, ArrivalSpec arrivals,
               std::vector<BackgroundFlow> background, uint64_t seed)
    : topo_(&topo),
      tunnels_(&tunnels),
      arrivals_(std::move(arrivals)),
      background_(std::move(background)),
      K_(static_cast<int>(topo.commodities.size())) {
    if (static_cast<int>(arrivals_.per_commodity.size()) != K_)
        throw std::invalid_argument("arrival spec size != commodity count");
    const int N = static_cast<int>(topo.nodes.size());
    const int E = static_cast<int>(topo.links.size());
    overlay_q_.assign(static_cast<size_t>(N) * K_, 0);
    in_flight_.assign(static_cast<size_t>(tunnels.size()) * K_, 0);
    fifo_.resize(E);
    probe_fifo_.resize(E);
    fifo_occupancy_.assign(E, 0);
    delivered_.assign(K_, 0);
    arrived_.assign(K_, 0);
    overlay_per_k_.assign(K_, 0);
    in_tunnel_per_k_.assign(K_, 0);
    bg_arrived_.assign(background_.size(), 0);
    bg_delivered_.assign(background_.size(), 0);
    bg_in_network_.assign(background_.size(), 0);
    for (int k = 0; k < K_; ++k) {
        arrival_rng_.emplace_back(Rng::mix(seed, 1000 + k));
        arrival_credit_.push_back(0.0);
    }
    for (size_t b = 0; b < background_.size(); ++b)
        bg_rng_.emplace_back(Rng::mix(seed, 5000 + b));
    scratch_link_load_.assign(E, 0);
}

int64_t Engine::link_backlog(LinkIndex e) const {
    int64_t waiting = fifo_occupancy_[e] - topo_->links[e].capacity;
    return waiting > 0 ? waiting : 0;
}

int64_t Engine::tunnel_backlog(TunnelIndex t) const {
    const Tunnel& tun = (*tunnels_)[t];
    int64_t sum = 0;
    for (size_t h = 1; h < tun.links.size(); ++h) sum += link_backlog(tun.links[h]);
    return sum;
}

void Engine::inject_tunnel(TunnelIndex t, int k, int count, SlotTrace& trace) {
    const Tunnel& tun = (*tunnels_)[t];
    NodeIndex head = tun.head();
    int64_t& q = overlay_q_[static_cast<size_t>(head) * K_ + k];
    int m = static_cast<int>(std::min<int64_t>(count, q));
    if (m <= 0) return;
    q -= m;
    overlay_per_k_[k] -= m;
    total_overlay_ -= m;

    if (tun.is_direct()) {
        // Crosses the overlay link within the slot; no FIFO involved.
        NodeIndex tail = tun.tail();
        if (topo_->commodities[k].destination == tail) {
            delivered_[k] += m;
        } else {
            overlay_q_[static_cast<size_t>(tail) * K_ + k] += m;
            overlay_per_k_[k] += m;
            total_overlay_ += m;
        }
        trace.injected[static_cast<size_t>(t) * K_ + k] += m;
        trace.tunnel_exit[static_cast<size_t>(t) * K_ + k] += m;
        return;
    }

    LinkIndex first_fifo = tun.links[1];
    for (int i = 0; i < m; ++i) {
        Packet p;
        p.tunnel = t;
        p.commodity = k;
        p.inject_slot = slot_;
        p.enqueue_slot = slot_;
        p.hop = 1;
        p.probe_sum = 0;
        p.kind = PacketKind::Data;
        fifo_[first_fifo].push_back(p);
    }
    fifo_occupancy_[first_fifo] += m;
    in_flight_[static_cast<size_t>(t) * K_ + k] += m;
    in_tunnel_per_k_[k] += m;
    total_in_tunnel_ += m;
    trace.injected[static_cast<size_t>(t) * K_ + k] += m;

    // Tunnel-capacity accounting: this slot's injections against every link
    // the tunnel crosses, including the first (overlay-controlled) one.
    for (LinkIndex e : tun.links) scratch_link_load_[e] += m;
}

void Engine::inject_probe(TunnelIndex t, PacketKind kind) {
    const Tunnel& tun = (*tunnels_)[t];
    if (tun.is_direct()) return; // nothing to measure
    Packet p;
    p.tunnel = t;
    p.commodity = -1;
    p.inject_slot = slot_;
    p.enqueue_slot = slot_;
    p.hop = 1;
    p.probe_sum = 0;
    p.kind = kind;
    LinkIndex first_fifo = tun.links[1];
    if (kind == PacketKind::PriorityProbe) {
        probe_fifo_[first_fifo].push_back(p);
    } else {
        fifo_[first_fifo].push_back(p);
        fifo_occupancy_[first_fifo] += 1;
    }
}

void Engine::advance_packet(Packet p, LinkIndex from_link, SlotTrace& trace) {
    (void)from_link;
    if (p.kind == PacketKind::Background) {
        const BackgroundFlow& flow = background_[p.tunnel];
        p.hop += 1;
        if (p.hop >= static_cast<int>(flow.links.size())) {
            bg_delivered_[p.tunnel] += 1;
            bg_in_network_[p.tunnel] -= 1;
            return;
        }
        LinkIndex next = flow.links[p.hop];
        p.enqueue_slot = slot_;
        fifo_[next].push_back(p);
        fifo_occupancy_[next] += 1;
        return;
    }

    const Tunnel& tun = (*tunnels_)[p.tunnel];
    p.hop += 1;
    if (p.hop >= static_cast<int>(tun.links.size())) {
        // Crossed the last link: decapsulate at the tunnel tail.
        ExitEvent ev{p.tunnel, p.commodity, p.kind, p.inject_slot, slot_, p.probe_sum};
        trace.exits.push_back(ev);
        if (p.kind == PacketKind::Data) {
            int k = p.commodity;
            NodeIndex tail = tun.tail();
            in_flight_[static_cast<size_t>(p.tunnel) * K_ + k] -= 1;
            in_tunnel_per_k_[k] -= 1;
            total_in_tunnel_ -= 1;
            trace.tunnel_exit[static_cast<size_t>(p.tunnel) * K_ + k] += 1;
            if (topo_->commodities[k].destination == tail) {
                delivered_[k] += 1;
            } else {
                overlay_q_[static_cast<size_t>(tail) * K_ + k] += 1;
                overlay_per_k_[k] += 1;
                total_overlay_ += 1;
            }
        }
        return;
    }
    LinkIndex next = tun.links[p.hop];
    p.enqueue_slot = slot_;
    if (p.kind == PacketKind::PriorityProbe) {
        probe_fifo_[next].push_back(p);
    } else {
        fifo_[next].push_back(p);
        fifo_occupancy_[next] += 1;
    }
}

void Engine::step(const SlotDecision& decision, SlotTrace& trace) {
    const int E = static_cast<int>(topo_->links.size());
    trace.reset(tunnels_->size(), E, K_);
    trace.slot = slot_;

    // Validate the decision against link capacities (policy contract).
    for (LinkIndex e = 0; e < E; ++e) {
        int requested = 0;
        for (int k = 0; k < K_; ++k) requested += decision.lnk(e, k, K_);
        for (TunnelIndex t : tunnels_->entered_by(e))
            for (int k = 0; k < K_; ++k) requested += decision.tun(t, k, K_);
        TunnelIndex dt = tunnels_->direct_tunnel(e);
        if (dt >= 0)
            for (int k = 0; k < K_; ++k) requested += decision.tun(dt, k, K_);
        if (requested > topo_->links[e].capacity)
            throw std::logic_error("decision exceeds capacity of link (" +
                                   topo_->node_name(topo_->links[e].from) + "," +
                                   topo_->node_name(topo_->links[e].to) + ")");
    }

    // Phase 2: overlay transmissions, direct links first, then tunnels,
    // both in ascending index order (this is the allocation order when a
    // queue cannot cover every request).
    std::fill(scratch_link_load_.begin(), scratch_link_load_.end(), 0);
    for (LinkIndex e : topo_->overlay_links()) {
        const Link& l = topo_->links[e];
        for (int k = 0; k < K_; ++k) {
            int want = decision.lnk(e, k, K_);
            if (want <= 0) continue;
            int64_t& q = overlay_q_[static_cast<size_t>(l.from) * K_ + k];
            int m = static_cast<int>(std::min<int64_t>(want, q));
            if (m <= 0) continue;
            q -= m;
            overlay_per_k_[k] -= m;
            total_overlay_ -= m;
            if (topo_->commodities[k].destination == l.to) {
                delivered_[k] += m;
            } else {
                overlay_q_[static_cast<size_t>(l.to) * K_ + k] += m;
                overlay_per_k_[k] += m;
                total_overlay_ += m;
            }
            trace.direct_sent[static_cast<size_t>(e) * K_ + k] += m;
        }
    }
    for (TunnelIndex t = 0; t < tunnels_->size(); ++t)
        for (int k = 0; k < K_; ++k) {
            int want = decision.tun(t, k, K_);
            if (want > 0) inject_tunnel(t, k, want, trace);
        }
    for (const auto& [t, kind] : decision.probe_requests) inject_probe(t, kind);

    // Flag slots whose injections exceed an uncontrollable link's capacity.
    for (LinkIndex e : topo_->uncontrollable_links())
        if (scratch_link_load_[e] > topo_->links[e].capacity) {
            trace.tunnel_cap_exceeded = true;
            ++tunnel_cap_exceeded_;
        }

    // Phase 3: underlay service, one hop per slot. Priority probes first
    // (no capacity), sampling the waiting backlog as they depart.
    for (LinkIndex e : topo_->uncontrollable_links()) {
        auto& probes = probe_fifo_[e];
        while (!probes.empty() && probes.front().enqueue_slot < slot_) {
            Packet p = probes.front();
            probes.pop_front();
            p.probe_sum += link_backlog(e);
            advance_packet(p, e, trace);
        }
        auto& q = fifo_[e];
        int cap = topo_->links[e].capacity;
        int served = 0;
        while (served < cap && !q.empty() && q.front().enqueue_slot < slot_) {
            Packet p = q.front();
            q.pop_front();
            fifo_occupancy_[e] -= 1;
            ++served;
            advance_packet(p, e, trace);
        }
    }

    // Phase 4: external arrivals (and rate-controller admissions).
    for (int k = 0; k < K_; ++k) {
        const ArrivalProcess& ap = arrivals_.per_commodity[k];
        int n = 0;
        switch (ap.kind) {
            case ArrivalKind::None: break;
            case ArrivalKind::Poisson: n = arrival_rng_[k].next_poisson(ap.rate); break;
            case ArrivalKind::Deterministic: {
                arrival_credit_[k] += ap.rate;
                n = static_cast<int>(arrival_credit_[k]);
                arrival_credit_[k] -= n;
                break;
            }
            case ArrivalKind::Controlled:
                if (k < static_cast<int>(admissions_.size())) n = admissions_[k];
                break;
        }
        if (n > 0) {
            NodeIndex src = topo_->commodities[k].source;
            overlay_q_[static_cast<size_t>(src) * K_ + k] += n;
            overlay_per_k_[k] += n;
            total_overlay_ += n;
            arrived_[k] += n;
            trace.arrivals[k] = n;
        }
    }
    admissions_.clear();
    for (size_t b = 0; b < background_.size(); ++b) {
        int n = bg_rng_[b].next_poisson(background_[b].rate);
        for (int i = 0; i < n; ++i) {
            Packet p;
            p.tunnel = static_cast<int>(b);
            p.commodity = -1;
            p.inject_slot = slot_;
            p.enqueue_slot = slot_;
            p.hop = 0;
            p.probe_sum = 0;
            p.kind = PacketKind::Background;
            fifo_[background_[b].links[0]].push_back(p);
        }
        if (n > 0) {
            fifo_occupancy_[background_[b].links[0]] += n;
            bg_arrived_[b] += n;
            bg_in_network_[b] += n;
        }
    }

    if (total_in_tunnel_ > max_underlay_content_) max_underlay_content_ = total_in_tunnel_;
    ++slot_;
}

void Engine::check_conservation() const {
    for (int k = 0; k < K_; ++k) {
        int64_t overlay = 0;
        for (size_t i = 0; i < topo_->nodes.size(); ++i)
            overlay += overlay_q_[i * K_ + k];
        int64_t in_tunnel = 0;
        for (TunnelIndex t = 0; t < tunnels_->size(); ++t)
            in_tunnel += in_flight_[static_cast<size_t>(t) * K_ + k];
        if (overlay + in_tunnel + delivered_[k] != arrived_[k])
            throw std::logic_error("conservation violated for commodity " +
                                   topo_->commodities[k].name);
        if (overlay != overlay_per_k_[k] || in_tunnel != in_tunnel_per_k_[k])
            throw std::logic_error("backlog counters out of sync for commodity " +
                                   topo_->commodities[k].name);
    }
}

} // namespace oorp
