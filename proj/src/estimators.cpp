#include "oorp/estimators.hpp"

#include <algorithm>
#include <stdexcept>

namespace oorp {

EstimatorMode estimator_mode_from_string(const std::string& s) {
    if (s == "exact") return EstimatorMode::Exact;
    if (s == "delay") return EstimatorMode::Delay;
    if (s == "delay-probe") return EstimatorMode::DelayProbe;
    if (s == "priority-probe") return EstimatorMode::PriorityProbe;
    throw std::invalid_argument("unknown estimator '" + s + "'");
}

std::string to_string(EstimatorMode m) {
    switch (m) {
        case EstimatorMode::Exact: return "exact";
        case EstimatorMode::Delay: return "delay";
        case EstimatorMode::DelayProbe: return "delay-probe";
        case EstimatorMode::PriorityProbe: return "priority-probe";
    }
    return "?";
}

EstimatorBank::EstimatorBank(const TunnelSet& tunnels, EstimatorConfig cfg)
    : cfg_(cfg), tunnel_count_(tunnels.size()) {
    delay_est_.assign(tunnel_count_, 0.0);
    probe_sum_est_.assign(tunnel_count_, 0);
    last_traffic_slot_.assign(tunnel_count_, -1);
    empty_in_flight_.assign(tunnel_count_, 0);
    last_priority_slot_.assign(tunnel_count_, -cfg.probe_interval);
}

double EstimatorBank::estimate(const Engine& eng, TunnelIndex t) const {
    switch (cfg_.mode) {
        case EstimatorMode::Exact:
            return static_cast<double>(eng.tunnel_backlog(t));
        case EstimatorMode::Delay:
        case EstimatorMode::DelayProbe:
            return delay_est_[t];
        case EstimatorMode::PriorityProbe:
            return static_cast<double>(probe_sum_est_[t]);
    }
    return 0.0;
}

void EstimatorBank::request_probes(const Engine& eng, SlotDecision& decision) {
    const int slot = eng.slot();
    if (cfg_.mode == EstimatorMode::PriorityProbe) {
        for (TunnelIndex t = 0; t < tunnel_count_; ++t) {
            if (eng.tunnels()[t].is_direct()) continue;
            if (slot - last_priority_slot_[t] >= cfg_.probe_interval) {
                decision.probe_requests.push_back({t, PacketKind::PriorityProbe});
                last_priority_slot_[t] = slot;
            }
        }
    } else if (cfg_.mode == EstimatorMode::DelayProbe) {
        for (TunnelIndex t = 0; t < tunnel_count_; ++t) {
            if (eng.tunnels()[t].is_direct()) continue;
            // One empty probe at a time per tunnel: it occupies a FIFO slot
            // like data, so its own delay already reflects the backlog.
            if (empty_in_flight_[t] == 0 && slot - last_traffic_slot_[t] >= cfg_.idle_threshold) {
                decision.probe_requests.push_back({t, PacketKind::EmptyProbe});
                empty_in_flight_[t] += 1;
                last_traffic_slot_[t] = slot;
            }
        }
    }
}

void EstimatorBank::observe(const Engine& eng, const SlotTrace& trace) {
    const int K = eng.commodity_count();
    if (cfg_.mode == EstimatorMode::Delay || cfg_.mode == EstimatorMode::DelayProbe) {
        for (TunnelIndex t = 0; t < tunnel_count_; ++t) {
            for (int k = 0; k < K; ++k)
                if (trace.injected[static_cast<size_t>(t) * K + k] > 0) {
                    last_traffic_slot_[t] = trace.slot;
                    break;
                }
        }
    }
    for (const ExitEvent& ev : trace.exits) {
        switch (ev.kind) {
            case PacketKind::PriorityProbe:
                probe_sum_est_[ev.tunnel] = ev.probe_sum;
                break;
            case PacketKind::EmptyProbe:
                empty_in_flight_[ev.tunnel] = std::max(0, empty_in_flight_[ev.tunnel] - 1);
                [[fallthrough]];
            case PacketKind::Data: {
                // Raw transit minus the empty-pipe time, so an idle tunnel
                // estimates zero.
                int hops = eng.tunnels()[ev.tunnel].underlay_hops();
                double d = static_cast<double>(ev.exit_slot - ev.inject_slot - hops);
                delay_est_[ev.tunnel] = std::max(0.0, d);
                break;
            }
            case PacketKind::Background:
                break;
        }
    }
}

} // namespace oorp
