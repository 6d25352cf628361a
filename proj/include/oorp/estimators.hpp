#pragma once

#include <string>
#include <vector>

#include "oorp/engine.hpp"

namespace oorp {

enum class EstimatorMode { Exact, Delay, DelayProbe, PriorityProbe };

EstimatorMode estimator_mode_from_string(const std::string& s);
std::string to_string(EstimatorMode m);

struct EstimatorConfig {
    EstimatorMode mode = EstimatorMode::Exact;
    int probe_interval = 10; // priority-probe period per tunnel
    int idle_threshold = 10; // slots without traffic before an empty probe
};

// Per-tunnel estimate of the total underlay backlog, maintained from packet
// exit timestamps and probe returns.
class EstimatorBank {
public:
    EstimatorBank(const TunnelSet& tunnels, EstimatorConfig cfg);

    EstimatorMode mode() const { return cfg_.mode; }

    // Backlog estimate for the weight computation, at the decision snapshot.
    double estimate(const Engine& eng, TunnelIndex t) const;

    // Adds this slot's probe injections to the decision.
    void request_probes(const Engine& eng, SlotDecision& decision);

    // Consumes exit events and injection counts after a step.
    void observe(const Engine& eng, const SlotTrace& trace);

private:
    EstimatorConfig cfg_;
    int tunnel_count_;
    std::vector<double> delay_est_;        // D_l, transit-corrected
    std::vector<int64_t> probe_sum_est_;   // last priority-probe reading
    std::vector<int> last_traffic_slot_;   // last data/empty-probe injection
    std::vector<int> empty_in_flight_;
    std::vector<int> last_priority_slot_;
};

} // namespace oorp
