#pragma once

#include <memory>
#include <string>
#include <vector>

#include "oorp/engine.hpp"
#include "oorp/estimators.hpp"
#include "oorp/flow_problems.hpp"

namespace oorp {

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    // Computes this slot's decision from the pre-step state.
    virtual void decide(const Engine& eng, SlotDecision& decision) = 0;
    // Consumes the slot's trace after the step.
    virtual void observe(const Engine& eng, const SlotTrace& trace) {
        (void)eng;
        (void)trace;
    }
    // Packets admitted this slot for rate-controlled commodities.
    virtual void admissions(const Engine& eng, std::vector<int>& out) {
        (void)eng;
        out.clear();
    }
};

// Backpressure on the overlay graph: a tunnel is just a link of capacity
// c_{l1,l2}; underlay congestion and packets in flight are ignored.
class BpPolicy : public Policy {
public:
    std::string name() const override { return "bp"; }
    void decide(const Engine& eng, SlotDecision& decision) override;
};

// Overlay backpressure: like BP but the weight subtracts the packets in
// flight H_l^k.
class ObpPolicy : public Policy {
public:
    std::string name() const override { return "obp"; }
    void decide(const Engine& eng, SlotDecision& decision) override;
};

struct CentralizedConfig {
    int frame_length = 100;
    double capacity_shrink = 0.0; // epsilon-shrink of LP capacities
    long long q_max = 1000;       // rationalization denominator bound
};

// Frame-based policy: solves the backlog-weighted throughput LP at each
// frame start and emits the (possibly fractional) optimal rates as per-tunnel
// "p packets every q slots" schedules. Per-slot totals are capped at the
// sending link (that is a physical transmission limit); per-frame totals are
// capped at every link the tunnel crosses, so a frame's injections never
// exceed a link's frame capacity.
class CentralizedPolicy : public Policy {
public:
    CentralizedPolicy(const Topology& topo, const TunnelSet& tunnels, CentralizedConfig cfg);
    std::string name() const override { return "centralized"; }
    void decide(const Engine& eng, SlotDecision& decision) override;

private:
    struct Schedule {
        long long p = 0, q = 1;
        long long emitted = 0;
    };
    CentralizedConfig cfg_;
    std::vector<Schedule> sched_;          // T*K
    std::vector<double> lp_caps_;
    std::vector<long long> frame_budget_;  // per-link packets left this frame
    std::vector<int> origin_remaining_;    // per-link scratch, this slot
    int frame_slot_ = 0;
};

// Distributed policy driven by queue differentials, with the underlay
// congestion term supplied by a pluggable estimator.
class OorpPolicy : public Policy {
public:
    OorpPolicy(const TunnelSet& tunnels, EstimatorConfig est);
    std::string name() const override;
    void decide(const Engine& eng, SlotDecision& decision) override;
    void observe(const Engine& eng, const SlotTrace& trace) override;
    const EstimatorBank& estimator() const { return estimator_; }

private:
    EstimatorBank estimator_;
};

// Scalar rate choice: argmax over [0, M] of w*log(rate) - q*rate.
double rate_control_choose(double w, double q, double M);

struct RateControllerConfig {
    std::vector<double> weight; // w_k, 0 disables control for that commodity
    std::vector<double> cap;    // M_k
};

// Wraps a routing policy with per-source admission control. Admitted packets
// are integer with fractional carryover.
class RateControlledPolicy : public Policy {
public:
    RateControlledPolicy(std::unique_ptr<Policy> inner, RateControllerConfig cfg);
    std::string name() const override { return inner_->name() + "+rate"; }
    void decide(const Engine& eng, SlotDecision& decision) override {
        inner_->decide(eng, decision);
    }
    void observe(const Engine& eng, const SlotTrace& trace) override {
        inner_->observe(eng, trace);
    }
    void admissions(const Engine& eng, std::vector<int>& out) override;

private:
    std::unique_ptr<Policy> inner_;
    RateControllerConfig cfg_;
    std::vector<double> credit_;
};

std::unique_ptr<Policy> make_policy(const std::string& name, const Topology& topo,
                                    const TunnelSet& tunnels, const EstimatorConfig& est,
                                    const CentralizedConfig& cen);

} // namespace oorp
