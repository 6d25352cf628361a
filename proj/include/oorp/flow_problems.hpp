#pragma once

#include <cstdint>
#include <vector>

#include "oorp/lp.hpp"
#include "oorp/topology.hpp"
#include "oorp/tunnels.hpp"

namespace oorp {

// Flow assignment over (tunnel, commodity) pairs and (overlay link, commodity)
// pairs. Dense over the full universe so indexing is uniform; entries for
// disallowed pairs stay zero.
struct FlowVector {
    std::vector<double> tunnel_flow; // size T*K
    std::vector<double> link_flow;   // size E*K (nonzero only for overlay links)

    static FlowVector zeros(int tunnels, int links, int commodities) {
        FlowVector f;
        f.tunnel_flow.assign(static_cast<size_t>(tunnels) * commodities, 0.0);
        f.link_flow.assign(static_cast<size_t>(links) * commodities, 0.0);
        return f;
    }
    double& ft(int t, int k, int K) { return tunnel_flow[static_cast<size_t>(t) * K + k]; }
    double ft(int t, int k, int K) const { return tunnel_flow[static_cast<size_t>(t) * K + k]; }
    double& fl(int e, int k, int K) { return link_flow[static_cast<size_t>(e) * K + k]; }
    double fl(int e, int k, int K) const { return link_flow[static_cast<size_t>(e) * K + k]; }
};

// Dual variables: one per uncontrollable link (tunnel-capacity constraints)
// and one per (overlay node, commodity) flow-conservation constraint. The
// entry at a commodity's own destination is identically zero by convention.
struct DualState {
    std::vector<double> link_dual; // size E; meaningful for uncontrollable links
    std::vector<double> node_dual; // size N*K; meaningful for overlay nodes

    static DualState zeros(int links, int nodes, int commodities) {
        DualState q;
        q.link_dual.assign(links, 0.0);
        q.node_dual.assign(static_cast<size_t>(nodes) * commodities, 0.0);
        return q;
    }
    double& qn(int node, int k, int K) { return node_dual[static_cast<size_t>(node) * K + k]; }
    double qn(int node, int k, int K) const {
        return node_dual[static_cast<size_t>(node) * K + k];
    }
    double norm() const;
};

// Arrival rates: one rate per commodity, arriving at the commodity's source.
using RateVector = std::vector<double>;

// Per-link effective capacities (double so background-reduced values fit).
std::vector<double> capacities_of(const Topology& topo);

// ---- Centralized frame problem -------------------------------------------

struct FrameLpResult {
    std::vector<double> flow; // per (t*K + k), over the full tunnel set
    double objective = 0.0;
};

// Maximizes sum F_l^k * (Q_head^k - Q_tail^k) subject to, for every link,
// the summed injections of tunnels through it staying within capacity.
// Backlog at a commodity's own destination counts as zero.
FrameLpResult centralized_frame_lp(const Topology& topo, const TunnelSet& tunnels,
                                   const std::vector<int64_t>& overlay_q,
                                   const std::vector<double>& caps);

// Best rational approximation p/q with q <= q_max (continued fractions).
struct Rational {
    long long p = 0;
    long long q = 1;
};
Rational rationalize(double value, long long q_max = 1000);

// ---- Fluid feasibility LP and its dual machinery --------------------------

struct FluidResult {
    bool feasible = false;
    FlowVector flow;
};

// Feasibility of supporting `lambda` with flow conservation at overlay nodes
// (other than each commodity's destination) and all capacity constraints.
FluidResult fluid_feasibility_lp(const Topology& topo, const TunnelSet& tunnels,
                                 const RateVector& lambda, const std::vector<double>& caps);

// Largest theta such that theta * direction is fluid-feasible.
double max_scaling(const Topology& topo, const TunnelSet& tunnels, const RateVector& direction,
                   const std::vector<double>& caps);

struct DualObjectiveResult {
    double value = 0.0;
    FlowVector argmax;
};

// D(q) = max_{f in X} L(f, q), evaluated in closed form by the per-link
// argmax rule (the same rule the routing policy uses).
DualObjectiveResult dual_objective(const Topology& topo, const TunnelSet& tunnels,
                                   const DualState& q, const RateVector& lambda,
                                   const std::vector<double>& caps);

// Subgradient of D at the point whose Lagrangian maximizer is fstar.
DualState subgradient(const Topology& topo, const TunnelSet& tunnels, const FlowVector& fstar,
                      const RateVector& lambda, const std::vector<double>& caps);

// q <- [q - alpha * g]^+, componentwise, with destination entries pinned to 0.
void dual_step(const Topology& topo, DualState& q, const DualState& g, double alpha);

double dual_inner_product(const DualState& a, const DualState& b);

// ---- Utility maximisation oracle ------------------------------------------

struct UtilityOracleResult {
    bool ok = false;
    RateVector rates;     // optimal lambda per commodity
    double utility = 0.0; // sum of w_k * log(rate_k)
};

// Maximizes sum_k w_k log(lambda_k) over the fluid-feasible region with
// lambda_k <= cap_k, by cutting planes on the concave objective. Test oracle;
// converges to `tol` in objective value.
UtilityOracleResult utility_optimum_oracle(const Topology& topo, const TunnelSet& tunnels,
                                           const RateVector& weights, const RateVector& rate_caps,
                                           const std::vector<double>& caps, double tol = 1e-4);

} // namespace oorp
