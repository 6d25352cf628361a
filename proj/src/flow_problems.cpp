#include "oorp/flow_problems.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace oorp {

namespace {

constexpr double kTol = 1e-9;

// Variable layout shared by the fluid problems: tunnel flows for every
// allowed (non-direct tunnel, commodity) pair ordered by (tunnel, commodity),
// followed by link flows for every allowed (overlay link, commodity) pair.
struct FluidLayout {
    struct TunnelVar {
        TunnelIndex t;
        int k;
    };
    struct LinkVar {
        LinkIndex e;
        int k;
    };
    std::vector<TunnelVar> tunnel_vars;
    std::vector<LinkVar> link_vars;
    int total = 0;

    static FluidLayout build(const Topology& topo, const TunnelSet& tunnels) {
        FluidLayout lay;
        const int K = static_cast<int>(topo.commodities.size());
        for (TunnelIndex t = 0; t < tunnels.size(); ++t) {
            if (tunnels[t].is_direct()) continue;
            for (int k = 0; k < K; ++k)
                if (tunnels.allowed(t, k)) lay.tunnel_vars.push_back({t, k});
        }
        for (LinkIndex e : topo.overlay_links()) {
            TunnelIndex dt = tunnels.direct_tunnel(e);
            for (int k = 0; k < K; ++k) {
                bool ok = dt < 0 ? true : tunnels.allowed(dt, k);
                if (ok) lay.link_vars.push_back({e, k});
            }
        }
        lay.total = static_cast<int>(lay.tunnel_vars.size() + lay.link_vars.size());
        return lay;
    }

    int link_var_offset() const { return static_cast<int>(tunnel_vars.size()); }
};

double lambda_at(const Topology& topo, const RateVector& lambda, NodeIndex i, int k) {
    return topo.commodities[k].source == i ? lambda[k] : 0.0;
}

// Capacity + conservation rows common to the fluid problems. When
// `theta_var` >= 0 the arrival terms enter scaled by a variable at that
// column instead of as constants, and `lambda` is read as a direction.
void add_fluid_rows(LinearProgram& lp, const FluidLayout& lay, const Topology& topo,
                    const TunnelSet& tunnels, const RateVector& lambda,
                    const std::vector<double>& caps, int theta_var = -1) {
    const int K = static_cast<int>(topo.commodities.size());
    const int off = lay.link_var_offset();

    // Tunnel-capacity constraints on uncontrollable links, and first-link
    // capacity constraints on overlay->underlay links.
    std::vector<LinkIndex> constrained = topo.uncontrollable_links();
    for (LinkIndex e = 0; e < static_cast<int>(topo.links.size()); ++e) {
        const Link& l = topo.links[e];
        if (topo.is_overlay(l.from) && !topo.is_overlay(l.to)) constrained.push_back(e);
    }
    for (LinkIndex e : constrained) {
        std::vector<double> row(lp.num_vars, 0.0);
        bool any = false;
        for (size_t v = 0; v < lay.tunnel_vars.size(); ++v) {
            const Tunnel& t = tunnels[lay.tunnel_vars[v].t];
            if (std::find(t.links.begin(), t.links.end(), e) != t.links.end()) {
                row[v] = 1.0;
                any = true;
            }
        }
        if (any) lp.add_row(std::move(row), caps[e]);
    }

    // Overlay-link capacity constraints.
    for (LinkIndex e : topo.overlay_links()) {
        std::vector<double> row(lp.num_vars, 0.0);
        bool any = false;
        for (size_t v = 0; v < lay.link_vars.size(); ++v)
            if (lay.link_vars[v].e == e) {
                row[off + v] = 1.0;
                any = true;
            }
        if (any) lp.add_row(std::move(row), caps[e]);
    }

    // Flow conservation at every overlay node except the commodity's own
    // destination, written as inflow - outflow + arrivals <= 0.
    for (NodeIndex i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
        if (!topo.is_overlay(i)) continue;
        for (int k = 0; k < K; ++k) {
            if (topo.commodities[k].destination == i) continue;
            std::vector<double> row(lp.num_vars, 0.0);
            for (size_t v = 0; v < lay.tunnel_vars.size(); ++v) {
                if (lay.tunnel_vars[v].k != k) continue;
                const Tunnel& t = tunnels[lay.tunnel_vars[v].t];
                if (t.head() == i) row[v] -= 1.0;
                if (t.tail() == i) row[v] += 1.0;
            }
            for (size_t v = 0; v < lay.link_vars.size(); ++v) {
                if (lay.link_vars[v].k != k) continue;
                const Link& l = topo.links[lay.link_vars[v].e];
                if (l.from == i) row[off + v] -= 1.0;
                if (l.to == i) row[off + v] += 1.0;
            }
            double lam = lambda_at(topo, lambda, i, k);
            if (theta_var >= 0) {
                row[theta_var] = lam;
                lp.add_row(std::move(row), 0.0);
            } else {
                lp.add_row(std::move(row), -lam);
            }
        }
    }
}

FlowVector extract_flow(const FluidLayout& lay, const Topology& topo, const TunnelSet& tunnels,
                        const std::vector<double>& x) {
    const int K = static_cast<int>(topo.commodities.size());
    FlowVector f = FlowVector::zeros(tunnels.size(), static_cast<int>(topo.links.size()), K);
    for (size_t v = 0; v < lay.tunnel_vars.size(); ++v)
        f.ft(lay.tunnel_vars[v].t, lay.tunnel_vars[v].k, K) = x[v];
    for (size_t v = 0; v < lay.link_vars.size(); ++v)
        f.fl(lay.link_vars[v].e, lay.link_vars[v].k, K) = x[lay.link_var_offset() + v];
    return f;
}

double effective_q(const Topology& topo, const DualState& q, NodeIndex i, int k, int K) {
    if (topo.commodities[k].destination == i) return 0.0;
    return q.qn(i, k, K);
}

} // namespace

double DualState::norm() const {
    double s = 0.0;
    for (double v : link_dual) s += v * v;
    for (double v : node_dual) s += v * v;
    return std::sqrt(s);
}

std::vector<double> capacities_of(const Topology& topo) {
    std::vector<double> caps(topo.links.size());
    for (size_t e = 0; e < topo.links.size(); ++e) caps[e] = topo.links[e].capacity;
    return caps;
}

FrameLpResult centralized_frame_lp(const Topology& topo, const TunnelSet& tunnels,
                                   const std::vector<int64_t>& overlay_q,
                                   const std::vector<double>& caps) {
    const int K = static_cast<int>(topo.commodities.size());
    struct Var {
        TunnelIndex t;
        int k;
    };
    std::vector<Var> vars;
    for (TunnelIndex t = 0; t < tunnels.size(); ++t)
        for (int k = 0; k < K; ++k)
            if (tunnels.allowed(t, k)) vars.push_back({t, k});

    LinearProgram lp;
    lp.num_vars = static_cast<int>(vars.size());
    lp.objective.assign(lp.num_vars, 0.0);
    for (size_t v = 0; v < vars.size(); ++v) {
        const Tunnel& t = tunnels[vars[v].t];
        int k = vars[v].k;
        double head_q = static_cast<double>(overlay_q[static_cast<size_t>(t.head()) * K + k]);
        double tail_q = topo.commodities[k].destination == t.tail()
                            ? 0.0
                            : static_cast<double>(overlay_q[static_cast<size_t>(t.tail()) * K + k]);
        lp.objective[v] = head_q - tail_q;
    }
    for (LinkIndex e = 0; e < static_cast<int>(topo.links.size()); ++e) {
        std::vector<double> row(lp.num_vars, 0.0);
        bool any = false;
        for (size_t v = 0; v < vars.size(); ++v) {
            const Tunnel& t = tunnels[vars[v].t];
            if (std::find(t.links.begin(), t.links.end(), e) != t.links.end()) {
                row[v] = 1.0;
                any = true;
            }
        }
        if (any) lp.add_row(std::move(row), caps[e]);
    }

    LpSolution sol = lp_solve(lp);
    if (sol.status != LpStatus::Optimal)
        throw std::runtime_error("frame LP unexpectedly " + to_string(sol.status));
    FrameLpResult out;
    out.flow.assign(static_cast<size_t>(tunnels.size()) * K, 0.0);
    for (size_t v = 0; v < vars.size(); ++v)
        out.flow[static_cast<size_t>(vars[v].t) * K + vars[v].k] = sol.x[v];
    out.objective = sol.objective;
    return out;
}

Rational rationalize(double value, long long q_max) {
    if (value < 0) throw std::invalid_argument("rationalize: negative value");
    if (q_max < 1) q_max = 1;
    // Continued-fraction convergents p/q; when the denominator would exceed
    // q_max, fall back to the best admissible semiconvergent.
    long long p2 = 0, q2 = 1;  // p_{i-2}/q_{i-2}
    long long p1 = 1, q1 = 0;  // p_{i-1}/q_{i-1}
    double v = value;
    for (int iter = 0; iter < 64; ++iter) {
        double fa = std::floor(v + 1e-12);
        long long a = static_cast<long long>(fa);
        long long p = a * p1 + p2;
        long long q = a * q1 + q2;
        if (q > q_max) {
            long long amax = q1 == 0 ? 0 : (q_max - q2) / q1;
            Rational conv{p1, q1 == 0 ? 1 : q1};
            if (amax >= 1) {
                Rational semi{amax * p1 + p2, amax * q1 + q2};
                double err_semi = std::fabs(value - static_cast<double>(semi.p) / semi.q);
                double err_conv = std::fabs(value - static_cast<double>(conv.p) / conv.q);
                return err_semi < err_conv ? semi : conv;
            }
            return conv;
        }
        p2 = p1;
        q2 = q1;
        p1 = p;
        q1 = q;
        double rem = v - fa;
        if (rem < 1e-9) break;
        v = 1.0 / rem;
    }
    return {p1, q1 == 0 ? 1 : q1};
}

FluidResult fluid_feasibility_lp(const Topology& topo, const TunnelSet& tunnels,
                                 const RateVector& lambda, const std::vector<double>& caps) {
    FluidLayout lay = FluidLayout::build(topo, tunnels);
    LinearProgram lp;
    lp.num_vars = lay.total;
    lp.objective.assign(lp.num_vars, 0.0);
    add_fluid_rows(lp, lay, topo, tunnels, lambda, caps);
    LpSolution sol = lp_solve(lp);
    FluidResult out;
    out.feasible = sol.status == LpStatus::Optimal;
    if (out.feasible) out.flow = extract_flow(lay, topo, tunnels, sol.x);
    return out;
}

double max_scaling(const Topology& topo, const TunnelSet& tunnels, const RateVector& direction,
                   const std::vector<double>& caps) {
    bool any = false;
    for (double d : direction)
        if (d > 0) any = true;
    if (!any) throw std::invalid_argument("max_scaling: direction must have a positive entry");

    FluidLayout lay = FluidLayout::build(topo, tunnels);
    LinearProgram lp;
    lp.num_vars = lay.total + 1;
    const int theta = lay.total;
    lp.objective.assign(lp.num_vars, 0.0);
    lp.objective[theta] = 1.0;
    add_fluid_rows(lp, lay, topo, tunnels, direction, caps, theta);
    LpSolution sol = lp_solve(lp);
    if (sol.status != LpStatus::Optimal)
        throw std::runtime_error("max_scaling LP " + to_string(sol.status));
    return sol.objective;
}

DualObjectiveResult dual_objective(const Topology& topo, const TunnelSet& tunnels,
                                   const DualState& q, const RateVector& lambda,
                                   const std::vector<double>& caps) {
    const int K = static_cast<int>(topo.commodities.size());
    DualObjectiveResult out;
    out.argmax = FlowVector::zeros(tunnels.size(), static_cast<int>(topo.links.size()), K);

    double value = 0.0;
    // Overlay-overlay links: winning commodity takes the whole capacity.
    for (LinkIndex e : topo.overlay_links()) {
        const Link& l = topo.links[e];
        TunnelIndex dt = tunnels.direct_tunnel(e);
        int best_k = -1;
        double best_w = 0.0;
        for (int k = 0; k < K; ++k) {
            if (dt >= 0 && !tunnels.allowed(dt, k)) continue;
            double w = effective_q(topo, q, l.from, k, K) - effective_q(topo, q, l.to, k, K);
            if (w > best_w + kTol) {
                best_w = w;
                best_k = k;
            }
        }
        if (best_k >= 0 && best_w > kTol) {
            out.argmax.fl(e, best_k, K) = caps[e];
            value += caps[e] * best_w;
        }
    }
    // Overlay->underlay links: winner over (tunnel with this first link,
    // commodity) takes the whole capacity.
    for (LinkIndex e = 0; e < static_cast<int>(topo.links.size()); ++e) {
        const auto& cands = tunnels.entered_by(e);
        if (cands.empty()) continue;
        TunnelIndex best_t = -1;
        int best_k = -1;
        double best_w = 0.0;
        for (TunnelIndex t : cands) {
            double underlay_sum = 0.0;
            for (LinkIndex m : tunnels[t].links)
                if (!topo.is_overlay(topo.links[m].from)) underlay_sum += q.link_dual[m];
            for (int k = 0; k < K; ++k) {
                if (!tunnels.allowed(t, k)) continue;
                double w = effective_q(topo, q, tunnels[t].head(), k, K) - underlay_sum -
                           effective_q(topo, q, tunnels[t].tail(), k, K);
                if (w > best_w + kTol) {
                    best_w = w;
                    best_t = t;
                    best_k = k;
                }
            }
        }
        if (best_t >= 0 && best_w > kTol) {
            out.argmax.ft(best_t, best_k, K) = caps[e];
            value += caps[e] * best_w;
        }
    }
    // Constant terms of the Lagrangian.
    for (LinkIndex e : topo.uncontrollable_links()) value += q.link_dual[e] * caps[e];
    for (int k = 0; k < K; ++k)
        value -= effective_q(topo, q, topo.commodities[k].source, k, K) * lambda[k];

    out.value = value;
    return out;
}

DualState subgradient(const Topology& topo, const TunnelSet& tunnels, const FlowVector& fstar,
                      const RateVector& lambda, const std::vector<double>& caps) {
    const int K = static_cast<int>(topo.commodities.size());
    DualState g = DualState::zeros(static_cast<int>(topo.links.size()),
                                   static_cast<int>(topo.nodes.size()), K);
    for (LinkIndex e : topo.uncontrollable_links()) {
        double used = 0.0;
        for (TunnelIndex t : tunnels.through_link(e))
            for (int k = 0; k < K; ++k) used += fstar.ft(t, k, K);
        g.link_dual[e] = caps[e] - used;
    }
    for (NodeIndex i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
        if (!topo.is_overlay(i)) continue;
        for (int k = 0; k < K; ++k) {
            if (topo.commodities[k].destination == i) continue;
            double v = -lambda_at(topo, lambda, i, k);
            for (TunnelIndex t : tunnels.tunnels_from(i))
                if (!tunnels[t].is_direct()) v += fstar.ft(t, k, K);
            for (TunnelIndex t = 0; t < tunnels.size(); ++t)
                if (!tunnels[t].is_direct() && tunnels[t].tail() == i) v -= fstar.ft(t, k, K);
            for (LinkIndex e : topo.overlay_links()) {
                const Link& l = topo.links[e];
                if (l.from == i) v += fstar.fl(e, k, K);
                if (l.to == i) v -= fstar.fl(e, k, K);
            }
            g.qn(i, k, K) = v;
        }
    }
    return g;
}

void dual_step(const Topology& topo, DualState& q, const DualState& g, double alpha) {
    if (alpha <= 0) throw std::invalid_argument("dual_step: alpha must be positive");
    const int K = static_cast<int>(topo.commodities.size());
    for (LinkIndex e : topo.uncontrollable_links())
        q.link_dual[e] = std::max(0.0, q.link_dual[e] - alpha * g.link_dual[e]);
    for (NodeIndex i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
        if (!topo.is_overlay(i)) continue;
        for (int k = 0; k < K; ++k) {
            if (topo.commodities[k].destination == i) {
                q.qn(i, k, K) = 0.0;
                continue;
            }
            q.qn(i, k, K) = std::max(0.0, q.qn(i, k, K) - alpha * g.qn(i, k, K));
        }
    }
}

double dual_inner_product(const DualState& a, const DualState& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.link_dual.size(); ++i) s += a.link_dual[i] * b.link_dual[i];
    for (size_t i = 0; i < a.node_dual.size(); ++i) s += a.node_dual[i] * b.node_dual[i];
    return s;
}

UtilityOracleResult utility_optimum_oracle(const Topology& topo, const TunnelSet& tunnels,
                                           const RateVector& weights, const RateVector& rate_caps,
                                           const std::vector<double>& caps, double tol) {
    const int K = static_cast<int>(topo.commodities.size());
    const double lambda_min = 1e-3;
    FluidLayout lay = FluidLayout::build(topo, tunnels);

    // Variables: fluid flows, then lambda_k, then v_k = w_k log(lambda_k)
    // shifted up by -w_k log(lambda_min) so it stays nonnegative.
    const int lam0 = lay.total;
    const int v0 = lay.total + K;
    std::vector<double> shift(K);
    for (int k = 0; k < K; ++k) shift[k] = -weights[k] * std::log(lambda_min);

    struct Cut {
        int k;
        double point;
    };
    std::vector<Cut> cuts;
    for (int k = 0; k < K; ++k)
        for (double x = rate_caps[k]; x > lambda_min; x /= 2.0) cuts.push_back({k, x});

    UtilityOracleResult out;
    for (int iter = 0; iter < 60; ++iter) {
        LinearProgram lp;
        lp.num_vars = lay.total + 2 * K;
        lp.objective.assign(lp.num_vars, 0.0);
        for (int k = 0; k < K; ++k) lp.objective[v0 + k] = 1.0;

        // Same capacity/conservation structure as add_fluid_rows, but with
        // lambda_k entering conservation as a variable.
        const int off = lay.link_var_offset();
        {
            std::vector<LinkIndex> constrained = topo.uncontrollable_links();
            for (LinkIndex e = 0; e < static_cast<int>(topo.links.size()); ++e) {
                const Link& l = topo.links[e];
                if (topo.is_overlay(l.from) && !topo.is_overlay(l.to)) constrained.push_back(e);
            }
            for (LinkIndex e : constrained) {
                std::vector<double> row(lp.num_vars, 0.0);
                bool any = false;
                for (size_t v = 0; v < lay.tunnel_vars.size(); ++v) {
                    const Tunnel& t = tunnels[lay.tunnel_vars[v].t];
                    if (std::find(t.links.begin(), t.links.end(), e) != t.links.end()) {
                        row[v] = 1.0;
                        any = true;
                    }
                }
                if (any) lp.add_row(std::move(row), caps[e]);
            }
            for (LinkIndex e : topo.overlay_links()) {
                std::vector<double> row(lp.num_vars, 0.0);
                bool any = false;
                for (size_t v = 0; v < lay.link_vars.size(); ++v)
                    if (lay.link_vars[v].e == e) {
                        row[off + v] = 1.0;
                        any = true;
                    }
                if (any) lp.add_row(std::move(row), caps[e]);
            }
            for (NodeIndex i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
                if (!topo.is_overlay(i)) continue;
                for (int k = 0; k < K; ++k) {
                    if (topo.commodities[k].destination == i) continue;
                    std::vector<double> row(lp.num_vars, 0.0);
                    for (size_t v = 0; v < lay.tunnel_vars.size(); ++v) {
                        if (lay.tunnel_vars[v].k != k) continue;
                        const Tunnel& t = tunnels[lay.tunnel_vars[v].t];
                        if (t.head() == i) row[v] -= 1.0;
                        if (t.tail() == i) row[v] += 1.0;
                    }
                    for (size_t v = 0; v < lay.link_vars.size(); ++v) {
                        if (lay.link_vars[v].k != k) continue;
                        const Link& l = topo.links[lay.link_vars[v].e];
                        if (l.from == i) row[off + v] -= 1.0;
                        if (l.to == i) row[off + v] += 1.0;
                    }
                    if (topo.commodities[k].source == i) row[lam0 + k] = 1.0;
                    lp.add_row(std::move(row), 0.0);
                }
            }
        }
        for (int k = 0; k < K; ++k) {
            std::vector<double> up(lp.num_vars, 0.0);
            up[lam0 + k] = 1.0;
            lp.add_row(std::move(up), rate_caps[k]);
            std::vector<double> lo(lp.num_vars, 0.0);
            lo[lam0 + k] = -1.0;
            lp.add_row(std::move(lo), -lambda_min);
        }
        // Tangent cuts: v_k - (w/x0) lambda_k <= w (log x0 - 1) + shift_k.
        for (const Cut& c : cuts) {
            std::vector<double> row(lp.num_vars, 0.0);
            row[v0 + c.k] = 1.0;
            row[lam0 + c.k] = -weights[c.k] / c.point;
            lp.add_row(std::move(row), weights[c.k] * (std::log(c.point) - 1.0) + shift[c.k]);
        }

        LpSolution sol = lp_solve(lp);
        if (sol.status != LpStatus::Optimal) {
            out.ok = false;
            return out;
        }
        RateVector rates(K);
        double true_utility = 0.0;
        double relaxed = 0.0;
        for (int k = 0; k < K; ++k) {
            rates[k] = std::max(sol.x[lam0 + k], lambda_min);
            true_utility += weights[k] * std::log(rates[k]);
            relaxed += sol.x[v0 + k] - shift[k];
        }
        out.ok = true;
        out.rates = rates;
        out.utility = true_utility;
        if (relaxed - true_utility < tol) return out;
        for (int k = 0; k < K; ++k) cuts.push_back({k, rates[k]});
    }
    out.ok = false; // refinement budget exhausted before reaching tol
    return out;
}

} // namespace oorp
