#include "oorp/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oorp {

namespace {

// Per-tunnel weight maximisation over commodities; ties go to the lowest
// commodity id. Returns (k, weight) or (-1, 0) when no commodity is allowed.
template <typename WeightFn>
std::pair<int, double> best_commodity(const TunnelSet& tunnels, TunnelIndex t, int K,
                                      WeightFn&& weight) {
    int best_k = -1;
    double best_w = 0.0;
    for (int k = 0; k < K; ++k) {
        if (!tunnels.allowed(t, k)) continue;
        double w = weight(k);
        if (best_k < 0 || w > best_w) {
            best_k = k;
            best_w = w;
        }
    }
    return {best_k, best_w};
}

// BP and OBP decide per tunnel, requesting the full first-link capacity for
// the winning commodity. Two allocations happen on top of the raw requests:
// shared first links are granted in tunnel id order, and a source queue that
// cannot cover all of its requests serves them longest tunnel first (these
// policies see equal-weight tunnels as interchangeable; the underlay cost of
// the choice is exactly what they fail to account for).
void backpressure_like(const Engine& eng, SlotDecision& decision, bool subtract_in_flight) {
    const Topology& topo = eng.topo();
    const TunnelSet& tunnels = eng.tunnels();
    const int K = eng.commodity_count();
    decision.reset(tunnels.size(), static_cast<int>(topo.links.size()), K);

    std::vector<int> remaining(topo.links.size());
    for (size_t e = 0; e < topo.links.size(); ++e) remaining[e] = topo.links[e].capacity;

    struct Request {
        TunnelIndex t;
        int k;
        int want;
    };
    std::map<std::pair<NodeIndex, int>, std::vector<Request>> by_queue;

    for (TunnelIndex t = 0; t < tunnels.size(); ++t) {
        const Tunnel& tun = tunnels[t];
        auto [k, w] = best_commodity(tunnels, t, K, [&](int kk) {
            double v = static_cast<double>(eng.weight_queue(tun.head(), kk)) -
                       static_cast<double>(eng.weight_queue(tun.tail(), kk));
            if (subtract_in_flight && !tun.is_direct())
                v -= static_cast<double>(eng.in_flight(t, kk));
            return v;
        });
        if (k < 0 || w <= 0) continue;
        LinkIndex first = tun.first_link();
        int want = std::min(topo.links[first].capacity, remaining[first]);
        if (want <= 0) continue;
        remaining[first] -= want;
        by_queue[{tun.head(), k}].push_back({t, k, want});
    }

    for (auto& [key, reqs] : by_queue) {
        int64_t avail = eng.overlay_queue(key.first, key.second);
        int64_t total = 0;
        for (const Request& r : reqs) total += r.want;
        if (total <= avail) {
            for (const Request& r : reqs) decision.tun(r.t, r.k, K) = r.want;
            continue;
        }
        std::sort(reqs.begin(), reqs.end(), [&](const Request& a, const Request& b) {
            size_t la = tunnels[a.t].path.size(), lb = tunnels[b.t].path.size();
            if (la != lb) return la > lb;
            return a.t < b.t;
        });
        for (const Request& r : reqs) {
            int grant = static_cast<int>(std::min<int64_t>(r.want, avail));
            if (grant <= 0) break;
            decision.tun(r.t, r.k, K) = grant;
            avail -= grant;
        }
    }
}

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

} // namespace

void BpPolicy::decide(const Engine& eng, SlotDecision& decision) {
    backpressure_like(eng, decision, false);
}

void ObpPolicy::decide(const Engine& eng, SlotDecision& decision) {
    backpressure_like(eng, decision, true);
}

CentralizedPolicy::CentralizedPolicy(const Topology& topo, const TunnelSet& tunnels,
                                     CentralizedConfig cfg)
    : cfg_(cfg) {
    if (cfg_.frame_length < 1) throw std::invalid_argument("frame length must be >= 1");
    sched_.assign(static_cast<size_t>(tunnels.size()) * topo.commodities.size(), {});
    lp_caps_ = capacities_of(topo);
    for (double& c : lp_caps_) c *= (1.0 - cfg_.capacity_shrink);
    frame_budget_.assign(topo.links.size(), 0);
    origin_remaining_.assign(topo.links.size(), 0);
}

void CentralizedPolicy::decide(const Engine& eng, SlotDecision& decision) {
    const Topology& topo = eng.topo();
    const TunnelSet& tunnels = eng.tunnels();
    const int K = eng.commodity_count();
    decision.reset(tunnels.size(), static_cast<int>(topo.links.size()), K);

    if (frame_slot_ % cfg_.frame_length == 0) {
        std::vector<int64_t> q(topo.nodes.size() * K);
        for (size_t i = 0; i < topo.nodes.size(); ++i)
            for (int k = 0; k < K; ++k)
                q[i * K + k] = eng.overlay_queue(static_cast<NodeIndex>(i), k);
        FrameLpResult r = centralized_frame_lp(topo, tunnels, q, lp_caps_);
        for (size_t v = 0; v < sched_.size(); ++v) {
            Rational rat = rationalize(std::max(0.0, r.flow[v]), cfg_.q_max);
            sched_[v] = {rat.p, rat.q, 0};
        }
        frame_slot_ = 0;
        for (size_t e = 0; e < topo.links.size(); ++e)
            frame_budget_[e] =
                static_cast<long long>(cfg_.frame_length) * topo.links[e].capacity;
    }

    for (size_t e = 0; e < topo.links.size(); ++e) origin_remaining_[e] = topo.links[e].capacity;

    // Emit p packets every q slots per (tunnel, commodity), ceiling-first
    // (1.5 -> 2,1,2,1,...). Each slot's sends are capped at the first-link
    // capacity; each frame's total is capped at every crossed link's frame
    // capacity. Shortfalls carry over because emission tracks the cumulative
    // target.
    for (TunnelIndex t = 0; t < tunnels.size(); ++t) {
        for (int k = 0; k < K; ++k) {
            Schedule& s = sched_[static_cast<size_t>(t) * K + k];
            if (s.p <= 0) continue;
            long long target = ceil_div(static_cast<long long>(frame_slot_ + 1) * s.p, s.q);
            long long want = target - s.emitted;
            if (want <= 0) continue;
            LinkIndex first = tunnels[t].first_link();
            long long grant = std::min(want, static_cast<long long>(origin_remaining_[first]));
            for (LinkIndex e : tunnels[t].links) grant = std::min(grant, frame_budget_[e]);
            if (grant <= 0) continue;
            decision.tun(t, k, K) = static_cast<int>(grant);
            s.emitted += grant;
            origin_remaining_[first] -= static_cast<int>(grant);
            for (LinkIndex e : tunnels[t].links) frame_budget_[e] -= grant;
        }
    }
    ++frame_slot_;
}

OorpPolicy::OorpPolicy(const TunnelSet& tunnels, EstimatorConfig est) : estimator_(tunnels, est) {}

std::string OorpPolicy::name() const { return "oorp-" + to_string(estimator_.mode()); }

void OorpPolicy::decide(const Engine& eng, SlotDecision& decision) {
    const Topology& topo = eng.topo();
    const TunnelSet& tunnels = eng.tunnels();
    const int K = eng.commodity_count();
    decision.reset(tunnels.size(), static_cast<int>(topo.links.size()), K);

    // Overlay-overlay links: winning commodity takes the link capacity.
    for (LinkIndex e : topo.overlay_links()) {
        const Link& l = topo.links[e];
        TunnelIndex dt = tunnels.direct_tunnel(e);
        int best_k = -1;
        double best_w = 0.0;
        for (int k = 0; k < K; ++k) {
            if (dt >= 0 && !tunnels.allowed(dt, k)) continue;
            double w = static_cast<double>(eng.weight_queue(l.from, k)) -
                       static_cast<double>(eng.weight_queue(l.to, k));
            if (best_k < 0 || w > best_w) {
                best_k = k;
                best_w = w;
            }
        }
        if (best_k >= 0 && best_w > 0) decision.lnk(e, best_k, K) = l.capacity;
    }

    // Overlay->underlay links: winner over (tunnel entering here, commodity),
    // weight = source queue - estimated tunnel backlog - tail queue. Ties go
    // to the lowest (tunnel, commodity) pair.
    for (LinkIndex e = 0; e < static_cast<int>(topo.links.size()); ++e) {
        const auto& cands = tunnels.entered_by(e);
        if (cands.empty()) continue;
        TunnelIndex best_t = -1;
        int best_k = -1;
        double best_w = 0.0;
        for (TunnelIndex t : cands) {
            const Tunnel& tun = tunnels[t];
            double est = estimator_.estimate(eng, t);
            for (int k = 0; k < K; ++k) {
                if (!tunnels.allowed(t, k)) continue;
                double w = static_cast<double>(eng.weight_queue(tun.head(), k)) - est -
                           static_cast<double>(eng.weight_queue(tun.tail(), k));
                if (best_t < 0 || w > best_w) {
                    best_t = t;
                    best_k = k;
                    best_w = w;
                }
            }
        }
        if (best_t >= 0 && best_w > 0) decision.tun(best_t, best_k, K) = topo.links[e].capacity;
    }

    estimator_.request_probes(eng, decision);
}

void OorpPolicy::observe(const Engine& eng, const SlotTrace& trace) {
    estimator_.observe(eng, trace);
}

double rate_control_choose(double w, double q, double M) {
    if (q <= 0.0) return M;
    return std::min(M, w / q);
}

RateControlledPolicy::RateControlledPolicy(std::unique_ptr<Policy> inner,
                                           RateControllerConfig cfg)
    : inner_(std::move(inner)), cfg_(std::move(cfg)) {
    credit_.assign(cfg_.weight.size(), 0.0);
}

void RateControlledPolicy::admissions(const Engine& eng, std::vector<int>& out) {
    const int K = eng.commodity_count();
    out.assign(K, 0);
    for (int k = 0; k < K; ++k) {
        if (k >= static_cast<int>(cfg_.weight.size()) || cfg_.weight[k] <= 0) continue;
        double q = static_cast<double>(
            eng.overlay_queue(eng.topo().commodities[k].source, k));
        double lam = rate_control_choose(cfg_.weight[k], q, cfg_.cap[k]);
        credit_[k] += lam;
        int n = static_cast<int>(credit_[k]);
        credit_[k] -= n;
        out[k] = n;
    }
}

std::unique_ptr<Policy> make_policy(const std::string& name, const Topology& topo,
                                    const TunnelSet& tunnels, const EstimatorConfig& est,
                                    const CentralizedConfig& cen) {
    if (name == "bp") return std::make_unique<BpPolicy>();
    if (name == "obp") return std::make_unique<ObpPolicy>();
    if (name == "centralized") return std::make_unique<CentralizedPolicy>(topo, tunnels, cen);
    if (name == "oorp") return std::make_unique<OorpPolicy>(tunnels, est);
    throw std::invalid_argument("unknown policy '" + name + "'");
}

} // namespace oorp
