#include "oorp/tunnels.hpp"

#include <algorithm>
#include <set>

namespace oorp {

namespace {

// Candidate tunnel from overlay node u entering the underlay at j, destined
// for overlay node v. Returns an empty path when the route does not exist or
// would pass through another overlay node.
std::vector<NodeIndex> trace_tunnel(const Topology& topo, NodeIndex u, NodeIndex j, NodeIndex v) {
    std::vector<NodeIndex> path{u, j};
    NodeIndex cur = j;
    std::set<NodeIndex> seen{u, j};
    while (cur != v) {
        auto it = topo.next_hop.find({cur, v});
        if (it == topo.next_hop.end()) return {};
        cur = it->second;
        if (cur != v && topo.is_overlay(cur)) return {};
        if (!seen.insert(cur).second) return {}; // acyclic only
        path.push_back(cur);
    }
    return path;
}

} // namespace

TunnelSet TunnelSet::enumerate(const Topology& topo) {
    std::vector<std::vector<NodeIndex>> paths;
    std::set<std::vector<NodeIndex>> dedupe;

    std::vector<NodeIndex> overlays;
    for (NodeIndex i = 0; i < static_cast<int>(topo.nodes.size()); ++i)
        if (topo.is_overlay(i)) overlays.push_back(i);

    for (NodeIndex u : overlays) {
        for (LinkIndex e : topo.out_links(u)) {
            NodeIndex j = topo.links[e].to;
            if (topo.is_overlay(j)) {
                std::vector<NodeIndex> p{u, j};
                if (dedupe.insert(p).second) paths.push_back(p);
                continue;
            }
            for (NodeIndex v : overlays) {
                if (v == u) continue;
                auto p = trace_tunnel(topo, u, j, v);
                if (!p.empty() && dedupe.insert(p).second) paths.push_back(std::move(p));
            }
        }
    }

    // Canonical ordering: by head name, tail name, length, then node names.
    auto key = [&](const std::vector<NodeIndex>& p) {
        std::vector<std::string> names;
        names.push_back(topo.node_name(p.front()));
        names.push_back(topo.node_name(p.back()));
        names.push_back(std::to_string(p.size()));
        for (NodeIndex n : p) names.push_back(topo.node_name(n));
        return names;
    };
    std::sort(paths.begin(), paths.end(),
              [&](const auto& a, const auto& b) { return key(a) < key(b); });

    const int K = static_cast<int>(topo.commodities.size());

    // Match restriction paths (node-name sequences) against enumerated paths.
    std::vector<std::vector<char>> allowed_by_commodity(K);
    std::vector<char> restricted(K, 0);
    for (int k = 0; k < K; ++k) {
        auto it = topo.restrictions.find(topo.commodities[k].name);
        if (it == topo.restrictions.end()) continue;
        restricted[k] = 1;
        allowed_by_commodity[k].assign(paths.size(), 0);
        for (const auto& want : it->second) {
            bool found = false;
            for (size_t t = 0; t < paths.size(); ++t) {
                if (paths[t].size() != want.size()) continue;
                bool eq = true;
                for (size_t i = 0; i < want.size(); ++i)
                    if (topo.node_name(paths[t][i]) != want[i]) { eq = false; break; }
                if (eq) { allowed_by_commodity[k][t] = 1; found = true; break; }
            }
            if (!found) {
                std::string s;
                for (const auto& n : want) s += (s.empty() ? "" : ",") + n;
                throw TopologyError("restriction for commodity '" + topo.commodities[k].name +
                                    "' names a path that is not a tunnel: " + s);
            }
        }
    }

    // Keep only tunnels usable by at least one commodity. If every commodity
    // is restricted, that prunes the universe down to the union of the lists.
    std::vector<size_t> kept;
    bool any_unrestricted = false;
    for (int k = 0; k < K; ++k)
        if (!restricted[k]) any_unrestricted = true;
    for (size_t t = 0; t < paths.size(); ++t) {
        bool keep = any_unrestricted || K == 0;
        for (int k = 0; k < K && !keep; ++k)
            if (restricted[k] && allowed_by_commodity[k][t]) keep = true;
        if (keep) kept.push_back(t);
    }

    TunnelSet set;
    for (size_t t : kept) {
        Tunnel tun;
        tun.path = paths[t];
        for (size_t i = 0; i + 1 < tun.path.size(); ++i)
            tun.links.push_back(topo.link_index(tun.path[i], tun.path[i + 1]));
        set.tunnels.push_back(std::move(tun));
    }

    set.allowed_.assign(set.tunnels.size(), std::vector<char>(std::max(K, 1), 1));
    for (size_t ti = 0; ti < kept.size(); ++ti)
        for (int k = 0; k < K; ++k)
            set.allowed_[ti][k] = restricted[k] ? allowed_by_commodity[k][kept[ti]] : 1;

    set.by_link_.assign(topo.links.size(), {});
    set.by_head_.assign(topo.nodes.size(), {});
    set.by_entry_.assign(topo.links.size(), {});
    set.direct_of_link_.assign(topo.links.size(), -1);
    for (TunnelIndex t = 0; t < set.size(); ++t) {
        for (LinkIndex e : set.tunnels[t].links) set.by_link_[e].push_back(t);
        set.by_head_[set.tunnels[t].head()].push_back(t);
        if (set.tunnels[t].is_direct())
            set.direct_of_link_[set.tunnels[t].first_link()] = t;
        else
            set.by_entry_[set.tunnels[t].first_link()].push_back(t);
    }
    return set;
}

const std::vector<TunnelIndex>& TunnelSet::through(const Topology& topo, NodeIndex a,
                                                   NodeIndex b) const {
    return by_link_.at(topo.link_index(a, b));
}

const std::vector<TunnelIndex>& TunnelSet::through_link(LinkIndex e) const {
    return by_link_.at(e);
}

const std::vector<TunnelIndex>& TunnelSet::tunnels_from(NodeIndex overlay_node) const {
    return by_head_.at(overlay_node);
}

const std::vector<TunnelIndex>& TunnelSet::entered_by(LinkIndex e) const {
    return by_entry_.at(e);
}

std::string TunnelSet::path_string(const Topology& topo, TunnelIndex t) const {
    std::string s;
    for (NodeIndex n : tunnels.at(t).path) s += (s.empty() ? "" : ",") + topo.node_name(n);
    return "(" + s + ")";
}

} // namespace oorp
