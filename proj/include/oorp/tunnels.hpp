#pragma once

#include <string>
#include <vector>

#include "oorp/topology.hpp"

namespace oorp {

using TunnelIndex = int;

// A fixed path between two overlay nodes. Interior nodes are underlay and
// follow the underlay next-hop table. A direct overlay-overlay edge is the
// degenerate two-node case.
struct Tunnel {
    std::vector<NodeIndex> path;  // l1 ... l_|l|
    std::vector<LinkIndex> links; // links traversed, in order

    NodeIndex head() const { return path.front(); }
    NodeIndex tail() const { return path.back(); }
    LinkIndex first_link() const { return links.front(); }
    bool is_direct() const { return path.size() == 2; }
    // Number of FIFO hops, i.e. links whose tail is an underlay node.
    int underlay_hops() const { return static_cast<int>(path.size()) - 2; }
};

// The effective tunnel universe for a network: every enumerated tunnel some
// commodity may use, plus per-commodity permission masks coming from fixture
// restrictions.
class TunnelSet {
public:
    std::vector<Tunnel> tunnels;

    int size() const { return static_cast<int>(tunnels.size()); }
    const Tunnel& operator[](TunnelIndex t) const { return tunnels.at(t); }

    // Tunnels containing a given link. Throws TopologyError for unknown links.
    const std::vector<TunnelIndex>& through(const Topology& topo, NodeIndex a, NodeIndex b) const;
    const std::vector<TunnelIndex>& through_link(LinkIndex e) const;

    bool allowed(TunnelIndex t, int commodity) const { return allowed_.at(t).at(commodity); }
    const std::vector<TunnelIndex>& tunnels_from(NodeIndex overlay_node) const;
    // Tunnels whose first link is `e` (an overlay->underlay link).
    const std::vector<TunnelIndex>& entered_by(LinkIndex e) const;
    // The two-node tunnel over an overlay-overlay link, or -1 if absent.
    TunnelIndex direct_tunnel(LinkIndex e) const { return direct_of_link_.at(e); }

    std::string path_string(const Topology& topo, TunnelIndex t) const;

    static TunnelSet enumerate(const Topology& topo);

private:
    std::vector<std::vector<char>> allowed_;           // [tunnel][commodity]
    std::vector<std::vector<TunnelIndex>> by_link_;    // [link] -> tunnels through it
    std::vector<std::vector<TunnelIndex>> by_head_;    // [node] -> tunnels starting there
    std::vector<std::vector<TunnelIndex>> by_entry_;   // [link] -> tunnels with that first link
    std::vector<TunnelIndex> direct_of_link_;          // [link] -> direct tunnel or -1
};

} // namespace oorp
