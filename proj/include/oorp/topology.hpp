#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oorp {

enum class NodeKind { Overlay, Underlay };

using NodeIndex = int;
using LinkIndex = int;

struct Node {
    std::string name;
    NodeKind kind;
};

struct Link {
    NodeIndex from;
    NodeIndex to;
    int capacity; // packets per slot
};

struct Commodity {
    std::string name;
    NodeIndex source;
    NodeIndex destination;
    double lambda_max = 0.0; // per-commodity max rate published by the fixture
};

class TopologyError : public std::runtime_error {
public:
    explicit TopologyError(const std::string& what) : std::runtime_error(what) {}
};

// Directed capacitated graph with overlay/underlay node kinds and a static
// single-path next-hop table for the underlay. Immutable once built+validated;
// shared read-only across parallel runs.
class Topology {
public:
    std::vector<Node> nodes;
    std::vector<Link> links;
    std::vector<Commodity> commodities;

    // (underlay node, destination) -> next hop. Explicit entries from the
    // fixture file take precedence over shortest-path derivation.
    std::map<std::pair<NodeIndex, NodeIndex>, NodeIndex> next_hop;

    // Per-commodity tunnel restriction: node-name paths a commodity is allowed
    // to use. Commodities with no entry may use every tunnel.
    std::map<std::string, std::vector<std::vector<std::string>>> restrictions;

    NodeIndex node_index(const std::string& name) const;
    const std::string& node_name(NodeIndex i) const { return nodes.at(i).name; }
    bool is_overlay(NodeIndex i) const { return nodes.at(i).kind == NodeKind::Overlay; }

    LinkIndex link_index(NodeIndex from, NodeIndex to) const; // throws if absent
    std::optional<LinkIndex> find_link(NodeIndex from, NodeIndex to) const;

    const std::vector<LinkIndex>& out_links(NodeIndex i) const { return out_links_.at(i); }

    // Links whose tail is an underlay node; these carry the FIFO queues.
    const std::vector<LinkIndex>& uncontrollable_links() const { return uncontrollable_; }
    // Links between two overlay nodes.
    const std::vector<LinkIndex>& overlay_links() const { return overlay_links_; }

    int commodity_index(const std::string& name) const;

    // Fills next_hop entries (where absent) with hop-count shortest paths.
    // Ties are broken by lexicographically smallest next-hop name so the
    // result is reproducible. Routes never pass through an overlay node.
    void derive_routes();

    // Follows next_hop from `from` to `to`. Throws TopologyError naming the
    // pair when no route exists.
    std::vector<NodeIndex> route_path(NodeIndex from, NodeIndex to) const;

    // Structural invariants: positive integer capacities, acyclic unique
    // routes, no overlay interior nodes, commodity endpoints overlay.
    void validate() const;

    // Builds the adjacency indexes; called by parse()/finalize paths.
    void build_indexes();

    static Topology parse_file(const std::string& path);
    static Topology parse_text(const std::string& text, const std::string& origin = "<text>");

private:
    std::map<std::string, NodeIndex> name_to_index_;
    std::map<std::pair<NodeIndex, NodeIndex>, LinkIndex> link_lookup_;
    std::vector<std::vector<LinkIndex>> out_links_;
    std::vector<LinkIndex> uncontrollable_;
    std::vector<LinkIndex> overlay_links_;
};

} // namespace oorp
