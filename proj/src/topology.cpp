#include "oorp/topology.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace oorp {

NodeIndex Topology::node_index(const std::string& name) const {
    auto it = name_to_index_.find(name);
    if (it == name_to_index_.end())
        throw TopologyError("unknown node '" + name + "'");
    return it->second;
}

LinkIndex Topology::link_index(NodeIndex from, NodeIndex to) const {
    auto it = link_lookup_.find({from, to});
    if (it == link_lookup_.end())
        throw TopologyError("unknown link (" + node_name(from) + "," + node_name(to) + ")");
    return it->second;
}

std::optional<LinkIndex> Topology::find_link(NodeIndex from, NodeIndex to) const {
    auto it = link_lookup_.find({from, to});
    if (it == link_lookup_.end()) return std::nullopt;
    return it->second;
}

int Topology::commodity_index(const std::string& name) const {
    for (size_t k = 0; k < commodities.size(); ++k)
        if (commodities[k].name == name) return static_cast<int>(k);
    throw TopologyError("unknown commodity '" + name + "'");
}

void Topology::build_indexes() {
    name_to_index_.clear();
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (!name_to_index_.emplace(nodes[i].name, static_cast<NodeIndex>(i)).second)
            throw TopologyError("duplicate node '" + nodes[i].name + "'");
    }
    link_lookup_.clear();
    out_links_.assign(nodes.size(), {});
    uncontrollable_.clear();
    overlay_links_.clear();
    for (size_t e = 0; e < links.size(); ++e) {
        const Link& l = links[e];
        if (!link_lookup_.emplace(std::make_pair(l.from, l.to), static_cast<LinkIndex>(e)).second)
            throw TopologyError("duplicate link (" + node_name(l.from) + "," + node_name(l.to) + ")");
        out_links_[l.from].push_back(static_cast<LinkIndex>(e));
        if (!is_overlay(l.from))
            uncontrollable_.push_back(static_cast<LinkIndex>(e));
        else if (is_overlay(l.to))
            overlay_links_.push_back(static_cast<LinkIndex>(e));
    }
}

void Topology::derive_routes() {
    const int n = static_cast<int>(nodes.size());
    // Reverse adjacency restricted to links whose tail is underlay: routing
    // state only exists at underlay nodes, and routes may not pass through an
    // overlay node.
    std::vector<std::vector<NodeIndex>> rev(n);
    for (const Link& l : links)
        if (!is_overlay(l.from)) rev[l.to].push_back(l.from);

    for (NodeIndex dest = 0; dest < n; ++dest) {
        // BFS from the destination over reversed underlay links.
        std::vector<int> dist(n, -1);
        dist[dest] = 0;
        std::deque<NodeIndex> queue{dest};
        while (!queue.empty()) {
            NodeIndex v = queue.front();
            queue.pop_front();
            for (NodeIndex u : rev[v]) {
                if (dist[u] < 0) {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        for (NodeIndex a = 0; a < n; ++a) {
            if (is_overlay(a) || a == dest || dist[a] < 0) continue;
            if (next_hop.count({a, dest})) continue; // explicit entry wins
            NodeIndex best = -1;
            for (LinkIndex e : out_links_[a]) {
                NodeIndex j = links[e].to;
                if (j != dest && (is_overlay(j) || dist[j] < 0)) continue;
                if (dist[j] != dist[a] - 1) continue;
                if (best < 0 || node_name(j) < node_name(best)) best = j;
            }
            if (best >= 0) next_hop[{a, dest}] = best;
        }
    }
}

std::vector<NodeIndex> Topology::route_path(NodeIndex from, NodeIndex to) const {
    std::vector<NodeIndex> path{from};
    NodeIndex cur = from;
    std::set<NodeIndex> seen{from};
    while (cur != to) {
        auto it = next_hop.find({cur, to});
        if (it == next_hop.end())
            throw TopologyError("no route from '" + node_name(from) + "' to '" +
                                node_name(to) + "' (stuck at '" + node_name(cur) + "')");
        cur = it->second;
        if (!seen.insert(cur).second)
            throw TopologyError("routing loop on path from '" + node_name(from) +
                                "' to '" + node_name(to) + "'");
        path.push_back(cur);
    }
    return path;
}

void Topology::validate() const {
    for (const Link& l : links) {
        if (l.capacity < 1)
            throw TopologyError("link (" + node_name(l.from) + "," + node_name(l.to) +
                                ") must have capacity >= 1");
    }
    for (const Commodity& c : commodities) {
        if (c.source == c.destination)
            throw TopologyError("commodity '" + c.name + "' has source == destination");
        if (!is_overlay(c.source) || !is_overlay(c.destination))
            throw TopologyError("commodity '" + c.name + "' endpoints must be overlay nodes");
    }
    // Every next-hop chain must terminate without revisiting a node and
    // without passing through an overlay node.
    for (const auto& [key, hop] : next_hop) {
        auto [a, dest] = key;
        if (is_overlay(a))
            throw TopologyError("route table entry at overlay node '" + node_name(a) + "'");
        if (!find_link(a, hop))
            throw TopologyError("route next hop (" + node_name(a) + "->" + node_name(hop) +
                                ") is not a link");
        std::vector<NodeIndex> path = route_path(a, dest); // throws on loops
        for (size_t i = 1; i + 1 < path.size(); ++i)
            if (is_overlay(path[i]))
                throw TopologyError("route from '" + node_name(a) + "' to '" + node_name(dest) +
                                    "' passes through overlay node '" + node_name(path[i]) + "'");
    }
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace

Topology Topology::parse_text(const std::string& text, const std::string& origin) {
    Topology topo;
    struct PendingLink { std::string from, to; int cap; };
    struct PendingRoute { std::string node, dest, hop; };
    struct PendingCommodity { std::string name, src, dst; double lmax; };
    std::vector<PendingLink> plinks;
    std::vector<PendingRoute> proutes;
    std::vector<PendingCommodity> pcomms;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw TopologyError(origin + ":" + std::to_string(lineno) + ": " + msg);
        };
        if (toks[0] == "node") {
            if (toks.size() != 3) fail("expected: node <name> overlay|underlay");
            NodeKind kind;
            if (toks[2] == "overlay") kind = NodeKind::Overlay;
            else if (toks[2] == "underlay") kind = NodeKind::Underlay;
            else { fail("bad node kind '" + toks[2] + "'"); return topo; }
            topo.nodes.push_back({toks[1], kind});
        } else if (toks[0] == "link") {
            if (toks.size() != 4) fail("expected: link <from> <to> <capacity>");
            plinks.push_back({toks[1], toks[2], std::stoi(toks[3])});
        } else if (toks[0] == "route") {
            if (toks.size() != 4) fail("expected: route <node> <dest> <nexthop>");
            proutes.push_back({toks[1], toks[2], toks[3]});
        } else if (toks[0] == "commodity") {
            if (toks.size() != 4 && toks.size() != 5)
                fail("expected: commodity <name> <src> <dst> [lambda_max]");
            double lmax = toks.size() == 5 ? std::stod(toks[4]) : 0.0;
            pcomms.push_back({toks[1], toks[2], toks[3], lmax});
        } else if (toks[0] == "restrict") {
            if (toks.size() != 3) fail("expected: restrict <commodity> <n1,n2,...>");
            topo.restrictions[toks[1]].push_back(split_commas(toks[2]));
        } else {
            fail("unknown directive '" + toks[0] + "'");
        }
    }

    topo.build_indexes();
    for (const auto& pl : plinks)
        topo.links.push_back({topo.node_index(pl.from), topo.node_index(pl.to), pl.cap});
    topo.build_indexes(); // rebuild with links present
    for (const auto& pr : proutes)
        topo.next_hop[{topo.node_index(pr.node), topo.node_index(pr.dest)}] =
            topo.node_index(pr.hop);
    for (const auto& pc : pcomms)
        topo.commodities.push_back(
            {pc.name, topo.node_index(pc.src), topo.node_index(pc.dst), pc.lmax});
    for (const auto& [cname, paths] : topo.restrictions) {
        topo.commodity_index(cname); // must exist
        (void)paths;
    }
    return topo;
}

Topology Topology::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw TopologyError("cannot open topology file '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_text(buf.str(), path);
}

} // namespace oorp
