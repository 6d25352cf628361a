#include <algorithm>
#include <set>

#include "doctest.h"
#include "oorp/rng.hpp"
#include "oorp/topology.hpp"
#include "oorp/tunnels.hpp"

using namespace oorp;

namespace {

Topology load_fixture(const std::string& name) {
    Topology t = Topology::parse_file(std::string(FIXTURE_DIR) + "/" + name);
    t.derive_routes();
    t.validate();
    return t;
}

std::vector<std::string> path_names(const Topology& topo, const std::vector<NodeIndex>& path) {
    std::vector<std::string> out;
    for (NodeIndex n : path) out.push_back(topo.node_name(n));
    return out;
}

bool has_tunnel(const Topology& topo, const TunnelSet& set, const std::vector<std::string>& want) {
    for (TunnelIndex t = 0; t < set.size(); ++t)
        if (path_names(topo, set[t].path) == want) return true;
    return false;
}

TunnelIndex find_tunnel(const Topology& topo, const TunnelSet& set,
                        const std::vector<std::string>& want) {
    for (TunnelIndex t = 0; t < set.size(); ++t)
        if (path_names(topo, set[t].path) == want) return t;
    REQUIRE(false);
    return -1;
}

const char* kFig2 = R"(
node 1 overlay
node 2 overlay
node 4 overlay
node 5 overlay
node 3 underlay
link 1 3 1
link 2 3 1
link 3 4 2
link 3 5 1
link 1 4 1
commodity c1 1 4 1
)";

const char* kFig6Line = R"(
node 1 overlay
node 4 overlay
node 2 underlay
node 3 underlay
link 1 2 3
link 2 3 1
link 3 4 2
commodity c1 1 4 1
)";

} // namespace

TEST_CASE("derive_routes on the ring fixture") {
    Topology topo = load_fixture("topoA.topo");
    auto path = topo.route_path(topo.node_index("3"), topo.node_index("d1"));
    CHECK(path_names(topo, path) == std::vector<std::string>{"3", "1", "2", "d1"});
    // Deterministic: deriving again changes nothing.
    auto saved = topo.next_hop;
    topo.derive_routes();
    CHECK(saved == topo.next_hop);
}

TEST_CASE("derive_routes single interior node") {
    Topology topo = Topology::parse_text(R"(
node a overlay
node b overlay
node u underlay
link a u 1
link u b 1
commodity c a b 1
)");
    topo.derive_routes();
    topo.validate();
    auto path = topo.route_path(topo.node_index("u"), topo.node_index("b"));
    CHECK(path_names(topo, path) == std::vector<std::string>{"u", "b"});
}

TEST_CASE("derive_routes on the bottleneck line") {
    Topology topo = Topology::parse_text(kFig6Line);
    topo.derive_routes();
    auto path = topo.route_path(topo.node_index("2"), topo.node_index("4"));
    CHECK(path_names(topo, path) == std::vector<std::string>{"2", "3", "4"});
}

TEST_CASE("route_path reports unreachable pairs") {
    Topology topo = Topology::parse_text(kFig6Line);
    topo.derive_routes();
    CHECK_THROWS_WITH_AS(topo.route_path(topo.node_index("3"), topo.node_index("1")),
                         doctest::Contains("no route from '3' to '1'"), TopologyError);
}

TEST_CASE("explicit route table wins over shortest paths") {
    // Two routes from u to b: direct link and via v. Shortest path would pick
    // the direct link; the fixture pins the detour.
    Topology topo = Topology::parse_text(R"(
node a overlay
node b overlay
node u underlay
node v underlay
link a u 1
link u b 1
link u v 1
link v b 1
route u b v
commodity c a b 1
)");
    topo.derive_routes();
    topo.validate();
    auto path = topo.route_path(topo.node_index("u"), topo.node_index("b"));
    CHECK(path_names(topo, path) == std::vector<std::string>{"u", "v", "b"});
}

TEST_CASE("tunnel enumeration on the ring fixture") {
    Topology topo = load_fixture("topoA.topo");
    TunnelSet set = TunnelSet::enumerate(topo);
    // Each commodity is pinned to two tunnels; the effective universe is 6.
    CHECK(set.size() == 6);
    CHECK(has_tunnel(topo, set, {"s1", "1", "2", "d1"}));
    CHECK(has_tunnel(topo, set, {"s1", "3", "1", "2", "d1"}));
    int c1 = topo.commodity_index("c1");
    int from_s1 = 0;
    for (TunnelIndex t = 0; t < set.size(); ++t)
        if (set[t].head() == topo.node_index("s1") && set.allowed(t, c1)) ++from_s1;
    CHECK(from_s1 == 2);
}

TEST_CASE("tunnel enumeration includes direct links and shared-node tunnels") {
    Topology topo = Topology::parse_text(kFig2);
    topo.derive_routes();
    topo.validate();
    TunnelSet set = TunnelSet::enumerate(topo);
    CHECK(has_tunnel(topo, set, {"1", "3", "4"}));
    CHECK(has_tunnel(topo, set, {"2", "3", "4"}));
    CHECK(has_tunnel(topo, set, {"2", "3", "5"}));
    CHECK(has_tunnel(topo, set, {"1", "4"}));
    TunnelIndex direct = find_tunnel(topo, set, {"1", "4"});
    CHECK(set[direct].is_direct());
    CHECK(set.direct_tunnel(topo.link_index(topo.node_index("1"), topo.node_index("4"))) ==
          direct);
}

TEST_CASE("two-node overlay clique yields the two direct tunnels") {
    Topology topo = Topology::parse_text(R"(
node a overlay
node b overlay
link a b 1
link b a 1
commodity c a b 1
)");
    topo.derive_routes();
    TunnelSet set = TunnelSet::enumerate(topo);
    CHECK(set.size() == 2);
    CHECK(set[0].is_direct());
    CHECK(set[1].is_direct());
}

TEST_CASE("tunnels_through membership") {
    Topology fig2 = Topology::parse_text(kFig2);
    fig2.derive_routes();
    TunnelSet set2 = TunnelSet::enumerate(fig2);
    auto through34 = set2.through(fig2, fig2.node_index("3"), fig2.node_index("4"));
    std::set<std::vector<std::string>> got;
    for (TunnelIndex t : through34) got.insert(path_names(fig2, set2[t].path));
    CHECK(got == std::set<std::vector<std::string>>{{"1", "3", "4"}, {"2", "3", "4"}});

    CHECK_THROWS_AS(set2.through(fig2, fig2.node_index("4"), fig2.node_index("5")),
                    TopologyError);

    // A link no tunnel crosses.
    Topology line = Topology::parse_text(R"(
node 1 overlay
node 4 overlay
node 2 underlay
node 3 underlay
node 5 underlay
link 1 2 3
link 2 3 1
link 3 4 2
link 3 5 1
commodity c1 1 4 1
)");
    line.derive_routes();
    TunnelSet lineset = TunnelSet::enumerate(line);
    CHECK(lineset.through(line, line.node_index("3"), line.node_index("5")).empty());

    Topology topoA = load_fixture("topoA.topo");
    TunnelSet setA = TunnelSet::enumerate(topoA);
    auto through12 = setA.through(topoA, topoA.node_index("1"), topoA.node_index("2"));
    std::set<std::vector<std::string>> gotA;
    for (TunnelIndex t : through12) gotA.insert(path_names(topoA, setA[t].path));
    CHECK(gotA == std::set<std::vector<std::string>>{{"s1", "1", "2", "d1"},
                                                     {"s1", "3", "1", "2", "d1"},
                                                     {"s2", "1", "2", "3", "d2"}});
}

TEST_CASE("restriction naming a non-tunnel path fails") {
    Topology topo = Topology::parse_text(R"(
node a overlay
node b overlay
node u underlay
link a u 1
link u b 1
commodity c a b 1
restrict c a,b
)");
    topo.derive_routes();
    CHECK_THROWS_WITH_AS(TunnelSet::enumerate(topo), doctest::Contains("not a tunnel"),
                         TopologyError);
}

TEST_CASE("random graphs: tunnel invariants and membership cross-check") {
    Rng rng(20240817);
    for (int trial = 0; trial < 60; ++trial) {
        int n_over = 2 + static_cast<int>(rng.next_u64() % 3);
        int n_under = 2 + static_cast<int>(rng.next_u64() % 4);
        Topology topo;
        for (int i = 0; i < n_over; ++i)
            topo.nodes.push_back({"o" + std::to_string(i), NodeKind::Overlay});
        for (int i = 0; i < n_under; ++i)
            topo.nodes.push_back({"u" + std::to_string(i), NodeKind::Underlay});
        int n = n_over + n_under;
        std::set<std::pair<int, int>> used;
        int nlinks = n + static_cast<int>(rng.next_u64() % (2 * n));
        for (int e = 0; e < nlinks; ++e) {
            int a = static_cast<int>(rng.next_u64() % n);
            int b = static_cast<int>(rng.next_u64() % n);
            if (a == b || used.count({a, b})) continue;
            used.insert({a, b});
            topo.links.push_back({a, b, 1 + static_cast<int>(rng.next_u64() % 3)});
        }
        topo.commodities.push_back({"k", 0, 1, 1.0});
        topo.build_indexes();
        topo.derive_routes();
        topo.validate();
        TunnelSet set = TunnelSet::enumerate(topo);

        for (TunnelIndex t = 0; t < set.size(); ++t) {
            const Tunnel& tun = set[t];
            CHECK(topo.is_overlay(tun.head()));
            CHECK(topo.is_overlay(tun.tail()));
            std::set<NodeIndex> seen;
            for (NodeIndex nd : tun.path) CHECK(seen.insert(nd).second); // acyclic
            for (size_t i = 1; i + 1 < tun.path.size(); ++i) {
                CHECK(!topo.is_overlay(tun.path[i]));
                // Interior hops follow the underlay route table exactly.
                CHECK(topo.next_hop.at({tun.path[i], tun.tail()}) == tun.path[i + 1]);
            }
        }
        // through(a,b) equals a brute-force scan of links.
        for (LinkIndex e = 0; e < static_cast<int>(topo.links.size()); ++e) {
            std::set<TunnelIndex> brute;
            for (TunnelIndex t = 0; t < set.size(); ++t) {
                const auto& links = set[t].links;
                if (std::find(links.begin(), links.end(), e) != links.end()) brute.insert(t);
            }
            const auto& fast = set.through_link(e);
            CHECK(std::set<TunnelIndex>(fast.begin(), fast.end()) == brute);
        }
    }
}
