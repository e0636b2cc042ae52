#include <gtest/gtest.h>

#include <map>
#include <regex>
#include <set>

#include "qrrn/errors.hpp"
#include "qrrn/rng.hpp"
#include "qrrn/roadnet.hpp"
#include "test_support.hpp"

using namespace qrrn;

namespace {

const char* kTwoNode = R"({
  "name": "tiny",
  "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]},
            {"id": 1, "x": 1, "y": 0, "tags": ["goal"]}],
  "edges": [{"from": 0, "to": 1, "action": 0}],
  "start": 0, "goals": [1], "crosswalks": []
})";

// Node 0 fans out to 1, 2, 3; each of those reaches goal 4.
const char* kFanOut = R"({
  "name": "fan",
  "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]},
            {"id": 1, "x": 1, "y": 1, "tags": []},
            {"id": 2, "x": 1, "y": 0, "tags": ["crosswalk"]},
            {"id": 3, "x": 1, "y": -1, "tags": []},
            {"id": 4, "x": 2, "y": 0, "tags": ["goal"]}],
  "edges": [{"from": 0, "to": 1, "action": 0}, {"from": 0, "to": 2, "action": 1},
            {"from": 0, "to": 3, "action": 2}, {"from": 1, "to": 4, "action": 0},
            {"from": 2, "to": 4, "action": 0}, {"from": 3, "to": 4, "action": 2}],
  "start": 0, "goals": [4], "crosswalks": [2]
})";

}  // namespace

TEST(ParseMap, MinimalTwoNodeMap) {
    const GraphMap m = parse_map(kTwoNode);
    EXPECT_EQ(m.num_states(), 2);
    EXPECT_EQ(m.action_dim(), 1);
    EXPECT_EQ(m.start(), 0);
    EXPECT_EQ(m.goals(), std::vector<NodeId>{1});
}

TEST(ParseMap, ActionDimDefaultsToMaxOutDegree) {
    const GraphMap m = parse_map(kFanOut);
    // Out-degrees by scan: node 0 has 3, the rest at most 1.
    int max_degree = 0;
    for (NodeId s = 0; s < m.num_states(); ++s) max_degree = std::max(max_degree, m.out_degree(s));
    EXPECT_EQ(max_degree, 3);
    EXPECT_EQ(m.action_dim(), 3);
}

TEST(ParseMap, DanglingEdge) {
    const char* doc = R"({"name": "x",
      "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]}, {"id": 1, "x": 0, "y": 0, "tags": []},
                {"id": 2, "x": 0, "y": 0, "tags": ["goal"]}],
      "edges": [{"from": 0, "to": 2, "action": 0}, {"from": 5, "to": 1, "action": 0}],
      "start": 0, "goals": [2], "crosswalks": []})";
    EXPECT_THROW(parse_map(doc), DanglingEdge);
}

TEST(ParseMap, DuplicateAction) {
    const char* doc = R"({"name": "x",
      "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]}, {"id": 1, "x": 0, "y": 0, "tags": []},
                {"id": 2, "x": 0, "y": 0, "tags": ["goal"]}],
      "edges": [{"from": 0, "to": 1, "action": 0}, {"from": 0, "to": 2, "action": 0}],
      "start": 0, "goals": [2], "crosswalks": []})";
    EXPECT_THROW(parse_map(doc), DuplicateAction);
}

TEST(ParseMap, UnreachableGoal) {
    const char* doc = R"({"name": "x",
      "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]}, {"id": 1, "x": 0, "y": 0, "tags": []},
                {"id": 2, "x": 0, "y": 0, "tags": ["goal"]}],
      "edges": [{"from": 0, "to": 1, "action": 0}, {"from": 2, "to": 1, "action": 0}],
      "start": 0, "goals": [2], "crosswalks": []})";
    EXPECT_THROW(parse_map(doc), UnreachableGoal);
}

TEST(ParseMap, SchemaErrors) {
    // unknown top-level key
    EXPECT_THROW(parse_map(R"({"name": "x", "bogus": 1, "nodes": [], "edges": [], "start": 0,
                               "goals": [], "crosswalks": []})"),
                 SchemaError);
    // missing key
    EXPECT_THROW(parse_map(R"({"name": "x", "nodes": [], "edges": [], "start": 0, "goals": []})"), SchemaError);
    // wrong type
    EXPECT_THROW(parse_map(R"({"name": 3, "nodes": [], "edges": [], "start": 0, "goals": [],
                               "crosswalks": []})"),
                 SchemaError);
    // extra key inside a node
    std::string doc = kTwoNode;
    doc.replace(doc.find("\"tags\": [\"start\"]"), 17, "\"tags\": [\"start\"], \"z\": 1");
    EXPECT_THROW(parse_map(doc), SchemaError);
    // non-dense ids
    EXPECT_THROW(parse_map(R"({"name": "x",
      "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]}, {"id": 2, "x": 0, "y": 0, "tags": ["goal"]}],
      "edges": [], "start": 0, "goals": [2], "crosswalks": []})"),
                 Error);
    // start that is also a goal
    EXPECT_THROW(parse_map(R"({"name": "x",
      "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start", "goal"]}],
      "edges": [], "start": 0, "goals": [0], "crosswalks": []})"),
                 SchemaError);
    // tags disagree with the crosswalk list
    EXPECT_THROW(parse_map(R"({"name": "x",
      "nodes": [{"id": 0, "x": 0, "y": 0, "tags": ["start"]}, {"id": 1, "x": 0, "y": 0, "tags": ["goal"]}],
      "edges": [{"from": 0, "to": 1, "action": 0}], "start": 0, "goals": [1], "crosswalks": [0]})"),
                 SchemaError);
    // explicit action_dim disagreeing with the max out-degree
    std::string padded = kTwoNode;
    padded.insert(1, "\"action_dim\": 4,");
    EXPECT_THROW(parse_map(padded), SchemaError);
    EXPECT_THROW(parse_map("{not json"), SchemaError);
}

TEST(ParseMap, RoundTripsThroughEmit) {
    for (const GraphMap& m : {parse_map(kFanOut), parse_map(kTwoNode),
                              generate_scenario(ScenarioKind::three_route, {8, 10, 11})}) {
        EXPECT_EQ(parse_map(emit_map(m)), m);
    }
}

TEST(Transition, EdgeAndLoopback) {
    const GraphMap m = parse_map(kFanOut);
    EXPECT_EQ(transition(m, 0, 1), 2);
    // Node 1 has a single edge on action 0; actions 1 and 2 loop back.
    EXPECT_EQ(transition(m, 1, 0), 4);
    EXPECT_EQ(transition(m, 1, 2), 1);
    // Node 3's only edge uses action 2.
    EXPECT_EQ(transition(m, 3, 2), 4);
    EXPECT_EQ(transition(m, 3, 0), 3);
    // Goal sink: every action loops.
    for (int a = 0; a < m.action_dim(); ++a) EXPECT_EQ(transition(m, 4, a), 4);
}

TEST(Transition, DefinedEdgeToSeven) {
    std::vector<Node> nodes;
    for (int i = 0; i < 8; ++i) nodes.push_back({i, 0, 0, i == 0, i == 7, false});
    std::vector<DirectedEdge> edges{{0, 1, 0}, {0, 7, 1}};
    for (int i = 1; i < 7; ++i) edges.push_back({i, i + 1, 0});
    const GraphMap m("seven", nodes, edges, -1, 0, {7}, {});
    EXPECT_EQ(transition(m, 0, 1), 7);
}

TEST(Transition, Errors) {
    const GraphMap m = parse_map(kFanOut);
    EXPECT_THROW(transition(m, 5, 0), InvalidState);
    EXPECT_THROW(transition(m, -1, 0), InvalidState);
    EXPECT_THROW(transition(m, 0, 3), InvalidAction);
    EXPECT_THROW(transition(m, 0, -1), InvalidAction);
}

TEST(Transition, TotalDeterministicAndLoopbackClosure) {
    for (const GraphMap& m : {parse_map(kFanOut), generate_scenario(ScenarioKind::two_route, {8, 10, 0}),
                              generate_scenario(ScenarioKind::three_route, {5, 7, 9})}) {
        for (NodeId s = 0; s < m.num_states(); ++s) {
            int self = 0;
            for (int a = 0; a < m.action_dim(); ++a) {
                const NodeId t = transition(m, s, a);
                EXPECT_EQ(t, transition(m, s, a));
                EXPECT_TRUE(m.valid_state(t));
                self += t == s;
            }
            EXPECT_EQ(self, m.action_dim() - m.out_degree(s));
        }
    }
}

TEST(GenerateScenario, TwoRouteShortestPathHitsCrosswalk) {
    const GraphMap m = generate_scenario(ScenarioKind::two_route, {8, 10, 0});
    const Route r = shortest_path(m, m.start(), m.goals());
    EXPECT_EQ(r.length(), 8);
    EXPECT_TRUE(route_has_crosswalk(m, r));
    ASSERT_EQ(m.crosswalks().size(), 1u);
    // Crosswalk at node position floor(8 / 2) = 4 along the route.
    EXPECT_EQ(r.nodes[4], m.crosswalks().front());
    EXPECT_EQ(m.goals().size(), 1u);
    EXPECT_EQ(m.action_dim(), 2);
}

TEST(GenerateScenario, ThreeRouteHasThreeSimplePaths) {
    const GraphMap m = generate_scenario(ScenarioKind::three_route, {8, 10, 11});
    // Exhaustive DFS over all walks without repeated nodes.
    std::multiset<int> lengths;
    int with_crosswalk = 0;
    std::vector<NodeId> path{m.start()};
    auto dfs = [&](auto&& self, NodeId s) -> void {
        if (m.is_goal(s)) {
            lengths.insert(static_cast<int>(path.size()) - 1);
            for (NodeId v : path) with_crosswalk += m.is_crosswalk(v);
            return;
        }
        for (const DirectedEdge& e : m.edges()) {
            if (e.from != s || std::find(path.begin(), path.end(), e.to) != path.end()) continue;
            path.push_back(e.to);
            self(self, e.to);
            path.pop_back();
        }
    };
    dfs(dfs, m.start());
    EXPECT_EQ(lengths, (std::multiset<int>{8, 10, 11}));
    EXPECT_EQ(with_crosswalk, 1);

    const auto routes = enumerate_simple_paths(m, m.start(), m.num_states());
    ASSERT_EQ(routes.size(), 3u);
    EXPECT_EQ(routes[0].length(), 8);
    EXPECT_TRUE(route_has_crosswalk(m, routes[0]));
    EXPECT_FALSE(route_has_crosswalk(m, routes[1]));
    EXPECT_FALSE(route_has_crosswalk(m, routes[2]));
}

TEST(GenerateScenario, RoutesShareOnlyEndpoints) {
    const GraphMap m = generate_scenario(ScenarioKind::three_route, {6, 9, 9});
    const auto routes = enumerate_simple_paths(m, m.start(), m.num_states());
    ASSERT_EQ(routes.size(), 3u);
    std::map<NodeId, int> uses;
    for (const Route& r : routes)
        for (NodeId v : r.nodes) ++uses[v];
    for (const auto& [v, count] : uses)
        EXPECT_EQ(count, (v == m.start() || m.is_goal(v)) ? 3 : 1) << "node " << v;
}

TEST(GenerateScenario, BadParams) {
    EXPECT_THROW(generate_scenario(ScenarioKind::two_route, {10, 8, 0}), BadParams);
    EXPECT_THROW(generate_scenario(ScenarioKind::two_route, {8, 8, 0}), BadParams);
    EXPECT_THROW(generate_scenario(ScenarioKind::two_route, {2, 8, 0}), BadParams);
    EXPECT_THROW(generate_scenario(ScenarioKind::three_route, {8, 11, 10}), BadParams);
    EXPECT_THROW(generate_scenario(ScenarioKind::three_route, {8, 10, 2}), BadParams);
    EXPECT_NO_THROW(generate_scenario(ScenarioKind::three_route, {8, 10, 10}));
    EXPECT_NO_THROW(generate_scenario(ScenarioKind::two_route, {3, 4, 0}));
}

TEST(GenerateScenario, ShortestPathPropertyOverManyLengths) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int ln = 3 + static_cast<int>(rng.below(10));
        const int lr1 = ln + 1 + static_cast<int>(rng.below(5));
        const int lr2 = lr1 + static_cast<int>(rng.below(3));
        const bool three = rng.below(2) == 1;
        const GraphMap m = generate_scenario(three ? ScenarioKind::three_route : ScenarioKind::two_route,
                                             {ln, lr1, lr2});
        const Route r = shortest_path(m, m.start(), m.goals());
        EXPECT_EQ(r.length(), ln);
        EXPECT_TRUE(route_has_crosswalk(m, r));
        EXPECT_EQ(parse_map(emit_map(m)), m);
    }
}

TEST(ShortestPath, MatchesBreadthFirstOracle) {
    const GraphMap m = generate_scenario(ScenarioKind::two_route, {8, 10, 0});
    // Plain BFS with parent pointers.
    std::vector<int> dist(m.num_states(), -1);
    std::vector<NodeId> queue{m.start()};
    dist[m.start()] = 0;
    for (std::size_t i = 0; i < queue.size(); ++i)
        for (const DirectedEdge& e : m.edges())
            if (e.from == queue[i] && dist[e.to] < 0) {
                dist[e.to] = dist[queue[i]] + 1;
                queue.push_back(e.to);
            }
    const Route r = shortest_path(m, m.start(), m.goals());
    EXPECT_EQ(r.length(), dist[m.goals().front()]);
    EXPECT_NO_THROW(validate_route(m, r));
}

TEST(ShortestPath, LexicographicTieBreak) {
    // Diamond: 0 -> {2, 1} -> 3. Both routes have two edges; 0,1,3 is smaller.
    std::vector<Node> nodes{{0, 0, 0, true, false, false}, {1, 0, 0, false, false, false},
                            {2, 0, 0, false, false, false}, {3, 0, 0, false, true, false}};
    const GraphMap m("diamond", nodes, {{0, 2, 0}, {0, 1, 1}, {1, 3, 0}, {2, 3, 0}}, -1, 0, {3}, {});
    EXPECT_EQ(shortest_path(m, 0, m.goals()).nodes, (std::vector<NodeId>{0, 1, 3}));
}

TEST(ShortestPath, DegenerateAndNoPath) {
    const GraphMap m = parse_map(kFanOut);
    const std::vector<NodeId> self{0};
    const Route r = shortest_path(m, 0, self);
    EXPECT_EQ(r.nodes, std::vector<NodeId>{0});
    EXPECT_EQ(r.length(), 0);
    // Nothing leads back to the start from the goal.
    const std::vector<NodeId> start_only{0};
    EXPECT_THROW(shortest_path(m, 4, start_only), NoPath);
}

namespace {

// Edges carrying a label attribute in a DOT document.
std::set<std::pair<int, int>> labelled_edges(const std::string& dot, const std::string& label) {
    std::set<std::pair<int, int>> out;
    const std::regex edge_re(R"re((\d+) -- (\d+) \[([^\]]*)\])re");
    for (std::sregex_iterator it(dot.begin(), dot.end(), edge_re), end; it != end; ++it) {
        const std::string attrs = (*it)[3];
        if (attrs.find("label=\"" + label + "\"") != std::string::npos)
            out.insert({std::stoi((*it)[1]), std::stoi((*it)[2])});
    }
    return out;
}

}  // namespace

TEST(RenderRoutes, BareMap) {
    const GraphMap m = generate_scenario(ScenarioKind::two_route, {4, 5, 0});
    const std::string dot = render_routes(m, {});
    EXPECT_EQ(dot.rfind("graph ", 0), 0u);
    EXPECT_EQ(std::count(dot.begin(), dot.end(), '{'), 1);
    EXPECT_EQ(dot.find("label="), std::string::npos);
    for (const Node& n : m.nodes()) EXPECT_NE(dot.find("  " + std::to_string(n.id) + " [pos=\""), std::string::npos);
    EXPECT_NE(dot.find("!\""), std::string::npos);
}

TEST(RenderRoutes, OverlayContainsExactlyRouteEdges) {
    const GraphMap m = generate_scenario(ScenarioKind::two_route, {8, 10, 0});
    const Route r = shortest_path(m, m.start(), m.goals());
    const std::vector<std::pair<Route, std::string>> routes{{r, "noisy"}};
    const std::string dot = render_routes(m, routes);
    std::set<std::pair<int, int>> expect;
    for (std::size_t i = 1; i < r.nodes.size(); ++i) expect.insert({r.nodes[i - 1], r.nodes[i]});
    EXPECT_EQ(labelled_edges(dot, "noisy"), expect);
}

TEST(RenderRoutes, InvalidRoute) {
    const GraphMap m = generate_scenario(ScenarioKind::two_route, {8, 10, 0});
    const std::vector<std::pair<Route, std::string>> routes{{Route{{0, 5}}, "bad"}};
    EXPECT_THROW(render_routes(m, routes), InvalidRoute);
}

TEST(Routes, CompressVisits) {
    const std::vector<NodeId> visits{0, 0, 1, 1, 1, 2};
    EXPECT_EQ(compress_visits(visits).nodes, (std::vector<NodeId>{0, 1, 2}));
}
