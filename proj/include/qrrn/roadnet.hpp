#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qrrn {

using NodeId = int;
using ActionIndex = int;

struct Node {
    NodeId id = 0;
    double x = 0.0;  // meters, rendering only
    double y = 0.0;
    bool start = false;
    bool goal = false;
    bool crosswalk = false;

    friend bool operator==(const Node&, const Node&) = default;
};

struct DirectedEdge {
    NodeId from = 0;
    NodeId to = 0;
    ActionIndex action = 0;

    friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

/// Directed road network with a padded discrete action space. Immutable once
/// constructed; the constructor validates every structural invariant and
/// throws SchemaError / DanglingEdge / DuplicateAction / UnreachableGoal.
class GraphMap {
public:
    /// `action_dim` < 0 means "compute as the maximum out-degree".
    GraphMap(std::string name, std::vector<Node> nodes, std::vector<DirectedEdge> edges,
             int action_dim, NodeId start, std::vector<NodeId> goals,
             std::vector<NodeId> crosswalks);

    const std::string& name() const noexcept { return name_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<DirectedEdge>& edges() const noexcept { return edges_; }
    int num_states() const noexcept { return static_cast<int>(nodes_.size()); }
    int action_dim() const noexcept { return action_dim_; }
    NodeId start() const noexcept { return start_; }
    const std::vector<NodeId>& goals() const noexcept { return goals_; }
    const std::vector<NodeId>& crosswalks() const noexcept { return crosswalks_; }

    bool is_goal(NodeId s) const { return nodes_.at(s).goal; }
    bool is_crosswalk(NodeId s) const { return nodes_.at(s).crosswalk; }
    bool valid_state(NodeId s) const noexcept { return s >= 0 && s < num_states(); }

    /// Destination of the edge labelled `a` at `s`, or -1 when there is none.
    NodeId edge_target(NodeId s, ActionIndex a) const noexcept {
        return table_[static_cast<std::size_t>(s) * action_dim_ + a];
    }
    int out_degree(NodeId s) const;
    bool has_edge(NodeId from, NodeId to) const;

    friend bool operator==(const GraphMap& a, const GraphMap& b) {
        return a.name_ == b.name_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_ &&
               a.action_dim_ == b.action_dim_ && a.start_ == b.start_ &&
               a.goals_ == b.goals_ && a.crosswalks_ == b.crosswalks_;
    }

private:
    std::string name_;
    std::vector<Node> nodes_;
    std::vector<DirectedEdge> edges_;
    int action_dim_ = 0;
    NodeId start_ = 0;
    std::vector<NodeId> goals_;
    std::vector<NodeId> crosswalks_;
    std::vector<NodeId> table_;  // |S| x action_dim, -1 = loopback
};

struct Route {
    std::vector<NodeId> nodes;

    int length() const noexcept { return nodes.empty() ? 0 : static_cast<int>(nodes.size()) - 1; }
    friend bool operator==(const Route&, const Route&) = default;
};

enum class ScenarioKind { two_route, three_route };

struct ScenarioParams {
    int noisy_len = 8;
    int robust_len = 10;   // two-route: the robust route; three-route: robust route 1
    int robust2_len = 11;  // three-route only
};

/// Parses a map document (JSON). Unknown keys are rejected.
GraphMap parse_map(std::string_view text);

/// Serializes a map so that parse_map(emit_map(m)) == m.
std::string emit_map(const GraphMap& map);

GraphMap load_map_file(const std::string& path);

/// Deterministic transition: follows the edge labelled `action`, otherwise
/// stays put (loopback). Throws InvalidState / InvalidAction.
NodeId transition(const GraphMap& map, NodeId state, ActionIndex action);

/// Synthetic scenario: one start (the divergence node), one goal (the merge
/// node), disjoint routes in between. Action k at the start enters route k
/// (route 0 is the noisy one); every interior node moves forward on action 0.
/// The crosswalk sits at node position floor(noisy_len / 2) of route 0.
GraphMap generate_scenario(ScenarioKind kind, const ScenarioParams& params);

ScenarioKind parse_scenario_kind(std::string_view s);
std::string_view to_string(ScenarioKind kind);

/// Minimum-edge-count route to the nearest goal; ties go to the
/// lexicographically smallest node sequence. Throws NoPath.
Route shortest_path(const GraphMap& map, NodeId start, std::span<const NodeId> goals);

/// All simple start->goal paths with at most `max_len` edges, sorted by
/// (length, node sequence). Paths end at the first goal they touch.
std::vector<Route> enumerate_simple_paths(const GraphMap& map, NodeId start, int max_len);

bool route_has_crosswalk(const GraphMap& map, const Route& route);

/// Throws InvalidRoute unless every consecutive pair is joined by an edge.
void validate_route(const GraphMap& map, const Route& route);

/// Collapses consecutive repeats (loopback steps) in a visited-state list.
Route compress_visits(std::span<const NodeId> visited);

/// DOT document: one `graph` block, pinned node positions, and one colored
/// overlay per route carrying its label.
std::string render_routes(const GraphMap& map,
                          std::span<const std::pair<Route, std::string>> routes);

}  // namespace qrrn
