#include "qrrn/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qrrn/errors.hpp"

namespace qrrn {

using json = nlohmann::json;

namespace {

bool contains(const std::vector<NodeId>& v, NodeId x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

std::vector<NodeId> sorted_unique(std::vector<NodeId> v, const char* what) {
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
        throw SchemaError(std::string("duplicate id in ") + what);
    return v;
}

}  // namespace

GraphMap::GraphMap(std::string name, std::vector<Node> nodes, std::vector<DirectedEdge> edges,
                   int action_dim, NodeId start, std::vector<NodeId> goals,
                   std::vector<NodeId> crosswalks)
    : name_(std::move(name)),
      nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      start_(start),
      goals_(sorted_unique(std::move(goals), "goals")),
      crosswalks_(sorted_unique(std::move(crosswalks), "crosswalks")) {
    const int n = static_cast<int>(nodes_.size());
    if (n == 0) throw SchemaError("map has no nodes");

    std::sort(nodes_.begin(), nodes_.end(),
              [](const Node& a, const Node& b) { return a.id < b.id; });
    for (int i = 0; i < n; ++i) {
        if (nodes_[i].id != i)
            throw SchemaError("node ids must be dense 0.." + std::to_string(n - 1));
        if (!std::isfinite(nodes_[i].x) || !std::isfinite(nodes_[i].y))
            throw SchemaError("node " + std::to_string(i) + " has non-finite position");
    }

    auto check_id = [n](NodeId id, const char* what) {
        if (id < 0 || id >= n)
            throw SchemaError(std::string(what) + " references unknown node " + std::to_string(id));
    };
    check_id(start_, "start");
    if (goals_.empty()) throw SchemaError("map has no goals");
    for (NodeId g : goals_) check_id(g, "goals");
    for (NodeId c : crosswalks_) check_id(c, "crosswalks");
    if (contains(goals_, start_)) throw SchemaError("start node is also a goal");

    for (const Node& node : nodes_) {
        if (node.start != (node.id == start_))
            throw SchemaError("start tag of node " + std::to_string(node.id) +
                              " disagrees with the start field");
        if (node.goal != contains(goals_, node.id))
            throw SchemaError("goal tag of node " + std::to_string(node.id) +
                              " disagrees with the goals list");
        if (node.crosswalk != contains(crosswalks_, node.id))
            throw SchemaError("crosswalk tag of node " + std::to_string(node.id) +
                              " disagrees with the crosswalks list");
    }

    std::vector<int> degree(n, 0);
    for (const DirectedEdge& e : edges_) {
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw DanglingEdge("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                               " references an unknown node");
        if (e.action < 0) throw SchemaError("negative action index");
        ++degree[e.from];
    }
    const int max_degree = *std::max_element(degree.begin(), degree.end());
    if (action_dim < 0) {
        action_dim_ = std::max(max_degree, 1);
    } else {
        if (action_dim != std::max(max_degree, 1))
            throw SchemaError("action_dim " + std::to_string(action_dim) +
                              " differs from the maximum out-degree " + std::to_string(max_degree));
        action_dim_ = action_dim;
    }

    table_.assign(static_cast<std::size_t>(n) * action_dim_, -1);
    for (const DirectedEdge& e : edges_) {
        if (e.action >= action_dim_)
            throw SchemaError("action index " + std::to_string(e.action) + " at node " +
                              std::to_string(e.from) + " is not below action_dim");
        NodeId& slot = table_[static_cast<std::size_t>(e.from) * action_dim_ + e.action];
        if (slot != -1)
            throw DuplicateAction("node " + std::to_string(e.from) + " uses action " +
                                  std::to_string(e.action) + " twice");
        slot = e.to;
    }

    std::vector<char> seen(n, 0);
    std::deque<NodeId> queue{start_};
    seen[start_] = 1;
    while (!queue.empty()) {
        const NodeId s = queue.front();
        queue.pop_front();
        for (int a = 0; a < action_dim_; ++a) {
            const NodeId t = edge_target(s, a);
            if (t >= 0 && !seen[t]) {
                seen[t] = 1;
                queue.push_back(t);
            }
        }
    }
    for (NodeId g : goals_)
        if (!seen[g]) throw UnreachableGoal("goal " + std::to_string(g) + " is unreachable from start");
}

int GraphMap::out_degree(NodeId s) const {
    int d = 0;
    for (int a = 0; a < action_dim_; ++a) d += edge_target(s, a) >= 0;
    return d;
}

bool GraphMap::has_edge(NodeId from, NodeId to) const {
    if (!valid_state(from)) return false;
    for (int a = 0; a < action_dim_; ++a)
        if (edge_target(from, a) == to) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Map document

namespace {

void require_keys(const json& obj, std::initializer_list<std::string_view> required,
                  std::initializer_list<std::string_view> optional, const std::string& where) {
    if (!obj.is_object()) throw SchemaError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        const bool known =
            std::find(required.begin(), required.end(), key) != required.end() ||
            std::find(optional.begin(), optional.end(), key) != optional.end();
        if (!known) throw SchemaError("unknown key '" + key + "' in " + where);
    }
    for (std::string_view key : required)
        if (!obj.contains(std::string(key)))
            throw SchemaError("missing key '" + std::string(key) + "' in " + where);
}

int get_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw SchemaError(where + " must be an integer");
    const auto x = v.get<long long>();
    if (x < -1'000'000'000LL || x > 1'000'000'000LL) throw SchemaError(where + " out of range");
    return static_cast<int>(x);
}

double get_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw SchemaError(where + " must be a number");
    return v.get<double>();
}

std::vector<NodeId> get_id_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw SchemaError(where + " must be an array");
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(get_int(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace

GraphMap parse_map(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
    require_keys(doc, {"name", "nodes", "edges", "start", "goals", "crosswalks"}, {"action_dim"},
                 "map document");
    if (!doc["name"].is_string()) throw SchemaError("name must be a string");
    if (!doc["nodes"].is_array()) throw SchemaError("nodes must be an array");
    if (!doc["edges"].is_array()) throw SchemaError("edges must be an array");

    std::vector<Node> nodes;
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const json& jn = doc["nodes"][i];
        const std::string where = "nodes[" + std::to_string(i) + "]";
        require_keys(jn, {"id", "x", "y", "tags"}, {}, where);
        Node node;
        node.id = get_int(jn["id"], where + ".id");
        node.x = get_number(jn["x"], where + ".x");
        node.y = get_number(jn["y"], where + ".y");
        if (!jn["tags"].is_array()) throw SchemaError(where + ".tags must be an array");
        for (const json& tag : jn["tags"]) {
            if (!tag.is_string()) throw SchemaError(where + ".tags entries must be strings");
            const auto t = tag.get<std::string>();
            bool* flag = t == "start" ? &node.start
                         : t == "goal" ? &node.goal
                         : t == "crosswalk" ? &node.crosswalk
                                            : nullptr;
            if (!flag) throw SchemaError(where + " has unknown tag '" + t + "'");
            if (*flag) throw SchemaError(where + " repeats tag '" + t + "'");
            *flag = true;
        }
        if (node.start && node.goal) throw SchemaError(where + " is tagged both start and goal");
        nodes.push_back(node);
    }

    std::vector<DirectedEdge> edges;
    for (std::size_t i = 0; i < doc["edges"].size(); ++i) {
        const json& je = doc["edges"][i];
        const std::string where = "edges[" + std::to_string(i) + "]";
        require_keys(je, {"from", "to", "action"}, {}, where);
        edges.push_back({get_int(je["from"], where + ".from"), get_int(je["to"], where + ".to"),
                         get_int(je["action"], where + ".action")});
    }

    int action_dim = -1;
    if (doc.contains("action_dim")) {
        action_dim = get_int(doc["action_dim"], "action_dim");
        if (action_dim < 1) throw SchemaError("action_dim must be >= 1");
    }

    // Unknown node ids in edges are a DanglingEdge, not a schema problem, so
    // node-id density is checked inside the GraphMap constructor after edges.
    const int n = static_cast<int>(nodes.size());
    for (const DirectedEdge& e : edges)
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw DanglingEdge("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                               " references an unknown node");

    return GraphMap(doc["name"].get<std::string>(), std::move(nodes), std::move(edges), action_dim,
                    get_int(doc["start"], "start"), get_id_list(doc["goals"], "goals"),
                    get_id_list(doc["crosswalks"], "crosswalks"));
}

std::string emit_map(const GraphMap& map) {
    json doc = json::object();
    doc["name"] = map.name();
    doc["action_dim"] = map.action_dim();
    json nodes = json::array();
    for (const Node& n : map.nodes()) {
        json tags = json::array();
        if (n.start) tags.push_back("start");
        if (n.goal) tags.push_back("goal");
        if (n.crosswalk) tags.push_back("crosswalk");
        nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}, {"tags", tags}});
    }
    doc["nodes"] = nodes;
    json edges = json::array();
    for (const DirectedEdge& e : map.edges())
        edges.push_back({{"from", e.from}, {"to", e.to}, {"action", e.action}});
    doc["edges"] = edges;
    doc["start"] = map.start();
    doc["goals"] = map.goals();
    doc["crosswalks"] = map.crosswalks();
    return doc.dump(2) + "\n";
}

GraphMap load_map_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open map file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_map(buf.str());
}

// ---------------------------------------------------------------------------

NodeId transition(const GraphMap& map, NodeId state, ActionIndex action) {
    if (!map.valid_state(state)) throw InvalidState("state " + std::to_string(state));
    if (action < 0 || action >= map.action_dim())
        throw InvalidAction("action " + std::to_string(action) + " outside [0, " +
                            std::to_string(map.action_dim()) + ")");
    const NodeId t = map.edge_target(state, action);
    return t >= 0 ? t : state;
}

ScenarioKind parse_scenario_kind(std::string_view s) {
    if (s == "two-route") return ScenarioKind::two_route;
    if (s == "three-route") return ScenarioKind::three_route;
    throw BadParams("unknown scenario kind '" + std::string(s) + "'");
}

std::string_view to_string(ScenarioKind kind) {
    return kind == ScenarioKind::two_route ? "two-route" : "three-route";
}

GraphMap generate_scenario(ScenarioKind kind, const ScenarioParams& p) {
    std::vector<int> lengths{p.noisy_len, p.robust_len};
    if (kind == ScenarioKind::three_route) lengths.push_back(p.robust2_len);
    for (int len : lengths)
        if (len < 3) throw BadParams("route lengths must be >= 3, got " + std::to_string(len));
    if (!(p.noisy_len < p.robust_len))
        throw BadParams("noisy route must be strictly shorter than the robust route");
    if (kind == ScenarioKind::three_route && !(p.robust_len <= p.robust2_len))
        throw BadParams("robust route 1 must not be longer than robust route 2");

    const int routes = static_cast<int>(lengths.size());
    int interior = 0;
    for (int len : lengths) interior += len - 1;
    const NodeId start = 0;
    const NodeId goal = interior + 1;
    const double span = 10.0 * p.noisy_len;

    std::vector<Node> nodes(goal + 1);
    nodes[start] = {start, 0.0, 0.0, true, false, false};
    nodes[goal] = {goal, span, 0.0, false, true, false};

    std::vector<DirectedEdge> edges;
    NodeId crosswalk = -1;
    NodeId next_id = 1;
    for (int r = 0; r < routes; ++r) {
        const int len = lengths[r];
        // Route 0 runs straight; others bow out alternately above and below.
        const double bow = r == 0 ? 0.0 : (r % 2 == 1 ? 1.0 : -1.0) * 15.0 * ((r + 1) / 2);
        NodeId prev = start;
        for (int pos = 1; pos < len; ++pos) {
            const NodeId id = next_id++;
            const double t = static_cast<double>(pos) / len;
            nodes[id] = {id, t * span, bow * std::sin(std::numbers::pi * t), false, false, false};
            edges.push_back({prev, id, prev == start ? r : 0});
            if (r == 0 && pos == p.noisy_len / 2) {
                nodes[id].crosswalk = true;
                crosswalk = id;
            }
            prev = id;
        }
        edges.push_back({prev, goal, 0});
    }

    std::string name = std::string(to_string(kind)) + "-" + std::to_string(p.noisy_len) + "-" +
                       std::to_string(p.robust_len);
    if (kind == ScenarioKind::three_route) name += "-" + std::to_string(p.robust2_len);
    return GraphMap(std::move(name), std::move(nodes), std::move(edges), routes, start, {goal},
                    {crosswalk});
}

// ---------------------------------------------------------------------------

Route shortest_path(const GraphMap& map, NodeId start, std::span<const NodeId> goals) {
    if (!map.valid_state(start)) throw InvalidState("state " + std::to_string(start));
    const int n = map.num_states();
    std::vector<std::vector<NodeId>> preds(n);
    for (const DirectedEdge& e : map.edges())
        if (e.from != e.to) preds[e.to].push_back(e.from);

    // Reverse BFS gives edge distance to the nearest goal.
    std::vector<int> dist(n, -1);
    std::deque<NodeId> queue;
    for (NodeId g : goals) {
        if (!map.valid_state(g)) throw InvalidState("goal " + std::to_string(g));
        if (dist[g] < 0) {
            dist[g] = 0;
            queue.push_back(g);
        }
    }
    while (!queue.empty()) {
        const NodeId s = queue.front();
        queue.pop_front();
        for (NodeId p : preds[s])
            if (dist[p] < 0) {
                dist[p] = dist[s] + 1;
                queue.push_back(p);
            }
    }
    if (dist[start] < 0) throw NoPath("no goal reachable from " + std::to_string(start));

    // Walking down the distance field choosing the smallest successor id
    // yields the lexicographically smallest shortest route.
    Route route{{start}};
    NodeId cur = start;
    while (dist[cur] > 0) {
        NodeId best = -1;
        for (int a = 0; a < map.action_dim(); ++a) {
            const NodeId t = map.edge_target(cur, a);
            if (t >= 0 && dist[t] == dist[cur] - 1 && (best < 0 || t < best)) best = t;
        }
        cur = best;
        route.nodes.push_back(cur);
    }
    return route;
}

std::vector<Route> enumerate_simple_paths(const GraphMap& map, NodeId start, int max_len) {
    std::vector<Route> out;
    std::vector<NodeId> path{start};
    std::vector<char> on_path(map.num_states(), 0);
    on_path[start] = 1;

    auto dfs = [&](auto&& self, NodeId s) -> void {
        if (map.is_goal(s)) {
            out.push_back(Route{path});
            return;
        }
        if (static_cast<int>(path.size()) - 1 >= max_len) return;
        std::set<NodeId> succ;
        for (int a = 0; a < map.action_dim(); ++a) {
            const NodeId t = map.edge_target(s, a);
            if (t >= 0 && !on_path[t]) succ.insert(t);
        }
        for (NodeId t : succ) {
            on_path[t] = 1;
            path.push_back(t);
            self(self, t);
            path.pop_back();
            on_path[t] = 0;
        }
    };
    dfs(dfs, start);

    std::sort(out.begin(), out.end(), [](const Route& a, const Route& b) {
        if (a.length() != b.length()) return a.length() < b.length();
        return a.nodes < b.nodes;
    });
    return out;
}

bool route_has_crosswalk(const GraphMap& map, const Route& route) {
    return std::any_of(route.nodes.begin(), route.nodes.end(),
                       [&](NodeId s) { return map.valid_state(s) && map.is_crosswalk(s); });
}

void validate_route(const GraphMap& map, const Route& route) {
    if (route.nodes.empty()) throw InvalidRoute("empty route");
    for (NodeId s : route.nodes)
        if (!map.valid_state(s)) throw InvalidRoute("unknown node " + std::to_string(s));
    for (std::size_t i = 1; i < route.nodes.size(); ++i)
        if (!map.has_edge(route.nodes[i - 1], route.nodes[i]))
            throw InvalidRoute("no edge " + std::to_string(route.nodes[i - 1]) + "->" +
                               std::to_string(route.nodes[i]));
}

Route compress_visits(std::span<const NodeId> visited) {
    Route r;
    for (NodeId s : visited)
        if (r.nodes.empty() || r.nodes.back() != s) r.nodes.push_back(s);
    return r;
}

std::string render_routes(const GraphMap& map,
                          std::span<const std::pair<Route, std::string>> routes) {
    for (const auto& [route, label] : routes) validate_route(map, route);

    static constexpr const char* kPalette[] = {"red", "blue", "darkgreen", "orange", "purple",
                                               "brown"};
    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') q += '\\';
            q += c;
        }
        return q + "\"";
    };

    std::ostringstream dot;
    dot << std::setprecision(17);
    dot << "graph " << quote(map.name()) << " {\n";
    dot << "  graph [splines=true, overlap=true];\n";
    dot << "  node [shape=circle, fontsize=8, width=0.25, fixedsize=true];\n";
    for (const Node& n : map.nodes()) {
        dot << "  " << n.id << " [pos=\"" << n.x << "," << n.y << "!\"";
        if (n.start)
            dot << ", style=filled, fillcolor=palegreen, shape=doublecircle";
        else if (n.goal)
            dot << ", style=filled, fillcolor=gold, shape=doublecircle";
        else if (n.crosswalk)
            dot << ", style=filled, fillcolor=tomato, shape=box";
        dot << "];\n";
    }
    for (const DirectedEdge& e : map.edges())
        dot << "  " << e.from << " -- " << e.to << " [dir=forward, color=gray70];\n";
    for (std::size_t k = 0; k < routes.size(); ++k) {
        const auto& [route, label] = routes[k];
        const char* color = kPalette[k % std::size(kPalette)];
        for (std::size_t i = 1; i < route.nodes.size(); ++i)
            dot << "  " << route.nodes[i - 1] << " -- " << route.nodes[i]
                << " [dir=forward, color=" << color << ", penwidth=3, label=" << quote(label)
                << "];\n";
    }
    dot << "}\n";
    return dot.str();
}

}  // namespace qrrn
