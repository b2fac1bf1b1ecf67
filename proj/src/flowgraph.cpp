#include "genflow/flowgraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace genflow::flowgraph {

std::string role_name(RoleKind kind) {
    switch (kind) {
        case RoleKind::Source: return "source";
        case RoleKind::Sink: return "sink";
        case RoleKind::Relay: return "relay";
        case RoleKind::Generative: return "generative";
    }
    return "unknown";
}

RoleKind role_from_name(const std::string& name) {
    if (name == "source") return RoleKind::Source;
    if (name == "sink") return RoleKind::Sink;
    if (name == "relay") return RoleKind::Relay;
    if (name == "generative") return RoleKind::Generative;
    throw std::invalid_argument("unknown node role '" + name + "'");
}

NetworkTopology::NetworkTopology(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::unordered_map<std::string, std::size_t> index;
    std::size_t sources = 0, sinks = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.id.empty()) throw std::invalid_argument("node with empty id");
        if (!index.emplace(n.id, i).second)
            throw std::invalid_argument("duplicate node id '" + n.id + "'");
        switch (n.role.kind) {
            case RoleKind::Source: ++sources; source_ = i; break;
            case RoleKind::Sink: ++sinks; sink_ = i; break;
            case RoleKind::Generative:
                if (!(n.role.f_min >= 0.0))
                    throw std::invalid_argument("node '" + n.id + "': f_min must be >= 0");
                if (n.role.generation_cap && !(*n.role.generation_cap >= 0.0))
                    throw std::invalid_argument("node '" + n.id + "': generation_cap must be >= 0");
                break;
            default: break;
        }
    }
    if (sources != 1 || sinks != 1)
        throw std::invalid_argument("topology requires exactly one source and one sink (got " +
                                    std::to_string(sources) + " / " + std::to_string(sinks) + ")");
    std::set<std::pair<std::string, std::string>> seen;
    for (const Edge& e : edges_) {
        if (!index.count(e.from)) throw std::invalid_argument("edge references unknown node '" + e.from + "'");
        if (!index.count(e.to)) throw std::invalid_argument("edge references unknown node '" + e.to + "'");
        if (e.from == e.to) throw std::invalid_argument("self-loop on node '" + e.from + "'");
        if (!std::isfinite(e.capacity) || e.capacity < 0.0)
            throw std::invalid_argument("edge " + e.from + "->" + e.to + ": capacity must be finite and >= 0");
        if (!seen.emplace(e.from, e.to).second)
            throw std::invalid_argument("duplicate edge " + e.from + "->" + e.to);
    }
}

bool NetworkTopology::has_node(const std::string& id) const {
    for (const Node& n : nodes_)
        if (n.id == id) return true;
    return false;
}

std::size_t NetworkTopology::node_index(const std::string& id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == id) return i;
    throw std::invalid_argument("unknown node id '" + id + "'");
}

std::optional<double> NetworkTopology::edge_capacity(const std::string& from, const std::string& to) const {
    for (const Edge& e : edges_)
        if (e.from == from && e.to == to) return e.capacity;
    return std::nullopt;
}

namespace {

// Residual arc representation: arcs come in pairs, arc i and i^1 are duals.
struct Arc {
    std::size_t to;
    double residual;
    std::size_t topo_edge;  // owning topology edge; npos for reverse arcs
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

struct ResidualGraph {
    std::vector<Arc> arcs;
    std::vector<std::vector<std::size_t>> out;  // per node: arc indices

    explicit ResidualGraph(const NetworkTopology& topology) : out(topology.nodes().size()) {
        arcs.reserve(topology.edges().size() * 2);
        for (std::size_t e = 0; e < topology.edges().size(); ++e) {
            const Edge& edge = topology.edges()[e];
            const std::size_t u = topology.node_index(edge.from);
            const std::size_t v = topology.node_index(edge.to);
            out[u].push_back(arcs.size());
            arcs.push_back({v, edge.capacity, e});
            out[v].push_back(arcs.size());
            arcs.push_back({u, 0.0, Arc::npos});
        }
    }

    // BFS for a shortest augmenting path; fills pred with incoming arc ids.
    bool find_path(std::size_t s, std::size_t d, std::vector<std::size_t>& pred) const {
        pred.assign(out.size(), Arc::npos);
        std::deque<std::size_t> queue{s};
        std::vector<char> visited(out.size(), 0);
        visited[s] = 1;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t a : out[u]) {
                const Arc& arc = arcs[a];
                if (visited[arc.to] || arc.residual <= kResidualFloor) continue;
                visited[arc.to] = 1;
                pred[arc.to] = a;
                if (arc.to == d) return true;
                queue.push_back(arc.to);
            }
        }
        return false;
    }
};

void check_terminals(const NetworkTopology& topology, const std::string& s, const std::string& d) {
    const Node& src = topology.node(s);
    const Node& dst = topology.node(d);
    if (s == d) throw std::invalid_argument("source and sink must differ");
    if (src.role.kind != RoleKind::Source)
        throw std::invalid_argument("node '" + s + "' is not the source");
    if (dst.role.kind != RoleKind::Sink)
        throw std::invalid_argument("node '" + d + "' is not the sink");
}

}  // namespace

MaxFlowResult max_flow(const NetworkTopology& topology, const std::string& s, const std::string& d) {
    check_terminals(topology, s, d);
    const std::size_t src = topology.node_index(s);
    const std::size_t dst = topology.node_index(d);

    ResidualGraph graph(topology);
    std::vector<std::size_t> pred;
    double value = 0.0;
    while (graph.find_path(src, dst, pred)) {
        double bottleneck = std::numeric_limits<double>::infinity();
        for (std::size_t v = dst; v != src;) {
            const Arc& arc = graph.arcs[pred[v]];
            bottleneck = std::min(bottleneck, arc.residual);
            v = graph.arcs[pred[v] ^ 1].to;
        }
        for (std::size_t v = dst; v != src;) {
            const std::size_t a = pred[v];
            graph.arcs[a].residual -= bottleneck;
            graph.arcs[a ^ 1].residual += bottleneck;
            v = graph.arcs[a ^ 1].to;
        }
        value += bottleneck;
    }

    MaxFlowResult result;
    result.value = value;
    result.flow.edge_flow.assign(topology.edges().size(), 0.0);
    for (std::size_t a = 0; a < graph.arcs.size(); a += 2) {
        const std::size_t e = graph.arcs[a].topo_edge;
        result.flow.edge_flow[e] = topology.edges()[e].capacity - graph.arcs[a].residual;
        if (result.flow.edge_flow[e] < 0.0 && result.flow.edge_flow[e] > -kResidualFloor)
            result.flow.edge_flow[e] = 0.0;
    }
    return result;
}

double baseline_max_flow(const NetworkTopology& topology, const std::string& s, const std::string& d) {
    return max_flow(topology, s, d).value;
}

CutResult min_cut(const NetworkTopology& topology, const std::string& s, const std::string& d) {
    check_terminals(topology, s, d);
    const std::size_t src = topology.node_index(s);

    ResidualGraph graph(topology);
    std::vector<std::size_t> pred;
    const std::size_t dst = topology.node_index(d);
    while (graph.find_path(src, dst, pred)) {
        double bottleneck = std::numeric_limits<double>::infinity();
        for (std::size_t v = dst; v != src;) {
            bottleneck = std::min(bottleneck, graph.arcs[pred[v]].residual);
            v = graph.arcs[pred[v] ^ 1].to;
        }
        for (std::size_t v = dst; v != src;) {
            const std::size_t a = pred[v];
            graph.arcs[a].residual -= bottleneck;
            graph.arcs[a ^ 1].residual += bottleneck;
            v = graph.arcs[a ^ 1].to;
        }
    }

    // Nodes still reachable from s form the source side; crossing edges are
    // saturated and constitute a minimum cut.
    std::vector<char> reachable(topology.nodes().size(), 0);
    std::deque<std::size_t> queue{src};
    reachable[src] = 1;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t a : graph.out[u]) {
            const Arc& arc = graph.arcs[a];
            if (!reachable[arc.to] && arc.residual > kResidualFloor) {
                reachable[arc.to] = 1;
                queue.push_back(arc.to);
            }
        }
    }

    CutResult cut;
    for (std::size_t e = 0; e < topology.edges().size(); ++e) {
        const Edge& edge = topology.edges()[e];
        const bool from_in = reachable[topology.node_index(edge.from)];
        const bool to_in = reachable[topology.node_index(edge.to)];
        if (from_in && !to_in) {
            cut.cut_edges.push_back(e);
            cut.value += edge.capacity;
        }
    }
    for (std::size_t i = 0; i < topology.nodes().size(); ++i)
        if (reachable[i]) cut.source_side.push_back(topology.nodes()[i].id);
    return cut;
}

double node_divergence(const NetworkTopology& topology, const FlowAssignment& flow, const std::string& node) {
    topology.node_index(node);  // validates the id
    if (flow.edge_flow.size() != topology.edges().size())
        throw std::invalid_argument("flow assignment does not match topology edge count");
    double out = 0.0, in = 0.0;
    for (std::size_t e = 0; e < topology.edges().size(); ++e) {
        if (topology.edges()[e].from == node) out += flow.edge_flow[e];
        if (topology.edges()[e].to == node) in += flow.edge_flow[e];
    }
    return out - in;
}

bool FlowValidation::ok() const {
    if (!edge_violations.empty()) return false;
    return std::all_of(nodes.begin(), nodes.end(), [](const NodeReport& r) { return r.ok; });
}

std::size_t FlowValidation::violation_count() const {
    std::size_t count = edge_violations.size();
    for (const NodeReport& r : nodes)
        if (!r.ok) ++count;
    return count;
}

FlowValidation validate_flow(const NetworkTopology& topology, const FlowAssignment& flow) {
    if (flow.edge_flow.size() != topology.edges().size())
        throw std::invalid_argument("flow assignment does not match topology edge count");

    FlowValidation report;
    for (std::size_t e = 0; e < topology.edges().size(); ++e) {
        const Edge& edge = topology.edges()[e];
        const double f = flow.edge_flow[e];
        if (f < -kConservationTol)
            report.edge_violations.push_back({e, f, edge.capacity,
                                              "negative flow on " + edge.from + "->" + edge.to});
        else if (f > edge.capacity + kConservationTol)
            report.edge_violations.push_back({e, f, edge.capacity,
                                              "capacity exceeded on " + edge.from + "->" + edge.to});
    }

    for (const Node& n : topology.nodes()) {
        FlowValidation::NodeReport r;
        r.id = n.id;
        r.role = n.role.kind;
        for (std::size_t e = 0; e < topology.edges().size(); ++e) {
            if (topology.edges()[e].from == n.id) r.out_flow += flow.edge_flow[e];
            if (topology.edges()[e].to == n.id) r.in_flow += flow.edge_flow[e];
        }
        r.divergence = r.out_flow - r.in_flow;
        switch (n.role.kind) {
            case RoleKind::Relay:
                if (std::abs(r.divergence) > kConservationTol) {
                    r.ok = false;
                    r.note = "conservation violated (|y| > 1e-9)";
                }
                break;
            case RoleKind::Generative:
                if (r.divergence < -kConservationTol) {
                    r.ok = false;
                    r.note = "negative divergence at generative node";
                } else if (r.in_flow < n.role.f_min - kConservationTol) {
                    r.ok = false;
                    r.note = "below f_min";
                }
                break;
            case RoleKind::Source:
            case RoleKind::Sink:
                break;  // terminals carry net divergence by design of the model
        }
        report.nodes.push_back(std::move(r));
    }
    return report;
}

NetworkTopology topology_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("topology: expected JSON object");
    if (!j.contains("nodes") || !j.contains("edges"))
        throw std::invalid_argument("topology: missing 'nodes' or 'edges'");

    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<std::string>();
        n.role.kind = role_from_name(jn.at("role").get<std::string>());
        if (jn.contains("f_min")) {
            if (n.role.kind != RoleKind::Generative)
                throw std::invalid_argument("node '" + n.id + "': f_min is only valid on generative nodes");
            n.role.f_min = jn.at("f_min").get<double>();
        }
        if (jn.contains("generation_cap")) {
            if (n.role.kind != RoleKind::Generative)
                throw std::invalid_argument("node '" + n.id + "': generation_cap is only valid on generative nodes");
            n.role.generation_cap = jn.at("generation_cap").get<double>();
        }
        nodes.push_back(std::move(n));
    }

    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
        Edge e;
        e.from = je.at("from").get<std::string>();
        e.to = je.at("to").get<std::string>();
        e.capacity = je.at("capacity").get<double>();
        edges.push_back(std::move(e));
    }
    return NetworkTopology(std::move(nodes), std::move(edges));
}

nlohmann::json topology_to_json(const NetworkTopology& topology) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const Node& n : topology.nodes()) {
        nlohmann::json jn{{"id", n.id}, {"role", role_name(n.role.kind)}};
        if (n.role.kind == RoleKind::Generative) {
            jn["f_min"] = n.role.f_min;
            if (n.role.generation_cap) jn["generation_cap"] = *n.role.generation_cap;
        }
        j["nodes"].push_back(std::move(jn));
    }
    j["edges"] = nlohmann::json::array();
    for (const Edge& e : topology.edges())
        j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"capacity", e.capacity}});
    return j;
}

}  // namespace genflow::flowgraph
