#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace genflow::flowgraph {

// Tolerance for conservation checks; all flow arithmetic is double-precision
// sums of at most a few dozen terms.
inline constexpr double kConservationTol = 1e-9;
// Residual capacities below this are treated as zero during augmentation.
inline constexpr double kResidualFloor = 1e-12;

enum class RoleKind { Source, Sink, Relay, Generative };

std::string role_name(RoleKind kind);
RoleKind role_from_name(const std::string& name);

struct NodeRole {
    RoleKind kind = RoleKind::Relay;
    double f_min = 0.0;                        // generative only: minimum in-flow
    std::optional<double> generation_cap;      // generative only: cap on generated out-rate

    static NodeRole source() { return {RoleKind::Source, 0.0, std::nullopt}; }
    static NodeRole sink() { return {RoleKind::Sink, 0.0, std::nullopt}; }
    static NodeRole relay() { return {RoleKind::Relay, 0.0, std::nullopt}; }
    static NodeRole generative(double f_min, std::optional<double> cap = std::nullopt) {
        return {RoleKind::Generative, f_min, cap};
    }
};

struct Node {
    std::string id;
    NodeRole role;
};

struct Edge {
    std::string from;
    std::string to;
    double capacity = 0.0;  // bpp
};

// Directed capacitated graph. Construction enforces: unique ids, exactly one
// Source and one Sink, finite non-negative capacities, no self loops, at most
// one edge per ordered pair (multi-hop paths are modeled as single edges).
class NetworkTopology {
public:
    NetworkTopology(std::vector<Node> nodes, std::vector<Edge> edges);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_node(const std::string& id) const;
    std::size_t node_index(const std::string& id) const;  // throws on unknown id
    const Node& node(const std::string& id) const { return nodes_[node_index(id)]; }

    const std::string& source_id() const { return nodes_[source_].id; }
    const std::string& sink_id() const { return nodes_[sink_].id; }

    // Capacity of the direct edge from->to, if present.
    std::optional<double> edge_capacity(const std::string& from, const std::string& to) const;

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::size_t source_ = 0;
    std::size_t sink_ = 0;
};

// Per-edge flow, parallel to NetworkTopology::edges().
struct FlowAssignment {
    std::vector<double> edge_flow;
};

struct MaxFlowResult {
    double value = 0.0;
    FlowAssignment flow;
};

struct CutResult {
    double value = 0.0;
    std::vector<std::size_t> cut_edges;     // indices of saturated edges crossing the cut
    std::vector<std::string> source_side;   // node ids reachable from s in the residual graph
};

// Maximum s->d flow with every node treated as a pure replicator.
// Shortest-augmenting-path (Edmonds-Karp); deterministic for a given topology.
MaxFlowResult max_flow(const NetworkTopology& topology, const std::string& s, const std::string& d);

// Replication-only max flow f'_sd; identical to max_flow's value, named
// separately because it is the flow-gain denominator.
double baseline_max_flow(const NetworkTopology& topology, const std::string& s, const std::string& d);

// Minimum s-d cut certificate derived from the max-flow residual graph.
CutResult min_cut(const NetworkTopology& topology, const std::string& s, const std::string& d);

// y_i = sum_j f_ij - sum_j f_ji (out-flow minus in-flow).
double node_divergence(const NetworkTopology& topology, const FlowAssignment& flow, const std::string& node);

struct FlowValidation {
    struct NodeReport {
        std::string id;
        RoleKind role;
        double in_flow = 0.0;
        double out_flow = 0.0;
        double divergence = 0.0;
        bool ok = true;
        std::string note;
    };
    struct EdgeViolation {
        std::size_t edge_index = 0;
        double flow = 0.0;
        double capacity = 0.0;
        std::string note;
    };
    std::vector<NodeReport> nodes;
    std::vector<EdgeViolation> edge_violations;

    bool ok() const;
    std::size_t violation_count() const;
};

// Checks conservation at relays, the relaxed generative law (y_g >= 0 and
// in-flow >= f_min), and per-edge capacity bounds. Violations are reported as
// data, never thrown.
FlowValidation validate_flow(const NetworkTopology& topology, const FlowAssignment& flow);

// JSON schema: {"nodes":[{"id","role","f_min"?,"generation_cap"?}],
//               "edges":[{"from","to","capacity"}]}
NetworkTopology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const NetworkTopology& topology);

}  // namespace genflow::flowgraph
