#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hygrid/spec.hpp"

namespace hygrid {

/// Edges whose Kron-reduced weight falls below this are dropped.
inline constexpr double kKronTolerance = 1e-10;

struct Node {
    std::string id;
    NodeKind kind{NodeKind::AcMachine};
};

/// Edge between node indices; `from` precedes `to` in node order.
struct Edge {
    std::string id;
    std::size_t from{0};
    std::size_t to{0};
    double weight{0.0};
};

/// Validated hybrid graph. Nodes are sorted by id, edges by (from, to).
struct NetworkGraph {
    std::vector<Node> nodes;
    std::vector<Edge> ac_edges;
    std::vector<Edge> dc_edges;

    std::size_t size() const { return nodes.size(); }
    std::optional<std::size_t> find(std::string_view id) const;
    /// Throws Error(UnknownNode).
    std::size_t index_of(std::string_view id) const;
    const std::string& id(std::size_t index) const { return nodes.at(index).id; }
    NodeKind kind(std::size_t index) const { return nodes.at(index).kind; }
};

/// Validates node ids, edge endpoints, edge kinds and weights, and union
/// connectivity. Orderings are lexicographic by id.
NetworkGraph build_network(const NetworkSpec& spec);

struct AcSubgrid {
    std::size_t index{0};
    std::vector<std::size_t> machines;
    std::vector<std::size_t> converters;
    std::vector<std::size_t> passive;
    std::vector<std::size_t> edges;  // indices into NetworkGraph::ac_edges

    /// All member nodes in graph order.
    std::vector<std::size_t> nodes() const;
};

struct DcSubgrid {
    std::size_t index{0};
    std::vector<std::size_t> buses;
    std::vector<std::size_t> converters;
    std::vector<std::size_t> edges;  // indices into NetworkGraph::dc_edges

    std::vector<std::size_t> nodes() const;
};

/// Connected components of the ac and dc graphs. A converter without dc
/// edges forms its own dc subgrid.
struct SubgridPartition {
    std::vector<AcSubgrid> ac;
    std::vector<DcSubgrid> dc;
    std::vector<std::optional<std::size_t>> ac_of_node;
    std::vector<std::optional<std::size_t>> dc_of_node;
};

SubgridPartition partition_subgrids(const NetworkGraph& graph);

/// Incidence/weight/Laplacian matrices over a node and edge subset.
/// Row i of `incidence` and `laplacian` belongs to `nodes[i]`; column k of
/// `incidence` to `edges[k]` with +1 at the edge's `from` node.
struct GraphMatrices {
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> edges;
    Eigen::MatrixXd incidence;
    Eigen::VectorXd weights;
    Eigen::MatrixXd laplacian;

    Eigen::MatrixXd weight_matrix() const { return weights.asDiagonal(); }
    /// Row position of a graph node index, if present.
    std::optional<std::size_t> row_of(std::size_t node) const;
};

GraphMatrices graph_matrices(const NetworkGraph& graph, std::span<const std::size_t> nodes,
                             std::span<const Edge> all_edges, std::span<const std::size_t> edges);
GraphMatrices graph_matrices(const NetworkGraph& graph, const AcSubgrid& subgrid);
GraphMatrices graph_matrices(const NetworkGraph& graph, const DcSubgrid& subgrid);

/// Schur complement of an ac subgrid Laplacian onto `boundary`.
struct KronReduction {
    std::vector<std::string> boundary;
    std::vector<std::string> interior;
    std::vector<EdgeSpec> edges;
    Eigen::MatrixXd laplacian;
    /// boundary x interior map taking injections at eliminated buses to
    /// equivalent boundary injections (-L_bi L_ii^-1).
    Eigen::MatrixXd load_transfer;
};

/// Interior nodes must be device-free ac buses and their principal
/// Laplacian block must be nonsingular.
KronReduction kron_reduce(const NetworkGraph& graph, const AcSubgrid& subgrid,
                          const std::set<std::string>& boundary);

/// Result of eliminating every passive ac bus of a network.
struct PassiveElimination {
    NetworkSpec reduced;
    /// eliminated bus id -> (boundary id, share) pairs; shares sum to one.
    std::map<std::string, std::vector<std::pair<std::string, double>>> load_map;
};

PassiveElimination eliminate_passive_buses(const NetworkSpec& spec);

}  // namespace hygrid
