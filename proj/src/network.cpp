#include "hygrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <utility>

#include "hygrid/errors.hpp"

namespace hygrid {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::AcMachine: return "ac-machine";
        case NodeKind::DcBus: return "dc-bus";
        case NodeKind::Converter: return "converter";
        case NodeKind::AcBus: return "ac-bus";
    }
    return "unknown";
}

std::optional<NodeKind> node_kind_from_string(std::string_view text) {
    if (text == "ac-machine") return NodeKind::AcMachine;
    if (text == "dc-bus") return NodeKind::DcBus;
    if (text == "converter") return NodeKind::Converter;
    if (text == "ac-bus") return NodeKind::AcBus;
    return std::nullopt;
}

namespace {

bool allowed_on_ac(NodeKind k) {
    return k == NodeKind::AcMachine || k == NodeKind::Converter || k == NodeKind::AcBus;
}

bool allowed_on_dc(NodeKind k) { return k == NodeKind::DcBus || k == NodeKind::Converter; }

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

std::vector<Edge> build_edges(const std::vector<EdgeSpec>& specs, const NetworkGraph& graph, bool ac) {
    const std::string_view label = ac ? "ac" : "dc";
    std::vector<Edge> edges;
    std::set<std::pair<std::size_t, std::size_t>> seen_pairs;
    std::set<std::string> seen_ids;
    for (const auto& spec : specs) {
        const auto a = graph.find(spec.from);
        const auto b = graph.find(spec.to);
        std::string id = spec.id.empty() ? spec.from + "-" + spec.to : spec.id;
        if (!a) throw Error(ErrorCode::UnknownNode, std::string(label) + " edge " + id + " references unknown node " + spec.from, spec.from);
        if (!b) throw Error(ErrorCode::UnknownNode, std::string(label) + " edge " + id + " references unknown node " + spec.to, spec.to);
        if (*a == *b) throw Error(ErrorCode::SelfLoop, std::string(label) + " edge " + id + " is a self-loop", id);
        for (const auto n : {*a, *b}) {
            const NodeKind k = graph.kind(n);
            if (ac ? !allowed_on_ac(k) : !allowed_on_dc(k)) {
                throw Error(ErrorCode::EdgeKindViolation,
                            std::string(label) + " edge " + id + " touches " + std::string(to_string(k)) + " node " + graph.id(n), id);
            }
        }
        if (!(spec.weight > 0.0) || !std::isfinite(spec.weight)) {
            throw Error(ErrorCode::NonPositiveEdgeWeight, std::string(label) + " edge " + id + " must have a positive finite weight", id);
        }
        const auto key = std::minmax(*a, *b);
        if (!seen_pairs.insert(key).second) {
            throw Error(ErrorCode::DuplicateEdge, std::string(label) + " edge " + id + " duplicates an existing edge", id);
        }
        if (!seen_ids.insert(id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate " + std::string(label) + " edge id " + id, id);
        }
        edges.push_back(Edge{std::move(id), key.first, key.second, spec.weight});
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) {
        return std::tie(l.from, l.to) < std::tie(r.from, r.to);
    });
    return edges;
}

}  // namespace

std::optional<std::size_t> NetworkGraph::find(std::string_view id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const Node& n, std::string_view v) { return n.id < v; });
    if (it == nodes.end() || it->id != id) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

std::size_t NetworkGraph::index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw Error(ErrorCode::UnknownNode, "unknown node " + std::string(id), std::string(id));
}

NetworkGraph build_network(const NetworkSpec& spec) {
    NetworkGraph graph;
    graph.nodes.reserve(spec.nodes.size());
    for (const auto& n : spec.nodes) {
        if (n.id.empty()) throw Error(ErrorCode::ParseError, "node id must not be empty", "nodes");
        graph.nodes.push_back(Node{n.id, n.kind});
    }
    std::sort(graph.nodes.begin(), graph.nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < graph.nodes.size(); ++i) {
        if (graph.nodes[i].id == graph.nodes[i - 1].id) {
            throw Error(ErrorCode::DuplicateId, "duplicate node id " + graph.nodes[i].id, graph.nodes[i].id);
        }
    }
    graph.ac_edges = build_edges(spec.ac_edges, graph, true);
    graph.dc_edges = build_edges(spec.dc_edges, graph, false);

    if (graph.nodes.empty()) throw Error(ErrorCode::DisconnectedUnionGraph, "network has no nodes");
    DisjointSets sets(graph.size());
    for (const auto& e : graph.ac_edges) sets.unite(e.from, e.to);
    for (const auto& e : graph.dc_edges) sets.unite(e.from, e.to);
    for (std::size_t i = 0; i < graph.size(); ++i) {
        if (sets.find(i) != 0) {
            throw Error(ErrorCode::DisconnectedUnionGraph,
                        "node " + graph.id(i) + " is not connected to " + graph.id(0), graph.id(i));
        }
    }
    return graph;
}

std::vector<std::size_t> AcSubgrid::nodes() const {
    std::vector<std::size_t> all;
    all.insert(all.end(), machines.begin(), machines.end());
    all.insert(all.end(), converters.begin(), converters.end());
    all.insert(all.end(), passive.begin(), passive.end());
    std::sort(all.begin(), all.end());
    return all;
}

std::vector<std::size_t> DcSubgrid::nodes() const {
    std::vector<std::size_t> all;
    all.insert(all.end(), buses.begin(), buses.end());
    all.insert(all.end(), converters.begin(), converters.end());
    std::sort(all.begin(), all.end());
    return all;
}

SubgridPartition partition_subgrids(const NetworkGraph& graph) {
    const std::size_t n = graph.size();
    SubgridPartition part;
    part.ac_of_node.assign(n, std::nullopt);
    part.dc_of_node.assign(n, std::nullopt);

    DisjointSets ac_sets(n);
    DisjointSets dc_sets(n);
    for (const auto& e : graph.ac_edges) ac_sets.unite(e.from, e.to);
    for (const auto& e : graph.dc_edges) dc_sets.unite(e.from, e.to);

    // Roots are the smallest member index, so walking nodes in order visits
    // components in order of their smallest id.
    std::map<std::size_t, std::size_t> ac_root_to_index;
    std::map<std::size_t, std::size_t> dc_root_to_index;
    for (std::size_t i = 0; i < n; ++i) {
        const NodeKind k = graph.kind(i);
        if (allowed_on_ac(k)) {
            const auto root = ac_sets.find(i);
            auto [it, inserted] = ac_root_to_index.emplace(root, part.ac.size());
            if (inserted) part.ac.push_back(AcSubgrid{part.ac.size(), {}, {}, {}, {}});
            auto& sub = part.ac[it->second];
            if (k == NodeKind::AcMachine) sub.machines.push_back(i);
            else if (k == NodeKind::Converter) sub.converters.push_back(i);
            else sub.passive.push_back(i);
            part.ac_of_node[i] = it->second;
        }
        if (allowed_on_dc(k)) {
            const auto root = dc_sets.find(i);
            auto [it, inserted] = dc_root_to_index.emplace(root, part.dc.size());
            if (inserted) part.dc.push_back(DcSubgrid{part.dc.size(), {}, {}, {}});
            auto& sub = part.dc[it->second];
            if (k == NodeKind::DcBus) sub.buses.push_back(i);
            else sub.converters.push_back(i);
            part.dc_of_node[i] = it->second;
        }
    }
    for (std::size_t e = 0; e < graph.ac_edges.size(); ++e) {
        part.ac[*part.ac_of_node[graph.ac_edges[e].from]].edges.push_back(e);
    }
    for (std::size_t e = 0; e < graph.dc_edges.size(); ++e) {
        part.dc[*part.dc_of_node[graph.dc_edges[e].from]].edges.push_back(e);
    }
    return part;
}

std::optional<std::size_t> GraphMatrices::row_of(std::size_t node) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
    if (it == nodes.end() || *it != node) return std::nullopt;
    return static_cast<std::size_t>(it - nodes.begin());
}

GraphMatrices graph_matrices(const NetworkGraph& /*graph*/, std::span<const std::size_t> nodes,
                             std::span<const Edge> all_edges, std::span<const std::size_t> edges) {
    GraphMatrices m;
    m.nodes.assign(nodes.begin(), nodes.end());
    std::sort(m.nodes.begin(), m.nodes.end());
    m.edges.assign(edges.begin(), edges.end());
    const auto rows = static_cast<Eigen::Index>(m.nodes.size());
    const auto cols = static_cast<Eigen::Index>(m.edges.size());
    m.incidence = Eigen::MatrixXd::Zero(rows, cols);
    m.weights = Eigen::VectorXd::Zero(cols);
    for (Eigen::Index k = 0; k < cols; ++k) {
        const Edge& e = all_edges[m.edges[static_cast<std::size_t>(k)]];
        const auto from = m.row_of(e.from);
        const auto to = m.row_of(e.to);
        if (!from || !to) throw Error(ErrorCode::InvalidArgument, "edge " + e.id + " leaves the node subset", e.id);
        m.incidence(static_cast<Eigen::Index>(*from), k) = 1.0;
        m.incidence(static_cast<Eigen::Index>(*to), k) = -1.0;
        m.weights(k) = e.weight;
    }
    m.laplacian = m.incidence * m.weights.asDiagonal() * m.incidence.transpose();
    return m;
}

GraphMatrices graph_matrices(const NetworkGraph& graph, const AcSubgrid& subgrid) {
    const auto nodes = subgrid.nodes();
    return graph_matrices(graph, nodes, graph.ac_edges, subgrid.edges);
}

GraphMatrices graph_matrices(const NetworkGraph& graph, const DcSubgrid& subgrid) {
    const auto nodes = subgrid.nodes();
    return graph_matrices(graph, nodes, graph.dc_edges, subgrid.edges);
}

KronReduction kron_reduce(const NetworkGraph& graph, const AcSubgrid& subgrid,
                          const std::set<std::string>& boundary) {
    const GraphMatrices gm = graph_matrices(graph, subgrid);
    std::vector<Eigen::Index> b_rows;
    std::vector<Eigen::Index> i_rows;
    KronReduction out;
    for (const auto& id : boundary) {
        const auto node = graph.index_of(id);
        if (!gm.row_of(node)) {
            throw Error(ErrorCode::InvalidArgument, "boundary node " + id + " is not in ac subgrid " + std::to_string(subgrid.index), id);
        }
    }
    for (std::size_t r = 0; r < gm.nodes.size(); ++r) {
        const auto node = gm.nodes[r];
        if (boundary.count(graph.id(node))) {
            b_rows.push_back(static_cast<Eigen::Index>(r));
            out.boundary.push_back(graph.id(node));
        } else {
            if (graph.kind(node) != NodeKind::AcBus) {
                throw Error(ErrorCode::DeviceOnInteriorNode,
                            "interior node " + graph.id(node) + " carries a " + std::string(to_string(graph.kind(node))), graph.id(node));
            }
            i_rows.push_back(static_cast<Eigen::Index>(r));
            out.interior.push_back(graph.id(node));
        }
    }
    const auto nb = static_cast<Eigen::Index>(b_rows.size());
    const auto ni = static_cast<Eigen::Index>(i_rows.size());
    const Eigen::MatrixXd Lbb = gm.laplacian(b_rows, b_rows);
    out.laplacian = Lbb;
    out.load_transfer = Eigen::MatrixXd::Zero(nb, ni);
    if (ni > 0) {
        const Eigen::MatrixXd Lbi = gm.laplacian(b_rows, i_rows);
        const Eigen::MatrixXd Lii = gm.laplacian(i_rows, i_rows);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(Lii);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) {
            throw Error(ErrorCode::SingularInterior, "interior Laplacian block is singular (interior not connected to the boundary)");
        }
        const Eigen::MatrixXd LiiInvLib = lu.solve(Lbi.transpose());
        out.laplacian = Lbb - Lbi * LiiInvLib;
        // L_ii is symmetric, so -L_bi L_ii^-1 = -(L_ii^-1 L_ib)^T.
        out.load_transfer = -LiiInvLib.transpose();
    }
    for (Eigen::Index a = 0; a < nb; ++a) {
        for (Eigen::Index b = a + 1; b < nb; ++b) {
            const double w = -out.laplacian(a, b);
            if (std::abs(w) < kKronTolerance) continue;
            const auto& from = out.boundary[static_cast<std::size_t>(a)];
            const auto& to = out.boundary[static_cast<std::size_t>(b)];
            out.edges.push_back(EdgeSpec{from + "-" + to, from, to, w});
        }
    }
    return out;
}

PassiveElimination eliminate_passive_buses(const NetworkSpec& spec) {
    const NetworkGraph graph = build_network(spec);
    const SubgridPartition part = partition_subgrids(graph);

    PassiveElimination out;
    out.reduced.name = spec.name;
    out.reduced.devices = spec.devices;
    out.reduced.dc_edges = spec.dc_edges;
    for (const auto& n : spec.nodes) {
        if (n.kind != NodeKind::AcBus) out.reduced.nodes.push_back(n);
    }
    for (const auto& sub : part.ac) {
        if (sub.passive.empty()) {
            for (const auto e : sub.edges) {
                const Edge& edge = graph.ac_edges[e];
                out.reduced.ac_edges.push_back(EdgeSpec{edge.id, graph.id(edge.from), graph.id(edge.to), edge.weight});
            }
            continue;
        }
        std::set<std::string> boundary;
        for (const auto n : sub.machines) boundary.insert(graph.id(n));
        for (const auto n : sub.converters) boundary.insert(graph.id(n));
        if (boundary.empty()) {
            throw Error(ErrorCode::InvalidArgument,
                        "ac subgrid containing " + graph.id(sub.passive.front()) + " has no device nodes", graph.id(sub.passive.front()));
        }
        const KronReduction red = kron_reduce(graph, sub, boundary);
        out.reduced.ac_edges.insert(out.reduced.ac_edges.end(), red.edges.begin(), red.edges.end());
        for (std::size_t k = 0; k < red.interior.size(); ++k) {
            auto& shares = out.load_map[red.interior[k]];
            for (std::size_t b = 0; b < red.boundary.size(); ++b) {
                const double s = red.load_transfer(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k));
                if (std::abs(s) > kKronTolerance) shares.emplace_back(red.boundary[b], s);
            }
        }
    }
    return out;
}

}  // namespace hygrid
