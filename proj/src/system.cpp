#include "hygrid/system.hpp"

#include <algorithm>
#include <map>

#include "hygrid/errors.hpp"

namespace hygrid {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index ix(std::size_t i) { return static_cast<Index>(i); }

/// rows.size() x cols.size() 0/1 matrix with a one where rows[r] == cols[c].
MatrixXd selector(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    MatrixXd S = MatrixXd::Zero(ix(rows.size()), ix(cols.size()));
    std::map<std::size_t, Index> where;
    for (std::size_t c = 0; c < cols.size(); ++c) where[cols[c]] = ix(c);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (auto it = where.find(rows[r]); it != where.end()) S(ix(r), it->second) = 1.0;
    }
    return S;
}

}  // namespace

std::vector<std::string> StateLayout::labels() const {
    std::vector<std::string> out;
    out.reserve(dim());
    for (const auto& id : eta_ids) out.push_back("eta:" + id);
    for (const auto& id : omega_ids) out.push_back("omega:" + id);
    for (const auto& id : v_ids) out.push_back("v:" + id);
    for (const auto& id : P_ids) out.push_back("P:" + id);
    for (const auto& id : Pbar_ids) out.push_back("Pbar:" + id);
    return out;
}

MatrixXd SystemModel::dynamics() const { return T.cwiseInverse().asDiagonal() * A; }

MatrixXd SystemModel::input() const { return T.cwiseInverse().asDiagonal() * E_d; }

VectorXd SystemModel::load_vector(const std::vector<NodeLoad>& loads) const {
    VectorXd p = VectorXd::Zero(ix(load_dim()));
    for (const auto& load : loads) {
        const auto node = graph.index_of(load.node);
        const NodeKind kind = graph.kind(node);
        if (load.port == Port::Ac) {
            auto it = std::find(theta_nodes.begin(), theta_nodes.end(), node);
            if (kind == NodeKind::DcBus || it == theta_nodes.end()) {
                throw Error(ErrorCode::InvalidArgument, "node " + load.node + " has no ac port", load.node);
            }
            p(ix(static_cast<std::size_t>(it - theta_nodes.begin()))) += load.value;
        } else {
            auto it = std::find(v_nodes.begin(), v_nodes.end(), node);
            if (kind == NodeKind::AcMachine || it == v_nodes.end()) {
                throw Error(ErrorCode::InvalidArgument, "node " + load.node + " has no dc port", load.node);
            }
            p(ix(theta_nodes.size() + static_cast<std::size_t>(it - v_nodes.begin()))) += load.value;
        }
    }
    return p;
}

SystemModel assemble(const NetworkGraph& graph, const SubgridPartition& partition, const DeviceTable& devices) {
    SystemModel m;
    m.graph = graph;
    m.partition = partition;
    m.devices = devices;
    m.roles = classify_nodes(partition, devices);

    for (std::size_t i = 0; i < graph.size(); ++i) {
        switch (graph.kind(i)) {
            case NodeKind::AcMachine:
                m.theta_nodes.push_back(i);
                m.machine_nodes.push_back(i);
                break;
            case NodeKind::Converter:
                m.theta_nodes.push_back(i);
                m.converter_nodes.push_back(i);
                m.v_nodes.push_back(i);
                break;
            case NodeKind::DcBus:
                m.v_nodes.push_back(i);
                m.dc_bus_nodes.push_back(i);
                break;
            case NodeKind::AcBus:
                throw Error(ErrorCode::PassiveBusRemaining,
                            "passive ac bus " + graph.id(i) + " must be Kron-eliminated before assembly", graph.id(i));
        }
        if (const auto src = devices.source(i)) {
            (src->k_g > 0.0 ? m.source_nodes : m.bar_source_nodes).push_back(i);
        }
    }

    const std::size_t nE = graph.ac_edges.size();
    const std::size_t nM = m.machine_nodes.size();
    const std::size_t nC = m.converter_nodes.size();
    const std::size_t nV = m.v_nodes.size();
    const std::size_t nG = m.source_nodes.size();
    const std::size_t nGb = m.bar_source_nodes.size();

    auto& L = m.layout;
    L.eta = {0, nE};
    L.omega = {nE, nM};
    L.v = {nE + nM, nV};
    L.P = {nE + nM + nV, nG};
    L.Pbar = {nE + nM + nV + nG, nGb};
    for (const auto& e : graph.ac_edges) L.eta_ids.push_back(e.id);
    for (auto n : m.machine_nodes) L.omega_ids.push_back(graph.id(n));
    for (auto n : m.v_nodes) L.v_ids.push_back(graph.id(n));
    for (auto n : m.source_nodes) L.P_ids.push_back(graph.id(n));
    for (auto n : m.bar_source_nodes) L.Pbar_ids.push_back(graph.id(n));

    // Graph matrices over the whole ac and dc graphs.
    std::vector<std::size_t> all_ac(nE);
    for (std::size_t e = 0; e < nE; ++e) all_ac[e] = e;
    std::vector<std::size_t> all_dc(graph.dc_edges.size());
    for (std::size_t e = 0; e < all_dc.size(); ++e) all_dc[e] = e;
    const GraphMatrices ac = graph_matrices(graph, m.theta_nodes, graph.ac_edges, all_ac);
    const GraphMatrices dc = graph_matrices(graph, m.v_nodes, graph.dc_edges, all_dc);
    m.B_ac = ac.incidence;
    m.W_ac = ac.weights;
    m.L_ac = ac.laplacian;
    m.L_dc = dc.laplacian;

    m.I_ac = selector(m.machine_nodes, m.theta_nodes);
    m.I_cac = selector(m.converter_nodes, m.theta_nodes);
    m.I_cdc = selector(m.converter_nodes, m.v_nodes);
    m.I_dc = selector(m.dc_bus_nodes, m.v_nodes);
    m.Ig_ac = selector(m.machine_nodes, m.source_nodes);
    m.Ig_dc = selector(m.v_nodes, m.source_nodes);
    m.Igbar_ac = selector(m.machine_nodes, m.bar_source_nodes);
    m.Igbar_dc = selector(m.v_nodes, m.bar_source_nodes);

    m.M.resize(ix(nM));
    m.D.resize(ix(nM));
    for (std::size_t k = 0; k < nM; ++k) {
        const auto& p = devices.machine(m.machine_nodes[k]);
        m.M(ix(k)) = p.M;
        m.D(ix(k)) = p.D;
    }
    m.M_p.resize(ix(nC));
    m.K_theta.resize(ix(nC));
    for (std::size_t k = 0; k < nC; ++k) {
        const auto& p = devices.converter(m.converter_nodes[k]);
        m.M_p(ix(k)) = p.m_p;
        m.K_theta(ix(k)) = p.k_theta;
    }
    m.C.resize(ix(nV));
    m.G.resize(ix(nV));
    for (std::size_t k = 0; k < nV; ++k) {
        const auto n = m.v_nodes[k];
        if (graph.kind(n) == NodeKind::Converter) {
            m.C(ix(k)) = devices.converter(n).C;
            m.G(ix(k)) = devices.converter(n).G;
        } else {
            m.C(ix(k)) = devices.dc_bus(n).C;
            m.G(ix(k)) = devices.dc_bus(n).G;
        }
    }
    m.K_g.resize(ix(nG));
    m.T_g.resize(ix(nG));
    for (std::size_t k = 0; k < nG; ++k) {
        const auto src = *devices.source(m.source_nodes[k]);
        m.K_g(ix(k)) = src.k_g;
        m.T_g(ix(k)) = src.T_g;
    }
    m.Tbar_g.resize(ix(nGb));
    for (std::size_t k = 0; k < nGb; ++k) m.Tbar_g(ix(k)) = devices.source(m.bar_source_nodes[k])->T_g;

    // Per dc subgrid common k_theta. With mismatched gains the largest one is
    // used so diagnostics can still run; k_theta_consistent records the mismatch.
    m.k_theta_consistent = true;
    m.K_theta_tilde = VectorXd::Ones(ix(nV));
    std::map<std::size_t, Index> v_pos;
    for (std::size_t k = 0; k < nV; ++k) v_pos[m.v_nodes[k]] = ix(k);
    for (const auto& sub : partition.dc) {
        if (sub.converters.empty()) continue;
        double k_max = 0.0;
        double k_first = devices.converter(sub.converters.front()).k_theta;
        for (auto c : sub.converters) {
            const double k = devices.converter(c).k_theta;
            k_max = std::max(k_max, k);
            if (k != k_first) m.k_theta_consistent = false;
        }
        for (auto n : sub.nodes()) m.K_theta_tilde(v_pos.at(n)) = k_max;
    }

    // T = blkdiag(I, M, C, T_g, Tbar_g)
    const std::size_t n = L.dim();
    m.T.resize(ix(n));
    m.T.segment(L.eta.begin(), L.eta.count()).setOnes();
    m.T.segment(L.omega.begin(), L.omega.count()) = m.M;
    m.T.segment(L.v.begin(), L.v.count()) = m.C;
    m.T.segment(L.P.begin(), L.P.count()) = m.T_g;
    m.T.segment(L.Pbar.begin(), L.Pbar.count()) = m.Tbar_g;

    const MatrixXd W = m.W_ac.asDiagonal();
    const MatrixXd CB = m.I_cac * m.B_ac;  // converter rows of B
    const MatrixXd MB = m.I_ac * m.B_ac;   // machine rows of B
    const MatrixXd Mp = m.M_p.asDiagonal();
    const MatrixXd Kth = m.K_theta.asDiagonal();
    const MatrixXd Kg = m.K_g.asDiagonal();

    m.A = MatrixXd::Zero(ix(n), ix(n));
    auto blk = [&](const StateLayout::Range& r, const StateLayout::Range& c) {
        return m.A.block(r.begin(), c.begin(), r.count(), c.count());
    };
    blk(L.eta, L.eta) = -CB.transpose() * Mp * CB * W;
    blk(L.eta, L.omega) = MB.transpose();
    blk(L.eta, L.v) = CB.transpose() * Kth * m.I_cdc;

    blk(L.omega, L.eta) = -MB * W;
    blk(L.omega, L.omega) = -MatrixXd(m.D.asDiagonal());
    blk(L.omega, L.P) = m.Ig_ac;
    blk(L.omega, L.Pbar) = m.Igbar_ac;

    blk(L.v, L.eta) = -m.I_cdc.transpose() * CB * W;
    blk(L.v, L.v) = -(MatrixXd(m.G.asDiagonal()) + m.L_dc);
    blk(L.v, L.P) = m.Ig_dc;
    blk(L.v, L.Pbar) = m.Igbar_dc;

    blk(L.P, L.omega) = -Kg * m.Ig_ac.transpose();
    blk(L.P, L.v) = -Kg * m.Ig_dc.transpose();
    blk(L.P, L.P) = -MatrixXd::Identity(ix(nG), ix(nG));

    blk(L.Pbar, L.Pbar) = -MatrixXd::Identity(ix(nGb), ix(nGb));

    // Loads enter through P_ac = L theta + P_d_ac and P_dc = L_dc v + P_d_dc.
    const std::size_t nTh = m.theta_nodes.size();
    m.E_d = MatrixXd::Zero(ix(n), ix(nTh + nV));
    m.E_d.block(L.eta.begin(), 0, L.eta.count(), ix(nTh)) = -CB.transpose() * Mp * m.I_cac;
    m.E_d.block(L.omega.begin(), 0, L.omega.count(), ix(nTh)) = -m.I_ac;
    m.E_d.block(L.v.begin(), 0, L.v.count(), ix(nTh)) = -m.I_cdc.transpose() * m.I_cac;
    m.E_d.block(L.v.begin(), ix(nTh), L.v.count(), ix(nV)) = -MatrixXd::Identity(ix(nV), ix(nV));
    return m;
}

SystemModel assemble(const NetworkSpec& spec) {
    const NetworkGraph graph = build_network(spec);
    const SubgridPartition part = partition_subgrids(graph);
    const DeviceTable devices = validate_devices(spec, graph);
    return assemble(graph, part, devices);
}

MatrixXd reachable_subspace_basis(const SystemModel& model) {
    const auto& L = model.layout;
    const Index n = ix(L.dim());
    const Index nE = L.eta.count();
    MatrixXd eta_basis;
    if (nE > 0) {
        Eigen::JacobiSVD<MatrixXd> svd(model.B_ac.transpose(), Eigen::ComputeFullU);
        const double tol = 1e-10 * std::max(1.0, svd.singularValues().size() ? svd.singularValues()(0) : 1.0);
        Index rank = 0;
        for (Index k = 0; k < svd.singularValues().size(); ++k) rank += svd.singularValues()(k) > tol ? 1 : 0;
        if (rank == nE) {
            eta_basis = MatrixXd::Identity(nE, nE);
        } else {
            eta_basis = svd.matrixU().leftCols(rank);
        }
    } else {
        eta_basis = MatrixXd::Zero(0, 0);
    }
    const Index r = eta_basis.cols();
    MatrixXd Q = MatrixXd::Zero(n, r + n - nE);
    Q.topLeftCorner(nE, r) = eta_basis;
    Q.bottomRightCorner(n - nE, n - nE).setIdentity();
    return Q;
}

}  // namespace hygrid
