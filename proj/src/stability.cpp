#include "hygrid/stability.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/biconnected_components.hpp>
#include <boost/property_map/property_map.hpp>

#include "hygrid/errors.hpp"

namespace hygrid {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index ix(std::size_t i) { return static_cast<Index>(i); }

bool contains(const std::vector<std::size_t>& sorted, std::size_t v) {
    return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::vector<std::size_t> sorted_union(std::vector<std::size_t> a, const std::vector<std::size_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    return a;
}

using Adjacency = std::map<std::size_t, std::set<std::size_t>>;

Adjacency adjacency(const NetworkGraph& graph, const ReducedGraph& reduced) {
    Adjacency adj;
    for (auto n : reduced.nodes) adj[n];
    for (auto e : reduced.edges) {
        const auto& edge = graph.ac_edges.at(e);
        adj[edge.from].insert(edge.to);
        adj[edge.to].insert(edge.from);
    }
    return adj;
}

/// Singular values of `X` and sigma_min/sigma_max when X has full column
/// rank shape; 0 for a tall-enough-but-zero matrix, 1 when X has no columns.
std::pair<std::vector<double>, double> column_rank_ratio(const MatrixXd& X) {
    if (X.cols() == 0) return {{}, 1.0};
    if (X.rows() == 0) return {{}, 0.0};
    if (X.rows() < X.cols()) {
        Eigen::JacobiSVD<MatrixXd> svd(X);
        const auto& s = svd.singularValues();
        return {std::vector<double>(s.data(), s.data() + s.size()), 0.0};
    }
    Eigen::JacobiSVD<MatrixXd> svd(X);
    const auto& s = svd.singularValues();
    std::vector<double> sv(s.data(), s.data() + s.size());
    const double ratio = s(0) > 0.0 ? s(s.size() - 1) / s(0) : 0.0;
    return {sv, ratio};
}

MatrixXd pick(const GraphMatrices& gm, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    MatrixXd X(ix(rows.size()), ix(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            X(ix(r), ix(c)) = gm.laplacian(ix(*gm.row_of(rows[r])), ix(*gm.row_of(cols[c])));
        }
    }
    return X;
}

}  // namespace

std::vector<KThetaConsistency> check_k_theta_consistency(const SubgridPartition& partition, const DeviceTable& devices) {
    std::vector<KThetaConsistency> out;
    for (const auto& sub : partition.dc) {
        KThetaConsistency r;
        r.dc_subgrid = sub.index;
        for (auto c : sub.converters) r.gains.emplace_back(c, devices.converter(c).k_theta);
        for (const auto& [node, k] : r.gains) {
            if (k != r.gains.front().second) r.pass = false;
        }
        out.push_back(std::move(r));
    }
    return out;
}

StabilizingDeviceCheck check_stabilizing_device(const NodeRoleSets& roles) {
    std::vector<std::size_t> found;
    auto take = [&](const RoleSplit& s) {
        const auto st = s.stabilizing();
        found.insert(found.end(), st.begin(), st.end());
    };
    for (const auto& a : roles.ac) {
        take(a.machines);
        take(a.converters);
    }
    for (const auto& d : roles.dc) {
        take(d.buses);
        take(d.converters);
    }
    StabilizingDeviceCheck r;
    if (!found.empty()) {
        r.pass = true;
        r.witness = *std::min_element(found.begin(), found.end());
    }
    return r;
}

AnchorPartition anchor_partition(const AcSubgrid& subgrid, const AcRoleSets& roles) {
    AnchorPartition p;
    p.subgrid = subgrid.index;
    p.converter_dominated = subgrid.converters.size() >= subgrid.machines.size();
    if (p.converter_dominated) {
        p.anchor = subgrid.converters;
        p.dependent = subgrid.machines;
    } else {
        p.anchor = sorted_union(roles.machines.stabilizing(), roles.converters.stabilizing());
        p.dependent = roles.machines.other;
        p.free = roles.converters.other;
    }
    std::sort(p.dependent.begin(), p.dependent.end());
    std::sort(p.free.begin(), p.free.end());
    return p;
}

ReducedGraph reduced_graph(const NetworkGraph& graph, const AcSubgrid& subgrid, const AnchorPartition& part) {
    ReducedGraph g;
    g.subgrid = subgrid.index;
    g.nodes = subgrid.nodes();
    for (auto e : subgrid.edges) {
        const auto& edge = graph.ac_edges.at(e);
        const bool dd = contains(part.anchor, edge.from) && contains(part.anchor, edge.to);
        const bool cc = contains(part.dependent, edge.from) && contains(part.dependent, edge.to);
        if (!dd && !cc) g.edges.push_back(e);
    }
    return g;
}

RemovalResult remove_dependent_nodes(const NetworkGraph& graph, const ReducedGraph& reduced, const AnchorPartition& part) {
    Adjacency adj = adjacency(graph, reduced);
    std::set<std::size_t> remaining(part.dependent.begin(), part.dependent.end());
    RemovalResult r;
    while (!remaining.empty()) {
        std::optional<std::pair<std::size_t, std::size_t>> step;
        for (auto l : part.anchor) {
            const auto& nb = adj[l];
            if (nb.size() == 1 && remaining.count(*nb.begin())) {
                step = std::make_pair(l, *nb.begin());
                break;
            }
        }
        if (!step) break;
        const std::size_t j = step->second;
        for (auto k : adj[j]) adj[k].erase(j);
        adj[j].clear();
        remaining.erase(j);
        r.removals.push_back(*step);
    }
    r.remaining.assign(remaining.begin(), remaining.end());
    r.emptied = remaining.empty();
    return r;
}

CycleCheckResult cycle_check(const NetworkGraph& graph, const ReducedGraph& reduced, const AnchorPartition& part) {
    const Adjacency adj = adjacency(graph, reduced);
    auto degree = [&](std::size_t n) { return adj.count(n) ? adj.at(n).size() : 0U; };

    std::set<std::size_t> qualified;
    for (auto c : part.dependent) {
        for (auto l : adj.at(c)) {
            if (contains(part.anchor, l) && degree(l) == 1) qualified.insert(c);
        }
    }

    // Biconnected blocks of the reduced graph; a block with two or more
    // edges carries a cycle through every pair of its nodes.
    using BGraph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS, boost::no_property,
                                         boost::property<boost::edge_index_t, std::size_t>>;
    std::map<std::size_t, std::size_t> local;
    for (std::size_t k = 0; k < reduced.nodes.size(); ++k) local[reduced.nodes[k]] = k;
    BGraph bg(reduced.nodes.size());
    std::size_t eidx = 0;
    for (auto e : reduced.edges) {
        const auto& edge = graph.ac_edges.at(e);
        boost::add_edge(local.at(edge.from), local.at(edge.to), eidx++, bg);
    }
    std::vector<std::size_t> block_of(eidx);
    auto comp = boost::make_iterator_property_map(block_of.begin(), boost::get(boost::edge_index, bg));
    const std::size_t nblocks = eidx ? boost::biconnected_components(bg, comp) : 0;

    std::vector<std::size_t> block_edges(nblocks, 0);
    for (auto b : block_of) ++block_edges[b];
    std::vector<std::set<std::size_t>> block_nodes(nblocks);
    for (auto [it, end] = boost::edges(bg); it != end; ++it) {
        const auto b = block_of[boost::get(boost::edge_index, bg, *it)];
        block_nodes[b].insert(reduced.nodes[boost::source(*it, bg)]);
        block_nodes[b].insert(reduced.nodes[boost::target(*it, bg)]);
    }

    CycleCheckResult r;
    for (auto c : part.dependent) {
        CycleCheckResult::NodeCase nc;
        nc.node = c;
        nc.pendant = qualified.count(c) > 0;
        for (std::size_t b = 0; b < nblocks && !nc.cycle; ++b) {
            if (block_edges[b] < 2 || !block_nodes[b].count(c)) continue;
            for (auto q : qualified) {
                if (block_nodes[b].count(q)) {
                    nc.cycle = true;
                    break;
                }
            }
        }
        if (!nc.pendant && !nc.cycle) r.pass = false;
        r.nodes.push_back(nc);
    }
    return r;
}

MatrixXd converter_machine_block(const SystemModel& model, std::size_t ac_subgrid) {
    const auto& sub = model.partition.ac.at(ac_subgrid);
    const GraphMatrices gm = graph_matrices(model.graph, sub);
    return pick(gm, sub.converters, sub.machines);
}

MatrixXd extended_block(const SystemModel& model, std::size_t ac_subgrid) {
    const auto& sub = model.partition.ac.at(ac_subgrid);
    const auto& roles = model.roles.ac.at(ac_subgrid);
    const GraphMatrices gm = graph_matrices(model.graph, sub);
    std::vector<std::size_t> rows = roles.machines.loss;
    rows.insert(rows.end(), roles.machines.generation.begin(), roles.machines.generation.end());
    rows.insert(rows.end(), sub.converters.begin(), sub.converters.end());
    std::vector<std::size_t> cols = roles.machines.other;
    cols.insert(cols.end(), roles.converters.other.begin(), roles.converters.other.end());
    return pick(gm, rows, cols);
}

RankTest rank_test(const SystemModel& model, std::size_t ac_subgrid, double tol_rank) {
    RankTest t;
    const auto& sub = model.partition.ac.at(ac_subgrid);
    t.applicable = !sub.machines.empty();
    if (!t.applicable) return t;

    auto [sv1, r1] = column_rank_ratio(converter_machine_block(model, ac_subgrid));
    auto [sv2, r2] = column_rank_ratio(extended_block(model, ac_subgrid));
    t.sv_converter_rows = std::move(sv1);
    t.sv_extended = std::move(sv2);
    t.ratio_converter_rows = r1;
    t.ratio_extended = r2;
    const double best = std::max(r1, r2);
    t.pass = best > tol_rank;
    t.indeterminate = t.pass ? best < 100.0 * tol_rank : best > tol_rank / 100.0;
    return t;
}

VectorXd lasalle_weights(const SystemModel& model) {
    const auto& L = model.layout;
    VectorXd h = VectorXd::Zero(ix(L.dim()));
    h.segment(L.eta.begin(), L.eta.count()) = model.W_ac;
    h.segment(L.omega.begin(), L.omega.count()) = model.M;
    h.segment(L.v.begin(), L.v.count()) = model.K_theta_tilde.cwiseProduct(model.C);
    // Source weight: 1 on machines, K~_theta on dc hosts, scaled by T_g / k_g.
    const VectorXd host = (model.Ig_ac.transpose() * VectorXd::Ones(model.Ig_ac.rows())) +
                          model.Ig_dc.transpose() * model.K_theta_tilde;
    h.segment(L.P.begin(), L.P.count()) = host.cwiseProduct(model.T_g).cwiseQuotient(model.K_g);
    return h;
}

double lasalle_value(const SystemModel& model, const VectorXd& x) {
    if (x.size() != ix(model.dim())) throw Error(ErrorCode::DimensionMismatch, "state has wrong dimension");
    return 0.5 * x.dot(lasalle_weights(model).cwiseProduct(x));
}

double lasalle_derivative(const SystemModel& model, const VectorXd& x) {
    if (!model.k_theta_consistent) {
        throw Error(ErrorCode::CertificateInvalid, "k_theta differs inside a dc subgrid; V is not a certificate");
    }
    if (x.size() != ix(model.dim())) throw Error(ErrorCode::DimensionMismatch, "state has wrong dimension");
    const auto& L = model.layout;
    if (L.Pbar.size > 0 && x.segment(L.Pbar.begin(), L.Pbar.count()).cwiseAbs().maxCoeff() != 0.0) {
        throw Error(ErrorCode::PreconditionViolated, "derivative formula holds only for Pbar = 0");
    }
    const VectorXd eta = x.segment(L.eta.begin(), L.eta.count());
    const VectorXd omega = x.segment(L.omega.begin(), L.omega.count());
    const VectorXd v = x.segment(L.v.begin(), L.v.count());
    const VectorXd P = x.segment(L.P.begin(), L.P.count());

    const VectorXd flow = model.M_p.cwiseSqrt().asDiagonal() * (model.I_cac * (model.B_ac * model.W_ac.cwiseProduct(eta)));
    const MatrixXd GL = MatrixXd(model.G.asDiagonal()) + model.L_dc;
    const MatrixXd K = model.K_theta_tilde.asDiagonal();
    const MatrixXd Sym = 0.5 * (K * GL + GL * K);
    const VectorXd host = (model.Ig_ac.transpose() * VectorXd::Ones(model.Ig_ac.rows())) +
                          model.Ig_dc.transpose() * model.K_theta_tilde;

    return -flow.squaredNorm() - omega.dot(model.D.cwiseProduct(omega)) - v.dot(Sym * v) -
           P.dot(host.cwiseQuotient(model.K_g).cwiseProduct(P));
}

double lasalle_rate(const SystemModel& model, const VectorXd& x, const VectorXd& xdot) {
    return x.dot(lasalle_weights(model).cwiseProduct(xdot));
}

std::string_view to_string(SpectrumClass c) {
    switch (c) {
        case SpectrumClass::Stable: return "stable";
        case SpectrumClass::Marginal: return "marginal";
        case SpectrumClass::Unstable: return "unstable";
    }
    return "?";
}

EigenResult eigen_oracle(const SystemModel& model, double tol_eig) {
    const MatrixXd Q = reachable_subspace_basis(model);
    const MatrixXd R = Q.transpose() * model.dynamics() * Q;
    EigenResult r;
    if (R.size() == 0) return r;
    Eigen::EigenSolver<MatrixXd> es(R, false);
    const auto& ev = es.eigenvalues();
    r.spectrum.assign(ev.data(), ev.data() + ev.size());
    std::sort(r.spectrum.begin(), r.spectrum.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    r.max_real = r.spectrum.front().real();
    if (r.max_real < -tol_eig) r.verdict = SpectrumClass::Stable;
    else if (r.max_real <= tol_eig) r.verdict = SpectrumClass::Marginal;
    else r.verdict = SpectrumClass::Unstable;
    return r;
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Indeterminate: return "indeterminate";
    }
    return "?";
}

int exit_code(Verdict v) {
    switch (v) {
        case Verdict::Pass: return 0;
        case Verdict::Fail: return 2;
        case Verdict::Indeterminate: return 3;
    }
    return 2;
}

StabilityReport verify_stability(const SystemModel& model, double tol_rank, double tol_eig) {
    StabilityReport rep;
    rep.k_theta_checks = check_k_theta_consistency(model.partition, model.devices);
    rep.k_theta_pass = std::all_of(rep.k_theta_checks.begin(), rep.k_theta_checks.end(), [](const auto& c) { return c.pass; });
    rep.stabilizing = check_stabilizing_device(model.roles);

    bool all_certified = true;
    bool near_threshold = false;
    for (std::size_t i = 0; i < model.partition.ac.size(); ++i) {
        const auto& sub = model.partition.ac[i];
        SubgridCertificate cert;
        cert.partition = anchor_partition(sub, model.roles.ac[i]);
        cert.reduced = reduced_graph(model.graph, sub, cert.partition);
        cert.removal = remove_dependent_nodes(model.graph, cert.reduced, cert.partition);
        cert.cycles = cycle_check(model.graph, cert.reduced, cert.partition);
        cert.rank = rank_test(model, i, tol_rank);
        const bool topological = cert.removal.emptied || cert.cycles.pass;
        cert.certified = !cert.rank.applicable || topological || (cert.rank.pass && !cert.rank.indeterminate);
        if (!cert.certified) {
            all_certified = false;
            near_threshold = near_threshold || cert.rank.indeterminate;
        }
        rep.subgrids.push_back(std::move(cert));
    }
    rep.lasalle_certificate_valid = rep.k_theta_pass;
    rep.eigen = eigen_oracle(model, tol_eig);

    if (!rep.k_theta_pass || !rep.stabilizing.pass) rep.verdict = Verdict::Fail;
    else if (all_certified) rep.verdict = Verdict::Pass;
    else rep.verdict = near_threshold ? Verdict::Indeterminate : Verdict::Fail;

    rep.notes.push_back("cycle case of the topological check is evaluated on the reduced graph");
    if (!rep.k_theta_pass) rep.notes.push_back("LaSalle certificate invalid: k_theta mismatch in a dc subgrid");
    if (rep.verdict == Verdict::Pass && rep.eigen.verdict != SpectrumClass::Stable) {
        rep.notes.push_back("eigenvalue oracle disagrees with the structural verdict");
    }
    return rep;
}

}  // namespace hygrid
