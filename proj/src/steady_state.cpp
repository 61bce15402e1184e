#include "hygrid/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hygrid/errors.hpp"

namespace hygrid {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index ix(std::size_t i) { return static_cast<Index>(i); }

double source_gain(const std::optional<SourceParams>& s) { return s ? s->k_g : 0.0; }

Index position(const std::vector<std::size_t>& order, std::size_t node) {
    auto it = std::lower_bound(order.begin(), order.end(), node);
    return ix(static_cast<std::size_t>(it - order.begin()));
}

}  // namespace

double converter_steady_map(const ConverterParams& p, double v, double P_dc) {
    const double k_g = source_gain(p.source);
    return (p.m_p * p.G + p.m_p * k_g + p.k_theta) * v + p.m_p * P_dc;
}

double droop_characteristic(const ConverterParams& p) {
    const double k_g = source_gain(p.source);
    if (!(k_g > 0.0)) throw Error(ErrorCode::RequiresPositiveKg, "droop slope needs a source with k_g > 0");
    if (p.G != 0.0) throw Error(ErrorCode::PreconditionViolated, "droop slope assumes a lossless converter (G = 0)");
    return -(p.m_p + p.k_theta / k_g);
}

double delta_ac(const ConverterParams& p) {
    const double loss = p.G + source_gain(p.source);
    return p.k_theta / (p.k_theta + p.m_p * loss);
}

double gamma_ac(const ConverterParams& p) {
    const double loss = p.G + source_gain(p.source);
    return loss / (p.k_theta + p.m_p * loss);
}

double gamma_ac(const MachineParams& p) { return p.D + source_gain(p.turbine); }

double gamma_dc(const ConverterParams& p) { return p.k_theta / p.m_p + p.G + source_gain(p.source); }

double gamma_dc(const DcBusParams& p) { return p.G + source_gain(p.source); }

Equilibrium solve_equilibrium(const SystemModel& model, const VectorXd& loads) {
    if (loads.size() != ix(model.load_dim())) {
        throw Error(ErrorCode::DimensionMismatch, "load vector has wrong dimension");
    }
    const auto& L = model.layout;
    const Index nE = L.eta.count();
    const Index nTh = ix(model.theta_nodes.size());
    const Index nAc = ix(model.partition.ac.size());
    const Index nRest = ix(L.dim()) - nE;  // omega, v, P, Pbar

    const MatrixXd Q = reachable_subspace_basis(model);
    const Index r = Q.cols() - nRest;
    const MatrixXd Qeta = Q.topLeftCorner(nE, r);

    // Unknowns u = [z; omega; v; P; Pbar; omega_s] with eta = Qeta z.
    const Index nU = r + nRest + nAc;
    const Index nEq = nTh + nRest;
    if (nU != nEq) {
        throw Error(ErrorCode::SingularEquilibrium, "equilibrium system is not square (ac graph rank deficiency)");
    }
    MatrixXd K = MatrixXd::Zero(nEq, nU);
    VectorXd rhs = VectorXd::Zero(nEq);

    const VectorXd p_ac = loads.head(nTh);
    const MatrixXd W = model.W_ac.asDiagonal();
    const MatrixXd CB = model.I_cac * model.B_ac;
    const MatrixXd Mp = model.M_p.asDiagonal();

    // Angle rates: machines follow omega, converters follow the control law;
    // all must equal the subgrid frequency.
    MatrixXd rate_eta = -model.I_cac.transpose() * Mp * CB * W;
    K.block(0, 0, nTh, r) = rate_eta * Qeta;
    K.block(0, r, nTh, L.omega.count()) = model.I_ac.transpose();
    K.block(0, r + L.omega.count(), nTh, L.v.count()) =
        model.I_cac.transpose() * MatrixXd(model.K_theta.asDiagonal()) * model.I_cdc;
    for (Index k = 0; k < nTh; ++k) {
        const auto sub = *model.partition.ac_of_node[model.theta_nodes[static_cast<std::size_t>(k)]];
        K(k, r + nRest + ix(sub)) = -1.0;
    }
    rhs.head(nTh) = model.I_cac.transpose() * Mp * model.I_cac * p_ac;

    // Remaining rows of A x + E_d p = 0.
    const MatrixXd A_rest = model.A.bottomRows(nRest);
    K.block(nTh, 0, nRest, r) = A_rest.leftCols(nE) * Qeta;
    K.block(nTh, r, nRest, nRest) = A_rest.rightCols(nRest);
    rhs.tail(nRest) = -model.E_d.bottomRows(nRest) * loads;

    Eigen::JacobiSVD<MatrixXd> svd(K, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Equilibrium eq;
    eq.rcond = s.size() == 0 ? 1.0 : (s(0) > 0.0 ? s(s.size() - 1) / s(0) : 0.0);
    if (s.size() > 0 && eq.rcond <= 1e-13) {
        throw Error(ErrorCode::SingularEquilibrium,
                    "equilibrium equations are singular (no stabilizing source or losses reach some subgrid)");
    }
    eq.ill_conditioned = eq.rcond < 1e-10;
    const VectorXd u = s.size() == 0 ? VectorXd() : VectorXd(svd.solve(rhs));

    eq.x = VectorXd::Zero(ix(L.dim()));
    eq.x.head(nE) = Qeta * u.head(r);
    eq.x.tail(nRest) = u.segment(r, nRest);
    eq.omega_s.resize(static_cast<std::size_t>(nAc));
    for (Index i = 0; i < nAc; ++i) eq.omega_s[static_cast<std::size_t>(i)] = u(r + nRest + i);

    const VectorXd eta = eq.x.segment(L.eta.begin(), nE);
    const VectorXd v = eq.x.segment(L.v.begin(), L.v.count());
    eq.P_ac = model.B_ac * W * eta + p_ac;
    eq.P_dc = model.L_dc * v + loads.tail(L.v.count());
    return eq;
}

namespace {

struct AcSums {
    double gamma{0.0};
    double delta_pdc{0.0};
    double load{0.0};
};

AcSums ac_sums(const SystemModel& model, const Equilibrium& eq, const VectorXd& loads, std::size_t i) {
    const auto& sub = model.partition.ac.at(i);
    AcSums s;
    for (auto n : sub.machines) {
        s.gamma += gamma_ac(model.devices.machine(n));
        s.load += loads(position(model.theta_nodes, n));
    }
    for (auto n : sub.converters) {
        const auto& p = model.devices.converter(n);
        s.gamma += gamma_ac(p);
        s.delta_pdc += delta_ac(p) * eq.P_dc(position(model.v_nodes, n));
        s.load += loads(position(model.theta_nodes, n));
    }
    return s;
}

}  // namespace

double subgrid_frequency(const SystemModel& model, const Equilibrium& eq, const VectorXd& loads, std::size_t i) {
    const AcSums s = ac_sums(model, eq, loads, i);
    if (!(s.gamma > 0.0)) {
        throw Error(ErrorCode::PreconditionViolated, "ac subgrid " + std::to_string(i) + " has no frequency damping");
    }
    return -(s.delta_pdc + s.load) / s.gamma;
}

double ac_balance_residual(const SystemModel& model, const Equilibrium& eq, const VectorXd& loads, std::size_t i) {
    const AcSums s = ac_sums(model, eq, loads, i);
    return eq.omega_s.at(i) * s.gamma + s.delta_pdc + s.load;
}

double dc_balance_residual(const SystemModel& model, const Equilibrium& eq, const VectorXd& loads, std::size_t j) {
    const auto& sub = model.partition.dc.at(j);
    const auto& L = model.layout;
    const Index nTh = ix(model.theta_nodes.size());
    double lhs = 0.0;
    double rhs = 0.0;
    for (auto n : sub.buses) {
        const Index k = position(model.v_nodes, n);
        lhs += gamma_dc(model.devices.dc_bus(n)) * eq.x(L.v.begin() + k);
        rhs -= loads(nTh + k);
    }
    for (auto n : sub.converters) {
        const Index k = position(model.v_nodes, n);
        const auto& p = model.devices.converter(n);
        lhs += gamma_dc(p) * eq.x(L.v.begin() + k);
        rhs += eq.omega_s.at(*model.partition.ac_of_node[n]) / p.m_p;
        rhs -= loads(nTh + k);
    }
    return lhs - rhs;
}

double hvdc_average_identity(const SystemModel& model, const Equilibrium& eq, const VectorXd& loads, std::size_t j) {
    const auto& sub = model.partition.dc.at(j);
    const Index nTh = ix(model.theta_nodes.size());
    if (sub.converters.empty()) throw Error(ErrorCode::PreconditionViolated, "dc subgrid has no converters");
    const auto& first = model.devices.converter(sub.converters.front());
    for (auto n : sub.nodes()) {
        const Index k = position(model.v_nodes, n);
        if (model.devices.loss(n) != 0.0 || source_gain(model.devices.source(n)) != 0.0 || loads(nTh + k) != 0.0) {
            throw Error(ErrorCode::PreconditionViolated,
                        "node " + model.graph.id(n) + " has losses, a responsive source or a dc load", model.graph.id(n));
        }
        if (model.graph.kind(n) == NodeKind::Converter) {
            const auto& p = model.devices.converter(n);
            if (p.m_p != first.m_p || p.k_theta != first.k_theta) {
                throw Error(ErrorCode::PreconditionViolated, "converter gains differ within the dc subgrid", model.graph.id(n));
            }
        }
    }
    double sum = 0.0;
    for (auto n : sub.converters) {
        const Index k = position(model.v_nodes, n);
        sum += first.k_theta * eq.x(model.layout.v.begin() + k) - eq.omega_s.at(*model.partition.ac_of_node[n]);
    }
    return std::abs(sum / static_cast<double>(sub.converters.size()));
}

}  // namespace hygrid
