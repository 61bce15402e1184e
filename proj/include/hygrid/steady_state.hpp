#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "hygrid/spec.hpp"
#include "hygrid/system.hpp"

namespace hygrid {

/// Steady-state frequency of a converter from its dc voltage deviation and
/// dc network injection: (m_p G + m_p k_g + k_theta) v + m_p P_dc.
double converter_steady_map(const ConverterParams& params, double v, double P_dc);

/// omega_s / P_ac slope of a lossless converter on a k_g > 0 source without
/// dc network: -(m_p + k_theta / k_g).
double droop_characteristic(const ConverterParams& params);

/// k_theta / (k_theta + m_p (G + k_g)), in (0, 1].
double delta_ac(const ConverterParams& params);
/// (G + k_g) / (k_theta + m_p (G + k_g)).
double gamma_ac(const ConverterParams& params);
/// D + k_g.
double gamma_ac(const MachineParams& params);
/// k_theta / m_p + G + k_g.
double gamma_dc(const ConverterParams& params);
/// G + k_g.
double gamma_dc(const DcBusParams& params);

struct Equilibrium {
    Eigen::VectorXd x;             // state, StateLayout order
    std::vector<double> omega_s;   // per ac subgrid
    Eigen::VectorXd P_ac;          // per theta node (ac injection incl. load)
    Eigen::VectorXd P_dc;          // per v node (dc injection incl. load)
    double rcond{1.0};             // smallest/largest singular value of the solve
    bool ill_conditioned{false};   // rcond below 1e-10
};

/// Synchronous equilibrium for constant loads (see SystemModel::load_vector).
/// Unknowns are the reachable state plus one synchronous frequency per ac
/// subgrid; every angle in subgrid i advances at omega_s^i.
Equilibrium solve_equilibrium(const SystemModel& model, const Eigen::VectorXd& loads);

/// Closed-form subgrid frequency from the converter dc injections of an
/// equilibrium: -(sum delta_l P_dc,l + 1^T P_d_ac) / sum gamma_ac,l.
/// Throws PreconditionViolated when the subgrid has no damping at all.
double subgrid_frequency(const SystemModel& model, const Equilibrium& eq, const Eigen::VectorXd& loads,
                         std::size_t ac_subgrid);

/// omega_s sum(gamma_ac) + sum(delta P_dc) + 1^T P_d_ac for one ac subgrid.
double ac_balance_residual(const SystemModel& model, const Equilibrium& eq, const Eigen::VectorXd& loads,
                           std::size_t ac_subgrid);

/// sum(gamma_dc v) - sum(omega_s^{j_l} / m_p) + 1^T P_d_dc for one dc subgrid.
double dc_balance_residual(const SystemModel& model, const Equilibrium& eq, const Eigen::VectorXd& loads,
                           std::size_t dc_subgrid);

/// |mean_l (k_theta v_l - omega_s^{j_l})| over the converters of a lossless,
/// sourceless, unloaded dc subgrid with identical converter gains.
double hvdc_average_identity(const SystemModel& model, const Equilibrium& eq, const Eigen::VectorXd& loads,
                             std::size_t dc_subgrid);

}  // namespace hygrid
