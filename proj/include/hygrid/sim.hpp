#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hygrid/system.hpp"

namespace hygrid {

/// Divergence guard on any state entry.
inline constexpr double kDivergenceBound = 1e6;

struct LoadStep {
    double t_start{0.0};
    std::string node;
    double value{0.0};
    Port port{Port::Ac};
};

/// Piecewise-constant loads: each step adds its value from t_start on.
struct DisturbanceSchedule {
    std::vector<LoadStep> steps;

    /// Throws InvalidArgument on negative t_start and on nodes/ports the
    /// model does not have.
    void validate(const SystemModel& model) const;
    /// Load vector in effect on [t, next breakpoint).
    Eigen::VectorXd loads_at(const SystemModel& model, double t) const;
    /// Sorted distinct step times in (0, t_final).
    std::vector<double> breakpoints(double t_final) const;
    /// Loads with every step applied.
    std::vector<NodeLoad> final_loads() const;
};

struct SimOptions {
    std::size_t sample_every{1};                 // keep every n-th step (final state always kept)
    std::optional<Eigen::VectorXd> reference;    // V is evaluated on x - reference
};

struct Trajectory {
    std::vector<std::string> labels;
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<double> V;
    std::vector<double> dV;          // grad V^T xdot with the loads in effect
    double max_V_increase{0.0};      // largest V(t_k+1) - V(t_k) over all steps
    std::size_t steps{0};

    std::size_t size() const { return t.size(); }
};

/// Classical RK4 with fixed step dt; steps are shortened to land on load
/// breakpoints and on t_final.
Trajectory simulate(const SystemModel& model, const Eigen::VectorXd& x0, const DisturbanceSchedule& schedule,
                    double t_final, double dt, const SimOptions& options = {});

/// Line flows W eta, one per ac edge.
Eigen::VectorXd edge_flows(const SystemModel& model, const Eigen::VectorXd& x);

/// Undamped orbit of the three-machine line network (machine 1 damped, hub
/// of edges to machines 2 and 3). Returns (eta1, eta2, omega1..3) scaled by c.
/// Requires b2/b1 == m3/m2 within 1e-12.
Eigen::VectorXd closed_form_three_machine(double b1, double b2, double m2, double m3, double t, double c = 1.0);

}  // namespace hygrid
