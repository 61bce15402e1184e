#pragma once

#include <cstddef>
#include <random>

#include <Eigen/Dense>

#include "hygrid/spec.hpp"
#include "hygrid/system.hpp"

namespace hygrid::testkit {

struct RandomNetworkOptions {
    std::size_t max_nodes{12};
    std::size_t max_ac{3};
    std::size_t max_dc{2};
    double w_lo{0.5};
    double w_hi{2.0};
    double p_damped{0.3};
    double p_source{0.4};
    double p_responsive{0.5};
    double p_extra_edge{0.25};
    double p_converter{0.5};
    bool consistent_k_theta{true};
};

/// Connected random hybrid network; retries internally until the union
/// graph is connected.
NetworkSpec random_network(std::mt19937_64& rng, const RandomNetworkOptions& opt = {});

/// Laplacian built entry by entry from an adjacency list, without using
/// the incidence matrix.
Eigen::MatrixXd adjacency_laplacian(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);

/// Equilibrium from the plain linear solve on the reachable subspace;
/// valid when the restricted dynamics are nonsingular.
Eigen::VectorXd subspace_equilibrium(const SystemModel& model, const Eigen::VectorXd& loads);

/// Random load vector with entries in [-0.5, 0.5].
Eigen::VectorXd random_loads(std::mt19937_64& rng, const SystemModel& model);

/// Random state in the reachable subspace with Pbar = 0.
Eigen::VectorXd random_state(std::mt19937_64& rng, const SystemModel& model);

/// Example 1 network for arbitrary parameters.
NetworkSpec three_machine_network(double m1, double d1, double m2, double m3, double b1, double b2);

}  // namespace hygrid::testkit
