#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hygrid/devices.hpp"
#include "hygrid/network.hpp"

namespace hygrid {

/// State ordering (eta, omega, v, P, Pbar). eta has one entry per ac edge,
/// omega per machine, v per converter and dc bus, P per source with
/// k_g > 0 and Pbar per source with k_g = 0.
struct StateLayout {
    struct Range {
        std::size_t offset{0};
        std::size_t size{0};
        Eigen::Index begin() const { return static_cast<Eigen::Index>(offset); }
        Eigen::Index count() const { return static_cast<Eigen::Index>(size); }
    };

    Range eta;
    Range omega;
    Range v;
    Range P;
    Range Pbar;

    std::vector<std::string> eta_ids;
    std::vector<std::string> omega_ids;
    std::vector<std::string> v_ids;
    std::vector<std::string> P_ids;
    std::vector<std::string> Pbar_ids;

    std::size_t dim() const { return Pbar.offset + Pbar.size; }
    /// "eta:<edge>", "omega:<node>", ... in state order.
    std::vector<std::string> labels() const;
};

enum class Port { Ac, Dc };

/// Constant load deviation at one node. Converters take loads on either
/// port; machines only on ac, dc buses only on dc.
struct NodeLoad {
    std::string node;
    double value{0.0};
    Port port{Port::Ac};
};

/// Linear model T dx/dt = A x + E_d [P_d_ac; P_d_dc] with every building
/// block kept for the stability checks.
struct SystemModel {
    NetworkGraph graph;
    SubgridPartition partition;
    DeviceTable devices;
    NodeRoleSets roles;
    StateLayout layout;

    // Node orderings (graph indices).
    std::vector<std::size_t> theta_nodes;      // machines and converters
    std::vector<std::size_t> machine_nodes;
    std::vector<std::size_t> converter_nodes;
    std::vector<std::size_t> v_nodes;          // converters and dc buses
    std::vector<std::size_t> dc_bus_nodes;
    std::vector<std::size_t> source_nodes;     // P
    std::vector<std::size_t> bar_source_nodes; // Pbar

    Eigen::VectorXd T;   // diagonal of T
    Eigen::MatrixXd A;
    Eigen::MatrixXd E_d; // columns: P_d_ac over theta_nodes, then P_d_dc over v_nodes

    Eigen::MatrixXd B_ac;  // theta_nodes x ac edges
    Eigen::VectorXd W_ac;  // ac edge weights
    Eigen::MatrixXd L_ac;
    Eigen::MatrixXd L_dc;  // v_nodes x v_nodes

    Eigen::MatrixXd I_ac, I_cac;    // select machines / converters from theta
    Eigen::MatrixXd I_cdc, I_dc;    // select converters / dc buses from v
    Eigen::MatrixXd Ig_ac, Ig_dc;   // host node -> source with k_g > 0
    Eigen::MatrixXd Igbar_ac, Igbar_dc;

    Eigen::VectorXd M, D;              // per machine
    Eigen::VectorXd C, G;              // per v node
    Eigen::VectorXd M_p, K_theta;      // per converter
    Eigen::VectorXd K_theta_tilde;     // per v node
    Eigen::VectorXd K_g, T_g;          // per P source
    Eigen::VectorXd Tbar_g;            // per Pbar source

    /// Converters of every dc subgrid share k_theta.
    bool k_theta_consistent{false};

    std::size_t dim() const { return layout.dim(); }
    /// T^-1 A.
    Eigen::MatrixXd dynamics() const;
    Eigen::MatrixXd input() const;  // T^-1 E_d
    std::size_t load_dim() const { return theta_nodes.size() + v_nodes.size(); }
    /// Stacked [P_d_ac; P_d_dc] for the given loads. Throws on bad node/port.
    Eigen::VectorXd load_vector(const std::vector<NodeLoad>& loads) const;
};

/// Throws PassiveBusRemaining if the network still holds ac-bus nodes.
SystemModel assemble(const NetworkGraph& graph, const SubgridPartition& partition, const DeviceTable& devices);

/// Parse-free convenience: build, partition, validate and assemble.
SystemModel assemble(const NetworkSpec& spec);

/// Orthonormal basis of im(B_ac^T) x (all other coordinates), the subspace
/// reachable from physical angle configurations. Identity for forests.
Eigen::MatrixXd reachable_subspace_basis(const SystemModel& model);

}  // namespace hygrid
