#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hygrid/devices.hpp"
#include "hygrid/network.hpp"
#include "hygrid/system.hpp"

namespace hygrid {

/// Relative singular-value cutoff for the ac connection rank test.
inline constexpr double kRankTolerance = 1e-8;
/// Spectral abscissa band treated as marginal.
inline constexpr double kEigTolerance = 1e-9;

struct KThetaConsistency {
    std::size_t dc_subgrid{0};
    bool pass{true};
    std::vector<std::pair<std::size_t, double>> gains;  // (converter, k_theta)
};

/// Converters sharing a dc subgrid must use identical k_theta (exact match).
std::vector<KThetaConsistency> check_k_theta_consistency(const SubgridPartition& partition, const DeviceTable& devices);

struct StabilizingDeviceCheck {
    bool pass{false};
    std::optional<std::size_t> witness;  // first stabilizing node found
};

/// Some node anywhere has losses or a responsive source.
StabilizingDeviceCheck check_stabilizing_device(const NodeRoleSets& roles);

/// Node split of one ac subgrid. `anchor` nodes provide synchronization,
/// `dependent` nodes must be tied to anchors, `free` nodes are undamped
/// converters of machine-dominated subgrids.
struct AnchorPartition {
    std::size_t subgrid{0};
    bool converter_dominated{false};
    std::vector<std::size_t> anchor;
    std::vector<std::size_t> dependent;
    std::vector<std::size_t> free;
};

AnchorPartition anchor_partition(const AcSubgrid& subgrid, const AcRoleSets& roles);

/// Subgrid edges minus dependent-dependent and anchor-anchor edges.
struct ReducedGraph {
    std::size_t subgrid{0};
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> edges;  // indices into NetworkGraph::ac_edges
};

ReducedGraph reduced_graph(const NetworkGraph& graph, const AcSubgrid& subgrid, const AnchorPartition& part);

struct RemovalResult {
    bool emptied{false};
    std::vector<std::pair<std::size_t, std::size_t>> removals;  // (pendant anchor, removed dependent)
    std::vector<std::size_t> remaining;
};

/// Repeatedly drop a dependent node that is the only neighbour of some
/// anchor, together with all its edges. Ties go to the smallest anchor.
RemovalResult remove_dependent_nodes(const NetworkGraph& graph, const ReducedGraph& reduced, const AnchorPartition& part);

struct CycleCheckResult {
    struct NodeCase {
        std::size_t node{0};
        bool pendant{false};  // edge to an anchor of degree one
        bool cycle{false};    // on a cycle with a pendant-qualified dependent
    };
    bool pass{true};
    std::vector<NodeCase> nodes;
};

/// Cycles are taken inside the reduced graph: a dependent node satisfies
/// the cycle case iff it shares a biconnected block with at least two
/// edges with a pendant-qualified dependent (possibly itself).
CycleCheckResult cycle_check(const NetworkGraph& graph, const ReducedGraph& reduced, const AnchorPartition& part);

struct RankTest {
    bool applicable{false};  // subgrid has machines
    bool pass{true};
    bool indeterminate{false};
    double ratio_converter_rows{0.0};  // sigma_min / sigma_max, 0 when empty
    double ratio_extended{0.0};
    std::vector<double> sv_converter_rows;
    std::vector<double> sv_extended;
};

/// Converter-rows x machine-columns block of the subgrid Laplacian.
Eigen::MatrixXd converter_machine_block(const SystemModel& model, std::size_t ac_subgrid);
/// Rows: damped/sourced machines then all converters. Columns: other
/// machines then other converters.
Eigen::MatrixXd extended_block(const SystemModel& model, std::size_t ac_subgrid);

RankTest rank_test(const SystemModel& model, std::size_t ac_subgrid, double tol_rank = kRankTolerance);

/// Diagonal of the quadratic form V = 1/2 x^T diag(h) x. The Pbar block is
/// zero: V ignores those states.
Eigen::VectorXd lasalle_weights(const SystemModel& model);
double lasalle_value(const SystemModel& model, const Eigen::VectorXd& x);
/// Closed-form derivative along the unforced dynamics with Pbar = 0.
/// Throws CertificateInvalid if k_theta differs inside a dc subgrid and
/// PreconditionViolated if Pbar != 0.
double lasalle_derivative(const SystemModel& model, const Eigen::VectorXd& x);
/// grad V^T xdot.
double lasalle_rate(const SystemModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& xdot);

enum class SpectrumClass { Stable, Marginal, Unstable };
std::string_view to_string(SpectrumClass c);

struct EigenResult {
    std::vector<std::complex<double>> spectrum;  // sorted by descending real part
    double max_real{0.0};
    SpectrumClass verdict{SpectrumClass::Stable};
};

/// Spectrum of T^-1 A on the reachable subspace.
EigenResult eigen_oracle(const SystemModel& model, double tol_eig = kEigTolerance);

enum class Verdict { Pass, Fail, Indeterminate };
std::string_view to_string(Verdict v);

struct SubgridCertificate {
    AnchorPartition partition;
    ReducedGraph reduced;
    RemovalResult removal;
    CycleCheckResult cycles;
    RankTest rank;
    bool certified{false};
};

struct StabilityReport {
    std::string network;
    std::vector<KThetaConsistency> k_theta_checks;
    bool k_theta_pass{true};
    StabilizingDeviceCheck stabilizing;
    std::vector<SubgridCertificate> subgrids;
    bool lasalle_certificate_valid{false};
    EigenResult eigen;
    Verdict verdict{Verdict::Fail};
    std::vector<std::string> notes;
};

StabilityReport verify_stability(const SystemModel& model, double tol_rank = kRankTolerance,
                                 double tol_eig = kEigTolerance);

/// Exit status used by the command line: 0 pass, 2 fail, 3 indeterminate.
int exit_code(Verdict v);

}  // namespace hygrid
