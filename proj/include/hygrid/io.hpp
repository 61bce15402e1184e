#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "hygrid/network.hpp"
#include "hygrid/sim.hpp"
#include "hygrid/spec.hpp"
#include "hygrid/stability.hpp"
#include "hygrid/steady_state.hpp"
#include "hygrid/system.hpp"

namespace hygrid {

using Json = nlohmann::ordered_json;

/// Network file schema:
///   nodes:    [{id, kind: ac-machine | dc-bus | converter | ac-bus}]
///   ac_edges: [{id?, from, to, b}]
///   dc_edges: [{id?, from, to, g}]
///   devices:  {node id: {type?, ...parameters}}
/// Keys "name", "base", "comment" and "notes" are optional and ignored by
/// the analysis. Throws Error(ParseError) naming the offending field.
NetworkSpec parse_network(const Json& doc);
NetworkSpec load_network(const std::filesystem::path& path);
Json network_to_json(const NetworkSpec& spec);

/// {steps: [{t_start, node, value, port?: ac | dc}]}
DisturbanceSchedule parse_disturbance(const Json& doc);
DisturbanceSchedule load_disturbance(const std::filesystem::path& path);

/// Steps on eliminated passive buses are split over the boundary nodes.
DisturbanceSchedule transfer_loads(const DisturbanceSchedule& schedule, const PassiveElimination& elimination);

Json report_to_json(const SystemModel& model, const StabilityReport& report);
void print_report(std::ostream& out, const SystemModel& model, const StabilityReport& report);

Json eigen_to_json(const EigenResult& eig);
void print_eigen(std::ostream& out, const EigenResult& eig);

Json equilibrium_to_json(const SystemModel& model, const Equilibrium& eq, const Eigen::VectorXd& loads);
void print_equilibrium_csv(std::ostream& out, const SystemModel& model, const Equilibrium& eq);

/// Dense matrix bundle of the assembled model.
Json model_to_json(const SystemModel& model);

void write_trajectory_csv(std::ostream& out, const Trajectory& tr);
Json trajectory_summary(const SystemModel& model, const Trajectory& tr);

}  // namespace hygrid
