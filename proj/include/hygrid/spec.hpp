#pragma once

// Declarative network description: the in-memory image of the network
// config file. Nothing here is validated; see build_network() and
// validate_devices().

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hygrid {

enum class NodeKind {
    AcMachine,
    DcBus,
    Converter,
    /// Device-free ac bus. Only allowed as an interior node that is
    /// Kron-eliminated before a system model is assembled.
    AcBus,
};

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> node_kind_from_string(std::string_view text);

struct NodeSpec {
    std::string id;
    NodeKind kind{NodeKind::AcMachine};
};

/// Undirected edge. `weight` is a susceptance for ac edges and a
/// conductance for dc edges, per-unit.
struct EdgeSpec {
    std::string id;
    std::string from;
    std::string to;
    double weight{0.0};
};

/// First-order power source, T_g dP/dt = -P - k_g * (omega or v).
struct SourceParams {
    double T_g{1.0};
    double k_g{0.0};
};
using TurbineParams = SourceParams;
using DcSourceParams = SourceParams;

struct MachineParams {
    double M{1.0};
    double D{0.0};
    std::optional<TurbineParams> turbine;
};

struct DcBusParams {
    double C{1.0};
    double G{0.0};
    std::optional<DcSourceParams> source;
};

/// dc-link dynamics plus the dual-port grid-forming gains
/// (m_p: P_ac-f droop, k_theta: v_dc-f droop).
struct ConverterParams {
    double C{1.0};
    double G{0.0};
    double m_p{0.05};
    double k_theta{0.1};
    std::optional<DcSourceParams> source;
};

using DeviceBlock = std::variant<MachineParams, DcBusParams, ConverterParams>;

struct NetworkSpec {
    std::string name;
    std::vector<NodeSpec> nodes;
    std::vector<EdgeSpec> ac_edges;
    std::vector<EdgeSpec> dc_edges;
    std::map<std::string, DeviceBlock> devices;
};

}  // namespace hygrid
