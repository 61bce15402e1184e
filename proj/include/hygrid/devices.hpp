#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "hygrid/network.hpp"
#include "hygrid/spec.hpp"

namespace hygrid {

/// Checked device parameters, aligned with NetworkGraph node order.
/// Passive ac buses have no entry.
class DeviceTable {
public:
    DeviceTable() = default;
    explicit DeviceTable(std::vector<std::optional<DeviceBlock>> blocks) : blocks_(std::move(blocks)) {}

    std::size_t size() const { return blocks_.size(); }
    bool has_device(std::size_t node) const { return blocks_.at(node).has_value(); }

    const MachineParams& machine(std::size_t node) const;
    const DcBusParams& dc_bus(std::size_t node) const;
    const ConverterParams& converter(std::size_t node) const;

    /// Turbine or dc source attached to the node, if any.
    std::optional<SourceParams> source(std::size_t node) const;
    /// D for machines, G for dc buses and converters.
    double loss(std::size_t node) const;

private:
    std::vector<std::optional<DeviceBlock>> blocks_;
};

DeviceTable validate_devices(const NetworkSpec& spec, const NetworkGraph& graph);

/// "l": significant losses (D or G > 0); "g": attached source with k_g > 0
/// and no losses; "o": everything else.
enum class NodeRole { Loss, Generation, Other };

std::string_view to_string(NodeRole role);

NodeRole node_role(const DeviceTable& devices, std::size_t node);

struct RoleSplit {
    std::vector<std::size_t> loss;
    std::vector<std::size_t> generation;
    std::vector<std::size_t> other;

    std::size_t size() const { return loss.size() + generation.size() + other.size(); }
    /// loss and generation sets together.
    std::vector<std::size_t> stabilizing() const;
};

struct AcRoleSets {
    std::size_t subgrid{0};
    RoleSplit machines;
    RoleSplit converters;
};

struct DcRoleSets {
    std::size_t subgrid{0};
    RoleSplit buses;
    RoleSplit converters;
};

struct NodeRoleSets {
    std::vector<AcRoleSets> ac;
    std::vector<DcRoleSets> dc;
};

NodeRoleSets classify_nodes(const SubgridPartition& partition, const DeviceTable& devices);

}  // namespace hygrid
