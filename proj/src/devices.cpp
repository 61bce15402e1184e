#include "hygrid/devices.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "hygrid/errors.hpp"

namespace hygrid {

namespace {

template <class T>
const T& get_block(const std::vector<std::optional<DeviceBlock>>& blocks, std::size_t node, std::string_view what) {
    const auto& b = blocks.at(node);
    if (!b || !std::holds_alternative<T>(*b)) {
        throw Error(ErrorCode::KindMismatch, "node #" + std::to_string(node) + " has no " + std::string(what) + " block");
    }
    return std::get<T>(*b);
}

void require_positive(double value, const std::string& node, std::string_view field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw Error(ErrorCode::NonPositiveParameter,
                    "parameter " + std::string(field) + " of node " + node + " must be > 0", node + "." + std::string(field));
    }
}

void require_nonnegative(double value, const std::string& node, std::string_view field) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
        throw Error(ErrorCode::NonPositiveParameter,
                    "parameter " + std::string(field) + " of node " + node + " must be >= 0", node + "." + std::string(field));
    }
}

void check_source(const std::optional<SourceParams>& s, const std::string& node, std::string_view prefix) {
    if (!s) return;
    require_positive(s->T_g, node, std::string(prefix) + ".T_g");
    require_nonnegative(s->k_g, node, std::string(prefix) + ".k_g");
}

std::string_view block_kind(const DeviceBlock& b) {
    if (std::holds_alternative<MachineParams>(b)) return "machine";
    if (std::holds_alternative<DcBusParams>(b)) return "dc-bus";
    return "converter";
}

}  // namespace

const MachineParams& DeviceTable::machine(std::size_t node) const { return get_block<MachineParams>(blocks_, node, "machine"); }
const DcBusParams& DeviceTable::dc_bus(std::size_t node) const { return get_block<DcBusParams>(blocks_, node, "dc-bus"); }
const ConverterParams& DeviceTable::converter(std::size_t node) const { return get_block<ConverterParams>(blocks_, node, "converter"); }

std::optional<SourceParams> DeviceTable::source(std::size_t node) const {
    const auto& b = blocks_.at(node);
    if (!b) return std::nullopt;
    return std::visit([](const auto& p) -> std::optional<SourceParams> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MachineParams>) return p.turbine;
        else return p.source;
    }, *b);
}

double DeviceTable::loss(std::size_t node) const {
    const auto& b = blocks_.at(node);
    if (!b) return 0.0;
    return std::visit([](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MachineParams>) return p.D;
        else return p.G;
    }, *b);
}

DeviceTable validate_devices(const NetworkSpec& spec, const NetworkGraph& graph) {
    std::vector<std::optional<DeviceBlock>> blocks(graph.size());
    for (const auto& [id, block] : spec.devices) {
        const auto node = graph.find(id);
        if (!node) throw Error(ErrorCode::UnknownNode, "device block for unknown node " + id, id);
        const NodeKind kind = graph.kind(*node);
        const bool match = (kind == NodeKind::AcMachine && std::holds_alternative<MachineParams>(block)) ||
                           (kind == NodeKind::DcBus && std::holds_alternative<DcBusParams>(block)) ||
                           (kind == NodeKind::Converter && std::holds_alternative<ConverterParams>(block));
        if (!match) {
            throw Error(ErrorCode::KindMismatch,
                        std::string(block_kind(block)) + " block on " + std::string(to_string(kind)) + " node " + id, id);
        }
        std::visit([&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MachineParams>) {
                require_positive(p.M, id, "M");
                require_nonnegative(p.D, id, "D");
                check_source(p.turbine, id, "turbine");
            } else if constexpr (std::is_same_v<T, DcBusParams>) {
                require_positive(p.C, id, "C");
                require_nonnegative(p.G, id, "G");
                check_source(p.source, id, "source");
            } else {
                require_positive(p.C, id, "C");
                require_nonnegative(p.G, id, "G");
                require_positive(p.m_p, id, "m_p");
                require_positive(p.k_theta, id, "k_theta");
                check_source(p.source, id, "source");
            }
        }, block);
        blocks[*node] = block;
    }
    for (std::size_t i = 0; i < graph.size(); ++i) {
        if (graph.kind(i) != NodeKind::AcBus && !blocks[i]) {
            throw Error(ErrorCode::MissingDeviceBlock, "node " + graph.id(i) + " has no device block", graph.id(i));
        }
    }
    return DeviceTable(std::move(blocks));
}

std::string_view to_string(NodeRole role) {
    switch (role) {
        case NodeRole::Loss: return "l";
        case NodeRole::Generation: return "g";
        case NodeRole::Other: return "o";
    }
    return "?";
}

NodeRole node_role(const DeviceTable& devices, std::size_t node) {
    if (devices.loss(node) > 0.0) return NodeRole::Loss;
    const auto src = devices.source(node);
    if (src && src->k_g > 0.0) return NodeRole::Generation;
    return NodeRole::Other;
}

std::vector<std::size_t> RoleSplit::stabilizing() const {
    std::vector<std::size_t> all(loss);
    all.insert(all.end(), generation.begin(), generation.end());
    std::sort(all.begin(), all.end());
    return all;
}

namespace {

RoleSplit split(const std::vector<std::size_t>& nodes, const DeviceTable& devices) {
    RoleSplit s;
    for (const auto n : nodes) {
        switch (node_role(devices, n)) {
            case NodeRole::Loss: s.loss.push_back(n); break;
            case NodeRole::Generation: s.generation.push_back(n); break;
            case NodeRole::Other: s.other.push_back(n); break;
        }
    }
    return s;
}

}  // namespace

NodeRoleSets classify_nodes(const SubgridPartition& partition, const DeviceTable& devices) {
    NodeRoleSets sets;
    for (const auto& sub : partition.ac) {
        sets.ac.push_back(AcRoleSets{sub.index, split(sub.machines, devices), split(sub.converters, devices)});
    }
    for (const auto& sub : partition.dc) {
        sets.dc.push_back(DcRoleSets{sub.index, split(sub.buses, devices), split(sub.converters, devices)});
    }
    return sets;
}

}  // namespace hygrid
