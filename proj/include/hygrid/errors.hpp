#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hygrid {

enum class ErrorCode {
    // input / schema
    ParseError,
    DuplicateId,
    UnknownNode,
    SelfLoop,
    DuplicateEdge,
    EdgeKindViolation,
    DisconnectedUnionGraph,
    NonPositiveEdgeWeight,
    MissingDeviceBlock,
    NonPositiveParameter,
    KindMismatch,
    // graph algebra
    SingularInterior,
    DeviceOnInteriorNode,
    // model / analysis
    PassiveBusRemaining,
    RequiresPositiveKg,
    SingularEquilibrium,
    PreconditionViolated,
    CertificateInvalid,
    DimensionMismatch,
    NonFiniteState,
    RatioMismatch,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `field()` names the offending
/// node, edge or parameter when one exists.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string field = {});

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

}  // namespace hygrid
