#include "hygrid/errors.hpp"

namespace hygrid {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::SelfLoop: return "SelfLoop";
        case ErrorCode::DuplicateEdge: return "DuplicateEdge";
        case ErrorCode::EdgeKindViolation: return "EdgeKindViolation";
        case ErrorCode::DisconnectedUnionGraph: return "DisconnectedUnionGraph";
        case ErrorCode::NonPositiveEdgeWeight: return "NonPositiveEdgeWeight";
        case ErrorCode::MissingDeviceBlock: return "MissingDeviceBlock";
        case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
        case ErrorCode::KindMismatch: return "KindMismatch";
        case ErrorCode::SingularInterior: return "SingularInterior";
        case ErrorCode::DeviceOnInteriorNode: return "DeviceOnInteriorNode";
        case ErrorCode::PassiveBusRemaining: return "PassiveBusRemaining";
        case ErrorCode::RequiresPositiveKg: return "RequiresPositiveKg";
        case ErrorCode::SingularEquilibrium: return "SingularEquilibrium";
        case ErrorCode::PreconditionViolated: return "PreconditionViolated";
        case ErrorCode::CertificateInvalid: return "CertificateInvalid";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::RatioMismatch: return "RatioMismatch";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string field)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      field_(std::move(field)) {}

}  // namespace hygrid
