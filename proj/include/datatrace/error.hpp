#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace datatrace {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  // catalog
  MalformedRow,
  DuplicateDatasetId,
  EmptyRegistry,
  EmptyVenueList,
  // harvester
  VenueNotFound,
  TransportError,
  RateLimited,
  NotInIndex,
  AmbiguousTitleMatch,
  GapInPositions,
  DuplicatePosition,
  // fulltext
  ServiceUnavailable,
  ConversionFailed,
  MalformedXML,
  EmptyBody,
  // detector / analyzer
  UnresolvableDatasetDoi,
  DanglingPaperRef,
  // annotation
  UnknownProject,
  DuplicateProjectName,
  EmptyPdfSet,
  DuplicateLabel,
  FrozenSet,
  UnknownPdfId,
  UnknownLabel,
  UnknownPdf,
  Unauthorized,
  NoOverlap,
  // cli
  UnknownSubcommand,
  ConfigMissing,
  StageInputMissing,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateDatasetId: return "DuplicateDatasetId";
    case ErrorCode::EmptyRegistry: return "EmptyRegistry";
    case ErrorCode::EmptyVenueList: return "EmptyVenueList";
    case ErrorCode::VenueNotFound: return "VenueNotFound";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::NotInIndex: return "NotInIndex";
    case ErrorCode::AmbiguousTitleMatch: return "AmbiguousTitleMatch";
    case ErrorCode::GapInPositions: return "GapInPositions";
    case ErrorCode::DuplicatePosition: return "DuplicatePosition";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::ConversionFailed: return "ConversionFailed";
    case ErrorCode::MalformedXML: return "MalformedXML";
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::UnresolvableDatasetDoi: return "UnresolvableDatasetDoi";
    case ErrorCode::DanglingPaperRef: return "DanglingPaperRef";
    case ErrorCode::UnknownProject: return "UnknownProject";
    case ErrorCode::DuplicateProjectName: return "DuplicateProjectName";
    case ErrorCode::EmptyPdfSet: return "EmptyPdfSet";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::FrozenSet: return "FrozenSet";
    case ErrorCode::UnknownPdfId: return "UnknownPdfId";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownPdf: return "UnknownPdf";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
    case ErrorCode::ConfigMissing: return "ConfigMissing";
    case ErrorCode::StageInputMissing: return "StageInputMissing";
  }
  return "Unknown";
}

/// The single exception type thrown by the library. `code()` is stable and
/// is what the CLI and the annotation service report to callers.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace datatrace
