#include "sarndwi/error.hpp"

namespace sarndwi {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Config: return "ConfigError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Format: return "FormatError";
    case ErrorCode::Dimension: return "DimensionError";
    case ErrorCode::Shape: return "ShapeError";
    case ErrorCode::NonFinite: return "NonFiniteError";
    case ErrorCode::NegativeRadiance: return "NegativeRadianceError";
    case ErrorCode::Scale: return "ScaleError";
    case ErrorCode::BinCount: return "BinCountError";
    case ErrorCode::Domain: return "DomainError";
    case ErrorCode::DegenerateHistogram: return "DegenerateHistogramError";
    case ErrorCode::SingleClass: return "SingleClassError";
    case ErrorCode::ZeroVariance: return "ZeroVarianceError";
    case ErrorCode::EmptyDataset: return "EmptyDatasetError";
    case ErrorCode::MissingChip: return "MissingChipError";
    case ErrorCode::Divergence: return "DivergenceError";
    case ErrorCode::InvalidArgument: return "InvalidArgumentError";
  }
  return "Error";
}

}  // namespace sarndwi
