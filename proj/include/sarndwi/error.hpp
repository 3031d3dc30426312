#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sarndwi {

// Error categories. Every exception thrown by the library carries one; the
// C API maps them one-to-one onto status codes and the CLI prefixes messages
// with the category name.
enum class ErrorCode {
  Config = 1,
  Io,
  Format,
  Dimension,
  Shape,
  NonFinite,
  NegativeRadiance,
  Scale,
  BinCount,
  Domain,
  DegenerateHistogram,
  SingleClass,
  ZeroVariance,
  EmptyDataset,
  MissingChip,
  Divergence,
  InvalidArgument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define SARNDWI_DEFINE_ERROR(Name, Code)                                 \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(Code, message) {} \
  };

SARNDWI_DEFINE_ERROR(ConfigError, ErrorCode::Config)
SARNDWI_DEFINE_ERROR(IoError, ErrorCode::Io)
SARNDWI_DEFINE_ERROR(FormatError, ErrorCode::Format)
SARNDWI_DEFINE_ERROR(DimensionError, ErrorCode::Dimension)
SARNDWI_DEFINE_ERROR(ShapeError, ErrorCode::Shape)
SARNDWI_DEFINE_ERROR(NonFiniteError, ErrorCode::NonFinite)
SARNDWI_DEFINE_ERROR(NegativeRadianceError, ErrorCode::NegativeRadiance)
SARNDWI_DEFINE_ERROR(ScaleError, ErrorCode::Scale)
SARNDWI_DEFINE_ERROR(BinCountError, ErrorCode::BinCount)
SARNDWI_DEFINE_ERROR(DomainError, ErrorCode::Domain)
SARNDWI_DEFINE_ERROR(DegenerateHistogramError, ErrorCode::DegenerateHistogram)
SARNDWI_DEFINE_ERROR(SingleClassError, ErrorCode::SingleClass)
SARNDWI_DEFINE_ERROR(ZeroVarianceError, ErrorCode::ZeroVariance)
SARNDWI_DEFINE_ERROR(EmptyDatasetError, ErrorCode::EmptyDataset)
SARNDWI_DEFINE_ERROR(MissingChipError, ErrorCode::MissingChip)
SARNDWI_DEFINE_ERROR(DivergenceError, ErrorCode::Divergence)
SARNDWI_DEFINE_ERROR(InvalidArgumentError, ErrorCode::InvalidArgument)

#undef SARNDWI_DEFINE_ERROR

}  // namespace sarndwi
