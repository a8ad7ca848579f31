#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace miaudit {

// Broad failure classes. The CLI maps these onto exit codes: input-side
// kinds exit 2, numeric kinds exit 3.
enum class ErrorKind {
  kShape,
  kNumeric,
  kNotPsd,
  kSingular,
  kInsufficientData,
  kDegenerateInput,
  kFormat,
  kValidation,
  kSlice,
  kUndefinedMetric,
  kStratification,
  kInapplicable,
  kConfig,
  kNormalization,
  kIndex,
  kIo,
};

// Finer categories for rejected input files. Each corrupted-file case maps to
// exactly one of these.
enum class FormatCode {
  kNone,
  kBadMagic,
  kBadVersion,
  kBadDtype,
  kBadReserved,
  kTruncatedHeader,
  kTruncatedPayload,
  kNonFinite,
  kBadLabel,
  kDuplicateId,
  kTrailingBytes,
  kBadUtf8,
  kDimensionMismatch,
  kBadHeader,
  kBadNumber,
  kBadJson,
  kMissingAlpha,
  kPositiveLogp,
  kMissingLogp,
  kNegativeEntropy,
  kEmptyRegion,
  kUnknownRegion,
};

std::string_view to_string(ErrorKind kind);
std::string_view to_string(FormatCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        FormatCode code = FormatCode::kNone)
      : std::runtime_error(message), kind_(kind), code_(code) {}

  ErrorKind kind() const noexcept { return kind_; }
  FormatCode code() const noexcept { return code_; }

  // True for failures caused by bad input or configuration rather than by
  // the numerics.
  bool is_input_error() const noexcept;

 private:
  ErrorKind kind_;
  FormatCode code_;
};

}  // namespace miaudit
