#include "miaudit/error.hpp"

namespace miaudit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kNotPsd: return "not-psd";
    case ErrorKind::kSingular: return "singular";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kSlice: return "slice";
    case ErrorKind::kUndefinedMetric: return "undefined-metric";
    case ErrorKind::kStratification: return "stratification";
    case ErrorKind::kInapplicable: return "inapplicable";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kNormalization: return "normalization";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

std::string_view to_string(FormatCode code) {
  switch (code) {
    case FormatCode::kNone: return "none";
    case FormatCode::kBadMagic: return "bad-magic";
    case FormatCode::kBadVersion: return "bad-version";
    case FormatCode::kBadDtype: return "bad-dtype";
    case FormatCode::kBadReserved: return "bad-reserved";
    case FormatCode::kTruncatedHeader: return "truncated-header";
    case FormatCode::kTruncatedPayload: return "truncated-payload";
    case FormatCode::kNonFinite: return "non-finite";
    case FormatCode::kBadLabel: return "bad-label";
    case FormatCode::kDuplicateId: return "duplicate-id";
    case FormatCode::kTrailingBytes: return "trailing-bytes";
    case FormatCode::kBadUtf8: return "bad-utf8";
    case FormatCode::kDimensionMismatch: return "dimension-mismatch";
    case FormatCode::kBadHeader: return "bad-header";
    case FormatCode::kBadNumber: return "bad-number";
    case FormatCode::kBadJson: return "bad-json";
    case FormatCode::kMissingAlpha: return "missing-alpha";
    case FormatCode::kPositiveLogp: return "positive-logp";
    case FormatCode::kMissingLogp: return "missing-logp";
    case FormatCode::kNegativeEntropy: return "negative-entropy";
    case FormatCode::kEmptyRegion: return "empty-region";
    case FormatCode::kUnknownRegion: return "unknown-region";
  }
  return "unknown";
}

bool Error::is_input_error() const noexcept {
  switch (kind_) {
    case ErrorKind::kFormat:
    case ErrorKind::kValidation:
    case ErrorKind::kSlice:
    case ErrorKind::kConfig:
    case ErrorKind::kIo:
    case ErrorKind::kStratification:
    case ErrorKind::kInapplicable:
    case ErrorKind::kIndex:
    case ErrorKind::kNormalization:
    case ErrorKind::kShape:
    case ErrorKind::kUndefinedMetric:
    case ErrorKind::kInsufficientData:
    case ErrorKind::kDegenerateInput:
      return true;
    case ErrorKind::kNumeric:
    case ErrorKind::kNotPsd:
    case ErrorKind::kSingular:
      return false;
  }
  return true;
}

}  // namespace miaudit
