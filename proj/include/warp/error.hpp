#ifndef WARP_ERROR_HPP_
#define WARP_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace warp {

enum class ErrorCode {
  kInvalidArgument,
  kIncompatible,
  kBadMagic,
  kMalformedManifest,
  kTruncatedBlob,
  kShapeMismatch,
  kUnknownDtype,
  kOutOfVocab,
  kNonFinite,
  kConfig,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIncompatible: return "incompatible";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kMalformedManifest: return "malformed_manifest";
    case ErrorCode::kTruncatedBlob: return "truncated_blob";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kUnknownDtype: return "unknown_dtype";
    case ErrorCode::kOutOfVocab: return "out_of_vocab";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

// All library failures are reported as warp::Error. what() is a single line
// of the form "<code>: <detail>" so the CLI can forward it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, detail);
}

inline void require(bool cond, ErrorCode code, const std::string& detail) {
  if (!cond) fail(code, detail);
}

}  // namespace warp

#endif  // WARP_ERROR_HPP_
