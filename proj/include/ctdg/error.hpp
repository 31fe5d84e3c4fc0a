#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctdg {

// Coarse failure classes; the CLI prints the category name and maps it to
// an exit status.
enum class ErrorCategory {
  kParse,
  kInvalidArgument,
  kShapeMismatch,
  kIo,
  kNumerical,
  kUnknownNode,
};

constexpr std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kParse: return "parse_error";
    case ErrorCategory::kInvalidArgument: return "invalid_argument";
    case ErrorCategory::kShapeMismatch: return "shape_mismatch";
    case ErrorCategory::kIo: return "io_error";
    case ErrorCategory::kNumerical: return "numerical_error";
    case ErrorCategory::kUnknownNode: return "unknown_node";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

inline void require(bool ok, ErrorCategory c, const std::string& what) {
  if (!ok) fail(c, what);
}

}  // namespace ctdg
