#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fedq {

enum class ErrorKind {
  InvalidArgument,
  InvalidConfig,
  DegenerateMdp,
  InconsistentReports,
  NegativeVariance,
  NotGmdp,
  InsufficientPoints,
  Io,
  Parse,
};

/// Machine-readable category name, also used as the CLI error tag.
std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace fedq
