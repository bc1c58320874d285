#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowlab {

/// Base class for every domain error raised by the library.
///
/// `module()` names the pipeline stage that raised it ("panel", "ica", ...)
/// and `kind()` the error variant ("DuplicateKey", "RankDeficient", ...).
/// `what()` is the module-qualified message the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string module, std::string kind, const std::string& detail)
      : std::runtime_error(module + ": " + kind + (detail.empty() ? "" : ": " + detail)),
        module_(std::move(module)),
        kind_(std::move(kind)) {}

  [[nodiscard]] const std::string& module() const noexcept { return module_; }
  [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

 private:
  std::string module_;
  std::string kind_;
};

/// Caller passed arguments that violate an operation's documented precondition.
class PreconditionError : public Error {
 public:
  PreconditionError(std::string module, const std::string& detail)
      : Error(std::move(module), "PreconditionViolated", detail) {}
};

}  // namespace flowlab
