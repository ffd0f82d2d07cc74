#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace csieve {

/// Error with a stable machine-readable code ("EmptyBlock", "CalibrationDiverged", ...)
/// alongside the human-readable message.
class SieveError : public std::runtime_error {
 public:
  SieveError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& what) {
  throw SieveError(std::move(code), what);
}

}  // namespace csieve
