#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mcmccert {

// Typed runtime error. `code` is a stable machine-readable identifier
// ("ExactModeRequired", "NonPositiveCurvature", ...) used by tests and by
// the CLI to map failures to exit codes. Some failures carry a witness
// pair of point indices (e.g. the pair realizing a contraction violation).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  Error(std::string code, const std::string& message, int witness_a, int witness_b)
      : std::runtime_error(code + ": " + message),
        code_(std::move(code)),
        witness_(witness_a, witness_b),
        has_witness_(true) {}

  const std::string& code() const noexcept { return code_; }
  bool has_witness() const noexcept { return has_witness_; }
  std::pair<int, int> witness() const noexcept { return witness_; }

 private:
  std::string code_;
  std::pair<int, int> witness_{-1, -1};
  bool has_witness_ = false;
};

}  // namespace mcmccert
