#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace umi {

/** Domain error with a stable machine-readable code.
 *
 * Codes are short snake_case tokens ("clock_skew", "low_confidence", ...);
 * the CLI surfaces them as structured JSON on stderr.
 */
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void raise(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace umi
