#pragma once

#include <stdexcept>
#include <string>

namespace distill {

// A parameter record broke one of its documented invariants. `invariant()` is a
// stable identifier suitable for machine-readable error lines.
class InvariantError : public std::invalid_argument {
 public:
  InvariantError(std::string invariant, const std::string& what)
      : std::invalid_argument(what), invariant_(std::move(invariant)) {}

  const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

inline void require(bool ok, const char* invariant, const std::string& what) {
  if (!ok) throw InvariantError(invariant, what);
}

}  // namespace distill
