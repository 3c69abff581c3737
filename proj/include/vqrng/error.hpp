#pragma once

#include <stdexcept>
#include <string>

namespace vqrng {

// Single exception type for contract violations, malformed inputs and I/O
// failures. Messages are stable; tests match on substrings.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vqrng
