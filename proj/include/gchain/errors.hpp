#pragma once

#include <stdexcept>

namespace gchain {

// Input that violates a documented precondition of an operation.
struct invariant_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed file content or json payload.
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gchain
