#pragma once

#include <stdexcept>
#include <string>

namespace cclc {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor extents do not line up for the requested operation.
struct shape_error : error {
  using error::error;
};

// An argument violates an operation's stated precondition
// (k out of range, nonpositive log input, all-zero labels, ...).
struct value_error : error {
  using error::error;
};

// Bad run configuration or command usage. CLI exit code 2.
struct config_error : error {
  using error::error;
};

// Corpus or resource files are missing or malformed. CLI exit code 3.
struct data_error : error {
  using error::error;
};

// Checkpoint files are missing, corrupt, or incompatible. CLI exit code 4.
struct checkpoint_error : error {
  using error::error;
};

}  // namespace cclc
