#pragma once

#include <stdexcept>
#include <string>

namespace ido {

// Config / input validation failures. CLI exit code 1.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content (CSV rows, checkpoint headers). CLI exit code 1.
class parse_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem-level failures. CLI exit code 3.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mixture fitting could not produce a usable model.
class fit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was called before the state it needs exists.
class state_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Evaluation preconditions violated (e.g. single-class oracle mask).
class eval_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ido
