#pragma once

#include <stdexcept>
#include <string>

namespace rscusum {

// Bad caller-supplied data: dimension mismatches, empty sample sets,
// malformed configs. Maps to CLI exit code 1.
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// API misuse (e.g. stepping a stopped detector). Maps to CLI exit code 1.
struct usage_error : std::logic_error {
  using std::logic_error::logic_error;
};

// Arithmetic went bad at runtime: overflow, non-finite results, failed
// factorizations. Maps to CLI exit code 2.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Statistical estimation could not produce a value (e.g. every trial
// false-alarmed before the change point). Maps to CLI exit code 2.
struct estimation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimizer diverged (NaN loss). Carries epoch and learning rate in the
// message. Maps to CLI exit code 2.
struct training_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failures, surfaced with the offending path. Maps to CLI exit
// code 2.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rscusum
