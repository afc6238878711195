#pragma once

#include <stdexcept>
#include <string>

namespace riskval {

/// Invalid arguments: malformed distributions, out-of-range parameters, shape mismatches.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model violates a structural invariant (e.g. an MDP that is not layered).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exact oracle was asked to enumerate more than its guard allows.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A learner produced a non-finite value.
class NumericDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Should be unreachable for finite inputs.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace riskval
