#pragma once

#include <stdexcept>
#include <string>

namespace zs {

// Invalid user-supplied configuration (board size, hyper-parameter, key).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (e.g. search on a terminal state).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IllegalAction : public std::invalid_argument {
 public:
  IllegalAction(int action, const std::string& detail)
      : std::invalid_argument("illegal action " + std::to_string(action) +
                              ": " + detail),
        action_(action) {}
  int action() const { return action_; }

 private:
  int action_;
};

// Shape or value mismatch in tensors passed to the network.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A stop was requested (SIGINT); on-disk state is resumable.
class Interrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced NaN/Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace zs
