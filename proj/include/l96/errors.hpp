#pragma once

#include <stdexcept>
#include <string>

namespace l96 {

// Invalid input: wrong dimensions, out-of-range parameters, malformed config.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure during a run: blow-up, non-finite values, singular systems.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trajectory left the overflow guard. `time` is the last time with a valid state.
class BlowUpError : public NumericalError {
 public:
  BlowUpError(const std::string& what, double time)
      : NumericalError(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace l96
