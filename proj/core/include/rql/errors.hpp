#ifndef RQL_ERRORS_HPP
#define RQL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rql {

// Tensor or layer received arguments with incompatible shapes. The message
// names the offending axis.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite value (NaN/Inf) was produced. Training steps abort on this
// rather than silently diverging.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad experiment configuration: unknown key, unparsable value, out-of-range
// setting, colliding run id.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replay memory misuse: sampling from an empty memory, stepping past a
// terminal transition, episode longer than the whole capacity.
class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint or CSV file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rql

#endif  // RQL_ERRORS_HPP
