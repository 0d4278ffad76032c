#pragma once

#include <stdexcept>
#include <string>

namespace tdoaloc {

// Bad user-supplied input: malformed files, invalid configuration, degenerate
// geometry. The CLI maps these to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while processing otherwise valid input. The CLI maps these to
// exit code 3.
class ProcessingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tdoaloc
