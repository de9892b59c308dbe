// Exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace dwm {

// Construction-time contract violation: bad probabilities, shapes, parameters.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// An exhaustive enumeration or state-space expansion would exceed its cap.
class EnumerationGuardError : public std::runtime_error {
 public:
  explicit EnumerationGuardError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solver hit its sweep cap before reaching tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// An observation with zero predictive probability was fed into a model.
class ModelMismatchError : public std::runtime_error {
 public:
  explicit ModelMismatchError(const std::string& what) : std::runtime_error(what) {}
};

// A non-finite value surfaced where the numerics guarantee finiteness.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dwm
