#pragma once

#include <stdexcept>
#include <string>

namespace lorafl {

struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Payload does not fit in one frame at the requested spreading factor.
struct FragmentationRequired : std::invalid_argument {
  explicit FragmentationRequired(const std::string& what) : std::invalid_argument(what) {}
};

struct CodecError : std::runtime_error {
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

// Quadrature or special-function evaluation failed to converge; never return
// garbage silently.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainingDivergence : std::runtime_error {
  explicit TrainingDivergence(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lorafl
