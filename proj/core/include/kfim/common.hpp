#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kfim {

inline constexpr double pi = std::numbers::pi;

/// Requested dense computation exceeds the configured memory guard.
class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative routine stopped before reaching its tolerance. The message
/// carries the best estimate reached.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best)
      : std::runtime_error(what), best_estimate(best) {}
  double best_estimate;
};

/// Maps a phase to the principal interval [-pi, pi).
inline double wrap_phase(double phi) {
  phi = std::remainder(phi, 2.0 * pi);  // (-pi, pi]
  if (phi == pi) phi = -pi;
  return phi;
}

/// Absolute circular distance between two phases, in [0, pi].
inline double phase_distance(double a, double b) {
  return std::abs(std::remainder(a - b, 2.0 * pi));
}

}  // namespace kfim
