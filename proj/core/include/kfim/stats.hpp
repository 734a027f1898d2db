#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kfim/rmt.hpp"

namespace kfim {

struct Histogram {
  Eigen::VectorXd edges;   // ascending, size bins + 1
  Eigen::VectorXd counts;  // size bins

  Eigen::Index bins() const { return counts.size(); }
  double total() const { return counts.sum(); }
  /// Per-bin probability mass (counts / total).
  Eigen::VectorXd masses() const;
  /// Normalized density per bin (mass / width).
  Eigen::VectorXd densities() const;
};

/// Equal-width histogram spanning the sample range (default policy 100 bins).
Histogram make_histogram(std::span<const double> samples, int bins = 100);

/// Histogram on explicit edges; samples outside [edges.front, edges.back]
/// are ignored.
Histogram make_histogram(std::span<const double> samples,
                         const Eigen::VectorXd& edges);

/// Sum over bins with P > 0 of P log(P/Q) using per-bin masses. Empty Q bins
/// are floored at 1e-12; edges must match exactly.
double kl_divergence(const Histogram& p, const Histogram& q);

/// Extreme-value density in the standardized variable y. Sign convention:
/// shape > 0 is the bounded-tail (Weibull) class, shape < 0 the heavy-tail
/// (Frechet) class, shape = 0 the Gumbel limit. Zero outside the support.
double gev_density(double y, double shape);

/// log of gev_density; -inf outside the support.
double gev_log_density(double y, double shape);

struct GevFit {
  double location = 0.0;
  double scale = 0.0;
  double shape = 0.0;
  double location_err = 0.0;
  double scale_err = 0.0;
  double shape_err = 0.0;
  double log_likelihood = 0.0;
  std::size_t count = 0;
};

/// Maximum-likelihood fit of location/scale/shape by Nelder-Mead simplex,
/// moment-based initialization, errors from the observed information matrix.
/// Needs >= 100 samples; throws ConvergenceError carrying the best point if
/// the simplex stalls.
GevFit fit_gev(std::span<const double> samples);

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;  // standardized third central moment
  std::size_t count = 0;
};

MomentSummary moment_summary(std::span<const double> samples);

/// |model_mean - reference mean| in units of the reference standard
/// deviation (sqrt of the stored variance).
double ratio_R(double model_mean, const TwReference& tw);

/// Fit of value = prefactor * 2^{-L/decay} by linear regression in log2.
struct ScalingFit {
  double prefactor = 0.0;
  double decay = 0.0;
  double prefactor_err = 0.0;
  double decay_err = 0.0;
};

ScalingFit fit_exponential_scaling(
    std::span<const std::pair<double, double>> points);

}  // namespace kfim
