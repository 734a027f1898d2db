#pragma once

#include <Eigen/Dense>

#include "kfim/model.hpp"

namespace kfim {

/// Half-chain Schmidt spectrum: descending, nonnegative, unit sum.
struct SchmidtSpectrum {
  int subsystem_dim = 0;     // 2^{sites/2}
  Eigen::VectorXd values;
};

/// Reshapes a pure state into the 2^{L/2} x 2^{L/2} coefficient matrix; rows
/// index the first half of the chain (most significant bits). Even L only.
Eigen::MatrixXcd coefficient_matrix(const StateVector& state, int sites);

/// Squared singular values of the coefficient matrix, sorted descending.
/// Computed from the SVD rather than forming C C^dagger.
SchmidtSpectrum schmidt_spectrum(const StateVector& state, int sites);

/// Rescaled spectrum D * lambda_j (sums to D).
Eigen::VectorXd rescaled_spectrum(const SchmidtSpectrum& spectrum);

/// Largest Schmidt coefficient; in [1/D, 1].
double lambda_max(const SchmidtSpectrum& spectrum);

}  // namespace kfim
