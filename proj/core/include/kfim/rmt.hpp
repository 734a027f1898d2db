#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace kfim {

/// Unit-trace Wishart draw: descending eigenvalues of G G^T / Tr(G G^T) with
/// G a dim x dim real standard-Gaussian matrix.
struct WishartSample {
  int dim = 0;
  Eigen::VectorXd eigenvalues;
};

WishartSample sample_wishart_unit_trace(int dim, std::uint64_t seed);

/// Largest eigenvalue of one Wishart draw, computed by Lanczos on the
/// implicit G G^T products so large dimensions never form the full spectrum.
/// With `unit_trace` the value is divided by Tr(G G^T).
double wishart_largest(int dim, std::uint64_t seed, bool unit_trace);

/// Marchenko-Pastur density for the square case, supported on (0, 4].
double mp_density(double rescaled_eigenvalue);

/// Typical location and fluctuation scale of the unit-trace largest
/// eigenvalue at subsystem dimension D.
struct CenteringConstants {
  double location = 0.0;  // ~ 4/D for large D
  double scale = 0.0;     // ~ 2^{4/3} D^{-5/3}
};
CenteringConstants centering_constants(int dim);

/// (lmax - location) / scale.
double rescale_lambda_max(double lmax, int dim);

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal bands.
struct TridiagonalMatrix {
  Eigen::VectorXd diag;
  Eigen::VectorXd offdiag;  // size diag.size() - 1

  Eigen::Index dim() const { return diag.size(); }
  double trace() const { return diag.sum(); }
};

/// Dumitriu-Edelman beta=1 tridiagonal model whose eigenvalue law matches the
/// square real Wishart ensemble of the same dimension.
TridiagonalMatrix laguerre_tridiagonal(int dim, std::uint64_t seed);

/// Largest eigenvalue via Lanczos on the tridiagonal matvec (tolerance 1e-10,
/// at most 10*dim products). With `trace_normalize` the result is divided by
/// the trace.
double largest_eig_tridiag(const TridiagonalMatrix& t, bool trace_normalize);

/// Reference moments of the limiting largest-eigenvalue distribution for the
/// real ensemble, at the precision used throughout the comparisons here.
struct TwReference {
  double mean = -1.207;
  double variance = 1.608;
  double skewness = 0.293;
};

}  // namespace kfim
