#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "kfim/common.hpp"

namespace kfim {

using StateVector = Eigen::VectorXcd;
using DenseUnitary = Eigen::MatrixXcd;

// Basis convention shared by every module: the amplitude index of a basis
// state packs site 1 into the most significant bit of the L-bit index, and a
// bit value of 0 means spin up (sigma^z eigenvalue +1).
inline int spin_at(std::uint64_t basis_index, int site, int sites) {
  return ((basis_index >> (sites - site)) & 1ULL) ? -1 : +1;
}

/// One kicked-chain realization: couplings, longitudinal fields, seed.
struct ChainParams {
  int sites = 0;
  double ising_coupling = pi / 4;
  double kick_strength = pi / 4;
  std::vector<double> fields;  // length == sites
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return Eigen::Index(1) << sites; }

  /// Maximally chaotic point with Gaussian disorder drawn from `seed`.
  static ChainParams self_dual(int sites, std::uint64_t seed);
};

/// Length-`sites` vector of i.i.d. standard normal fields; deterministic in
/// the seed.
std::vector<double> sample_disorder(int sites, std::uint64_t seed);

/// Orthonormal Walsh-Hadamard transform (involutive, norm preserving).
void fwht_inplace(StateVector& state);

// One driving period, applied matrix-free: a Hadamard sandwich turns the kick
// into a diagonal phase, so both factors act as precomputed diagonals.
class FloquetOperator {
 public:
  explicit FloquetOperator(ChainParams params);

  void apply_inplace(StateVector& state) const;
  void apply_inverse_inplace(StateVector& state) const;
  StateVector apply(StateVector state) const {
    apply_inplace(state);
    return state;
  }

  const ChainParams& params() const { return params_; }
  Eigen::Index dim() const { return kick_phases_.size(); }

 private:
  ChainParams params_;
  Eigen::VectorXcd kick_phases_;   // exp(-i b sum_i s_i) in the Hadamard basis
  Eigen::VectorXcd ising_phases_;  // exp(-i (J sum s_i s_{i+1} + sum h_i s_i))
};

/// Single application without keeping the operator around.
StateVector apply_floquet(StateVector state, const ChainParams& params);

/// Materializes the one-period unitary column by column. Guarded to
/// sites <= 14; larger chains must stay matrix-free.
DenseUnitary build_dense_unitary(const ChainParams& params);

/// Haar-distributed unitary via QR of a complex Ginibre matrix with the
/// R-diagonal phase correction.
DenseUnitary sample_haar_unitary(int dim, std::uint64_t seed);

/// Circular orthogonal ensemble draw W^T W (unitary and symmetric).
DenseUnitary sample_coe(int dim, std::uint64_t seed);

/// max |(U^dagger U - I)_{jk}|, the unitarity defect.
double unitarity_error(const DenseUnitary& u);

}  // namespace kfim
