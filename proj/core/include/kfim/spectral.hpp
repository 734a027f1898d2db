#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "kfim/model.hpp"

namespace kfim {

/// In-place application of a unitary to a state buffer.
using UnitaryApply = std::function<void(StateVector&)>;

/// Eigenpairs of a unitary near a target eigenphase, phase-sorted ascending.
struct EigenpairSet {
  Eigen::VectorXd phases;      // in [-pi, pi)
  Eigen::MatrixXcd vectors;    // unit-norm columns
  Eigen::VectorXd residues;    // ||U v - e^{i phi} v||
  double target_phase = 0.0;
  bool truncated = false;      // fewer pairs survived than were requested

  Eigen::Index size() const { return phases.size(); }
};

/// Polynomial filter parameters for interior extraction.
struct FilterSpec {
  int order = 1;                     // polynomial degree kappa
  int krylov_dim = 2;
  double target_phase = pi / 2;
  double residue_threshold = 1e-10;
};

/// Production filter for a chain of `sites` spins:
/// order = floor(0.8 * 2^{sites/2}), krylov_dim = floor(2^{sites/2 + 2}).
FilterSpec default_filter_spec(int sites);

/// All eigenpairs of a dense unitary via the Schur form (the Schur basis of a
/// normal matrix is an orthonormal eigenbasis). Guarded to dim <= 2^14.
EigenpairSet dense_eig(const DenseUnitary& u);

/// (1/(kappa+1)) sum_{m=0}^{kappa} e^{-i m phi} U^m |state>, the band-pass
/// filter centered on spec.target_phase.
StateVector filtered_apply(const StateVector& state, const UnitaryApply& apply_u,
                           const FilterSpec& spec);

struct ArnoldiResult {
  Eigen::MatrixXcd basis;       // orthonormal columns
  Eigen::MatrixXcd hessenberg;  // square projection, basis^H Op basis
  bool breakdown = false;
};

/// Arnoldi iteration with classical Gram-Schmidt, repeated once when
/// `reorthogonalize` is set. Breakdown (next vector norm < 1e-14) returns the
/// truncated factorization with the flag set.
ArnoldiResult arnoldi(const UnitaryApply& op, Eigen::Index dim, int krylov_dim,
                      const StateVector& start, bool reorthogonalize = true);

/// ||U v - e^{i phase} v||.
double residue(const UnitaryApply& apply_u, const StateVector& v, double phase);

/// Interior eigenpairs of a unitary given matrix-free access: Arnoldi on the
/// polynomial filter, Rayleigh-quotient phases against U itself, residue
/// screening, and selection of `count` pairs closest to the target phase.
EigenpairSet polfed(const UnitaryApply& apply_u, Eigen::Index dim,
                    const FilterSpec& spec, int count, std::uint64_t start_seed);

/// POLFED on a kicked-chain realization (start vector seeded from params.seed).
EigenpairSet polfed(const ChainParams& params, const FilterSpec& spec, int count);

}  // namespace kfim
