#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kfim/spectral.hpp"

namespace kfim {

/// sigma^z at `site` applied in place (sign flip on the site bit).
void apply_sigma_z(StateVector& state, int site, int sites);

/// Center site used for the local observable: L/2 for even L, (L+1)/2 odd.
inline int center_site(int sites) { return (sites + 1) / 2; }

/// Matrix elements of sigma^z_site in an eigenpair window: diagonal values in
/// phase order and |off-diagonal| magnitudes for all unordered pairs.
struct ObservableElements {
  Eigen::VectorXd diagonal;
  std::vector<double> offdiag_magnitudes;
};

ObservableElements observable_elements(const EigenpairSet& eigs, int site,
                                       int sites);

struct GapStats {
  double mean_gap = 0.0;
  double max_gap = 0.0;
  std::size_t count = 0;  // number of consecutive gaps
};

/// Consecutive |differences| of diagonal elements in eigenphase order.
GapStats diagonal_gap_stats(std::span<const double> phase_sorted_diagonal);

/// Root mean square of |off-diagonal| magnitudes.
double offdiag_fluctuation(std::span<const double> magnitudes);

/// Per-window matrix-element statistics for the center-site observable.
struct EthRecord {
  int sites = 0;
  int site = 0;
  Eigen::VectorXd phases;
  Eigen::VectorXd diagonal;
  GapStats gaps;
  double offdiag_rms = 0.0;
  std::size_t offdiag_count = 0;
};

EthRecord eth_record(const EigenpairSet& eigs, int sites);

struct CorrelationSeries {
  std::vector<int> times;
  std::vector<std::complex<double>> values;
  int ensemble_count = 1;
};

/// Spin-spin autocorrelation of sigma^z at `site` for an eigenstate with the
/// given eigenphase, evaluated matrix-free through `step` (one application of
/// the unitary). The eigenstate is residue-checked before any evolution.
CorrelationSeries autocorrelation(const UnitaryApply& step, double phase,
                                  const StateVector& eigenstate, int t_max,
                                  int site, int sites,
                                  double residue_tolerance = 1e-10);

/// Chain version: observable at the last site.
CorrelationSeries autocorrelation(const ChainParams& params, double phase,
                                  const StateVector& eigenstate, int t_max);

struct OtocOptions {
  int t_max = 20;
  bool stochastic_trace = false;  // required for sites > 12
  int probes = 16;
  std::uint64_t probe_seed = 1;
};

/// Squared-commutator correlator of the center-site sigma^z in the
/// infinite-temperature state, reported with the positive sign convention
/// -<[O(t), O]^2> so the series grows from 0 and saturates.
CorrelationSeries otoc(const ChainParams& params, const OtocOptions& options);

/// Dense evaluation for an arbitrary unitary (used for reference ensembles).
CorrelationSeries otoc_dense_unitary(const DenseUnitary& u, int site, int sites,
                                     int t_max);

}  // namespace kfim
