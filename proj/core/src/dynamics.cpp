#include "kfim/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "kfim/rng.hpp"

namespace kfim {

namespace {

Eigen::VectorXd sigma_z_signs(int site, int sites) {
  if (site < 1 || site > sites)
    throw std::invalid_argument("sigma_z: site out of range");
  const Eigen::Index dim = Eigen::Index(1) << sites;
  const int bit = sites - site;
  Eigen::VectorXd signs(dim);
  for (Eigen::Index k = 0; k < dim; ++k)
    signs[k] = ((static_cast<std::uint64_t>(k) >> bit) & 1ULL) ? -1.0 : 1.0;
  return signs;
}

}  // namespace

void apply_sigma_z(StateVector& state, int site, int sites) {
  if (site < 1 || site > sites)
    throw std::invalid_argument("apply_sigma_z: site out of range");
  if (state.size() != (Eigen::Index(1) << sites))
    throw std::invalid_argument("apply_sigma_z: state dimension mismatch");
  const int bit = sites - site;
  for (Eigen::Index k = 0; k < state.size(); ++k)
    if ((static_cast<std::uint64_t>(k) >> bit) & 1ULL) state[k] = -state[k];
}

ObservableElements observable_elements(const EigenpairSet& eigs, int site,
                                       int sites) {
  const Eigen::Index dim = Eigen::Index(1) << sites;
  if (eigs.vectors.rows() != dim)
    throw std::invalid_argument("observable_elements: dimension mismatch");
  const Eigen::VectorXd signs = sigma_z_signs(site, sites);
  const Eigen::MatrixXcd m =
      eigs.vectors.adjoint() * (signs.asDiagonal() * eigs.vectors);

  ObservableElements out;
  out.diagonal = m.diagonal().real();
  const Eigen::Index n = m.rows();
  out.offdiag_magnitudes.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b)
      out.offdiag_magnitudes.push_back(std::abs(m(a, b)));
  return out;
}

GapStats diagonal_gap_stats(std::span<const double> phase_sorted_diagonal) {
  if (phase_sorted_diagonal.size() < 2)
    throw std::invalid_argument("diagonal_gap_stats: needs at least 2 values");
  GapStats stats;
  stats.count = phase_sorted_diagonal.size() - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < phase_sorted_diagonal.size(); ++i) {
    const double gap =
        std::abs(phase_sorted_diagonal[i + 1] - phase_sorted_diagonal[i]);
    sum += gap;
    stats.max_gap = std::max(stats.max_gap, gap);
  }
  stats.mean_gap = sum / static_cast<double>(stats.count);
  return stats;
}

double offdiag_fluctuation(std::span<const double> magnitudes) {
  if (magnitudes.empty()) return 0.0;
  double ssq = 0.0;
  for (const double m : magnitudes) ssq += m * m;
  return std::sqrt(ssq / static_cast<double>(magnitudes.size()));
}

EthRecord eth_record(const EigenpairSet& eigs, int sites) {
  EthRecord rec;
  rec.sites = sites;
  rec.site = center_site(sites);
  rec.phases = eigs.phases;
  const ObservableElements obs = observable_elements(eigs, rec.site, sites);
  rec.diagonal = obs.diagonal;
  rec.gaps = diagonal_gap_stats(
      std::span<const double>(obs.diagonal.data(), obs.diagonal.size()));
  rec.offdiag_rms = offdiag_fluctuation(obs.offdiag_magnitudes);
  rec.offdiag_count = obs.offdiag_magnitudes.size();
  return rec;
}

CorrelationSeries autocorrelation(const UnitaryApply& step, double phase,
                                  const StateVector& eigenstate, int t_max,
                                  int site, int sites,
                                  double residue_tolerance) {
  if (t_max < 0) throw std::invalid_argument("autocorrelation: t_max < 0");
  const double r = residue(step, eigenstate, phase);
  if (r > residue_tolerance)
    throw std::invalid_argument(
        "autocorrelation: input is not an eigenstate (residue " +
        std::to_string(r) + ")");

  StateVector flipped = eigenstate;
  apply_sigma_z(flipped, site, sites);

  CorrelationSeries series;
  series.times.resize(t_max + 1);
  series.values.resize(t_max + 1);
  series.times[0] = 0;
  series.values[0] = flipped.squaredNorm();  // = 1 for a unit state
  StateVector w = flipped;
  for (int t = 1; t <= t_max; ++t) {
    step(w);
    series.times[t] = t;
    series.values[t] = std::polar(1.0, -phase * t) * flipped.dot(w);
  }
  return series;
}

CorrelationSeries autocorrelation(const ChainParams& params, double phase,
                                  const StateVector& eigenstate, int t_max) {
  const FloquetOperator op(params);
  const UnitaryApply step = [&op](StateVector& s) { op.apply_inplace(s); };
  return autocorrelation(step, phase, eigenstate, t_max, params.sites,
                         params.sites);
}

namespace {

CorrelationSeries otoc_stochastic(const FloquetOperator& op, int site,
                                  const OtocOptions& options) {
  const int sites = op.params().sites;
  const Eigen::Index dim = op.dim();
  CorrelationSeries series;
  series.times.resize(options.t_max + 1);
  series.values.assign(options.t_max + 1, 0.0);
  for (int t = 0; t <= options.t_max; ++t) series.times[t] = t;

  for (int p = 0; p < options.probes; ++p) {
    Rng rng(derive_seed(options.probe_seed, p));
    StateVector z(dim);
    for (Eigen::Index i = 0; i < dim; ++i) z[i] = rng.complex_normal();
    z.normalize();
    for (int t = 1; t <= options.t_max; ++t) {
      StateVector w = z;
      for (int half = 0; half < 2; ++half) {
        apply_sigma_z(w, site, sites);
        for (int s = 0; s < t; ++s) op.apply_inplace(w);
        apply_sigma_z(w, site, sites);
        for (int s = 0; s < t; ++s) op.apply_inverse_inplace(w);
      }
      series.values[t] += z.dot(w);
    }
  }
  // values currently hold probe-averaged F(t); convert to 2(1 - Re F).
  for (int t = 1; t <= options.t_max; ++t) {
    const std::complex<double> f = series.values[t] / double(options.probes);
    series.values[t] = 2.0 * (1.0 - f.real());
  }
  series.values[0] = 0.0;  // [O, O] vanishes identically
  return series;
}

}  // namespace

CorrelationSeries otoc(const ChainParams& params, const OtocOptions& options) {
  if (params.sites > 12 && !options.stochastic_trace)
    throw ResourceLimitError(
        "otoc: sites > 12 requires the stochastic trace estimator");
  if (options.stochastic_trace) {
    const FloquetOperator op(params);
    return otoc_stochastic(op, center_site(params.sites), options);
  }
  return otoc_dense_unitary(build_dense_unitary(params),
                            center_site(params.sites), params.sites,
                            options.t_max);
}

CorrelationSeries otoc_dense_unitary(const DenseUnitary& u, int site, int sites,
                                     int t_max) {
  const Eigen::Index dim = Eigen::Index(1) << sites;
  if (u.rows() != dim || u.cols() != dim)
    throw std::invalid_argument("otoc_dense_unitary: dimension mismatch");
  if (sites > 12)
    throw ResourceLimitError("otoc_dense_unitary: sites > 12");

  const EigenpairSet eigs = dense_eig(u);
  const Eigen::VectorXd signs = sigma_z_signs(site, sites);
  // Observable in the eigenbasis; Heisenberg evolution is then an
  // element-wise phase twist A_t = diag(e^{i phi t}) A diag(e^{-i phi t}).
  const Eigen::MatrixXcd a =
      eigs.vectors.adjoint() * (signs.asDiagonal() * eigs.vectors);

  CorrelationSeries series;
  series.times.resize(t_max + 1);
  series.values.assign(t_max + 1, 0.0);
  series.times[0] = 0;
  series.values[0] = 0.0;  // [O, O] vanishes identically

  Eigen::VectorXcd twist(dim);
  Eigen::MatrixXcd at(dim, dim), prod(dim, dim);
  for (int t = 1; t <= t_max; ++t) {
    series.times[t] = t;
    for (Eigen::Index j = 0; j < dim; ++j)
      twist[j] = std::polar(1.0, eigs.phases[j] * t);
    at = twist.asDiagonal() * a * twist.conjugate().asDiagonal();
    prod.noalias() = at * a;
    // -<[A(t), A]^2> = 2 (1 - Tr((A_t A)^2)/dim) for an involution A.
    const std::complex<double> f =
        (prod.array() * prod.transpose().array()).sum() / double(dim);
    series.values[t] = 2.0 * (1.0 - f.real());
  }
  return series;
}

}  // namespace kfim
