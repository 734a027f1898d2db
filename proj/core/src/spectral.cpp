#include "kfim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <lapacke.h>

#include "kfim/rng.hpp"

namespace kfim {

FilterSpec default_filter_spec(int sites) {
  if (sites < 8)
    throw std::invalid_argument("default_filter_spec: needs sites >= 8");
  FilterSpec spec;
  spec.order = static_cast<int>(std::floor(0.8 * std::exp2(0.5 * sites)));
  spec.krylov_dim = static_cast<int>(std::floor(std::exp2(0.5 * sites + 2.0)));
  spec.target_phase = pi / 2;
  spec.residue_threshold = 1e-10;
  return spec;
}

EigenpairSet dense_eig(const DenseUnitary& u) {
  const Eigen::Index dim = u.rows();
  if (dim != u.cols() || dim < 1)
    throw std::invalid_argument("dense_eig: matrix must be square");
  if (dim > (Eigen::Index(1) << 14))
    throw ResourceLimitError("dense_eig: dim > 2^14");
  if (unitarity_error(u) > 1e-10)
    throw std::invalid_argument("dense_eig: input is not unitary");

  DenseUnitary t = u;  // overwritten with the Schur form
  Eigen::VectorXcd w(dim);
  DenseUnitary q(dim, dim);
  lapack_int sdim = 0;
  const lapack_int info = LAPACKE_zgees(
      LAPACK_COL_MAJOR, 'V', 'N', nullptr, static_cast<lapack_int>(dim),
      reinterpret_cast<lapack_complex_double*>(t.data()),
      static_cast<lapack_int>(dim), &sdim,
      reinterpret_cast<lapack_complex_double*>(w.data()),
      reinterpret_cast<lapack_complex_double*>(q.data()),
      static_cast<lapack_int>(dim));
  if (info != 0) throw std::runtime_error("dense_eig: zgees failed");

  // For a unitary (normal) input the Schur form is diagonal up to roundoff;
  // the residue of Schur vector i is the norm of the strict upper part of
  // column i.
  Eigen::VectorXd phases(dim), residues(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    phases[i] = wrap_phase(std::arg(w[i]));
    residues[i] = (i > 0) ? t.col(i).head(i).norm() : 0.0;
  }

  std::vector<Eigen::Index> order(dim);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return phases[a] < phases[b]; });

  EigenpairSet out;
  out.phases.resize(dim);
  out.vectors.resize(dim, dim);
  out.residues.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    out.phases[i] = phases[order[i]];
    out.vectors.col(i) = q.col(order[i]);
    out.residues[i] = residues[order[i]];
  }
  return out;
}

StateVector filtered_apply(const StateVector& state, const UnitaryApply& apply_u,
                           const FilterSpec& spec) {
  StateVector acc = state;
  StateVector v = state;
  const std::complex<double> step = std::polar(1.0, -spec.target_phase);
  std::complex<double> coeff = 1.0;
  for (int m = 1; m <= spec.order; ++m) {
    apply_u(v);
    coeff *= step;
    acc += coeff * v;
  }
  return acc / static_cast<double>(spec.order + 1);
}

ArnoldiResult arnoldi(const UnitaryApply& op, Eigen::Index dim, int krylov_dim,
                      const StateVector& start, bool reorthogonalize) {
  if (krylov_dim < 1 || krylov_dim > dim)
    throw std::invalid_argument("arnoldi: krylov_dim out of range");
  if (start.size() != dim)
    throw std::invalid_argument("arnoldi: start vector dimension mismatch");

  ArnoldiResult result;
  Eigen::MatrixXcd q(dim, krylov_dim);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(krylov_dim, krylov_dim);
  q.col(0) = start / start.norm();

  Eigen::Index m = krylov_dim;
  for (Eigen::Index j = 0; j < krylov_dim; ++j) {
    StateVector w = q.col(j);
    op(w);
    const auto basis = q.leftCols(j + 1);
    Eigen::VectorXcd proj = basis.adjoint() * w;
    w.noalias() -= basis * proj;
    if (reorthogonalize) {
      const Eigen::VectorXcd correction = basis.adjoint() * w;
      w.noalias() -= basis * correction;
      proj += correction;
    }
    h.col(j).head(j + 1) = proj;
    const double beta = w.norm();
    if (j + 1 < krylov_dim) {
      if (beta < 1e-14) {
        result.breakdown = true;
        m = j + 1;
        break;
      }
      h(j + 1, j) = beta;
      q.col(j + 1) = w / beta;
    }
  }

  result.basis = q.leftCols(m);
  result.hessenberg = h.topLeftCorner(m, m);
  return result;
}

double residue(const UnitaryApply& apply_u, const StateVector& v, double phase) {
  StateVector w = v;
  apply_u(w);
  w -= std::polar(1.0, phase) * v;
  return w.norm();
}

EigenpairSet polfed(const UnitaryApply& apply_u, Eigen::Index dim,
                    const FilterSpec& spec, int count, std::uint64_t start_seed) {
  if (spec.order < 1 || spec.krylov_dim < 2)
    throw std::invalid_argument("polfed: invalid filter spec");
  if (count < 1 || count > spec.krylov_dim / 2)
    throw std::invalid_argument("polfed: count must be in [1, krylov_dim/2]");

  Rng rng(start_seed);
  StateVector start(dim);
  for (Eigen::Index i = 0; i < dim; ++i) start[i] = rng.complex_normal();
  start.normalize();

  const UnitaryApply filtered = [&](StateVector& s) {
    s = filtered_apply(s, apply_u, spec);
  };
  const ArnoldiResult arn = arnoldi(filtered, dim, spec.krylov_dim, start, true);

  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(arn.hessenberg);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("polfed: Hessenberg eigensolve failed");
  Eigen::MatrixXcd ritz = arn.basis * es.eigenvectors();

  const Eigen::Index n = ritz.cols();
  Eigen::VectorXd phases(n), residues(n);
  StateVector w(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    ritz.col(i).normalize();
    w = ritz.col(i);
    apply_u(w);
    // Rayleigh quotient against U itself; the filter spectrum is many-to-one.
    phases[i] = wrap_phase(std::arg(ritz.col(i).dot(w)));
    residues[i] = (w - std::polar(1.0, phases[i]) * ritz.col(i)).norm();
  }

  std::vector<Eigen::Index> good;
  for (Eigen::Index i = 0; i < n; ++i)
    if (residues[i] <= spec.residue_threshold) good.push_back(i);
  std::sort(good.begin(), good.end(), [&](Eigen::Index a, Eigen::Index b) {
    return phase_distance(phases[a], spec.target_phase) <
           phase_distance(phases[b], spec.target_phase);
  });

  const Eigen::Index kept = std::min<Eigen::Index>(count, good.size());
  std::vector<Eigen::Index> selected(good.begin(), good.begin() + kept);
  std::sort(selected.begin(), selected.end(), [&](Eigen::Index a, Eigen::Index b) {
    return phases[a] < phases[b];
  });

  EigenpairSet out;
  out.target_phase = spec.target_phase;
  out.truncated = kept < count;
  out.phases.resize(kept);
  out.vectors.resize(dim, kept);
  out.residues.resize(kept);
  for (Eigen::Index i = 0; i < kept; ++i) {
    out.phases[i] = phases[selected[i]];
    out.vectors.col(i) = ritz.col(selected[i]);
    out.residues[i] = residues[selected[i]];
  }
  return out;
}

EigenpairSet polfed(const ChainParams& params, const FilterSpec& spec, int count) {
  const FloquetOperator op(params);
  const UnitaryApply apply_u = [&op](StateVector& s) { op.apply_inplace(s); };
  return polfed(apply_u, op.dim(), spec, count,
                derive_seed(params.seed, 0x706f6c666564ULL));  // start-vector stream
}

}  // namespace kfim
