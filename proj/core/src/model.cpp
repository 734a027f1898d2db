#include "kfim/model.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <stdexcept>

#include <lapacke.h>

#include "kfim/rng.hpp"

namespace kfim {

namespace {

void check_chain(const ChainParams& p) {
  if (p.sites < 2) throw std::invalid_argument("ChainParams: sites must be >= 2");
  if (p.fields.size() != static_cast<std::size_t>(p.sites))
    throw std::invalid_argument("ChainParams: fields must have one entry per site");
}

}  // namespace

ChainParams ChainParams::self_dual(int sites, std::uint64_t seed) {
  ChainParams p;
  p.sites = sites;
  p.fields = sample_disorder(sites, seed);
  p.seed = seed;
  return p;
}

std::vector<double> sample_disorder(int sites, std::uint64_t seed) {
  if (sites < 2) throw std::invalid_argument("sample_disorder: sites must be >= 2");
  Rng rng(seed);
  std::vector<double> h(sites);
  for (auto& v : h) v = rng.normal();
  return h;
}

void fwht_inplace(StateVector& state) {
  const Eigen::Index n = state.size();
  if (n < 1 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fwht_inplace: length must be a power of 2");
  auto* a = state.data();
  for (Eigen::Index h = 1; h < n; h <<= 1) {
    for (Eigen::Index i = 0; i < n; i += h << 1) {
      for (Eigen::Index j = i; j < i + h; ++j) {
        const std::complex<double> x = a[j];
        const std::complex<double> y = a[j + h];
        a[j] = x + y;
        a[j + h] = x - y;
      }
    }
  }
  state *= 1.0 / std::sqrt(static_cast<double>(n));
}

FloquetOperator::FloquetOperator(ChainParams params) : params_(std::move(params)) {
  check_chain(params_);
  const int L = params_.sites;
  const Eigen::Index dim = params_.dim();
  const std::uint64_t mask = (dim > 1) ? static_cast<std::uint64_t>(dim) - 1 : 0;
  kick_phases_.resize(dim);
  ising_phases_.resize(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const auto bits = static_cast<std::uint64_t>(k);
    const int total_spin = L - 2 * std::popcount(bits);
    kick_phases_[k] = std::polar(1.0, -params_.kick_strength * total_spin);

    // Neighbor disagreements around the ring via a one-bit rotation.
    const std::uint64_t rot = ((bits >> 1) | (bits << (L - 1))) & mask;
    const int bond_sum = L - 2 * std::popcount(bits ^ rot);
    double field_sum = 0.0;
    for (int site = 1; site <= L; ++site)
      field_sum += params_.fields[site - 1] * spin_at(bits, site, L);
    ising_phases_[k] =
        std::polar(1.0, -(params_.ising_coupling * bond_sum + field_sum));
  }
}

void FloquetOperator::apply_inplace(StateVector& state) const {
  if (state.size() != dim())
    throw std::invalid_argument("FloquetOperator: state dimension mismatch");
  fwht_inplace(state);
  state.array() *= kick_phases_.array();
  fwht_inplace(state);
  state.array() *= ising_phases_.array();
}

void FloquetOperator::apply_inverse_inplace(StateVector& state) const {
  if (state.size() != dim())
    throw std::invalid_argument("FloquetOperator: state dimension mismatch");
  state.array() *= ising_phases_.array().conjugate();
  fwht_inplace(state);
  state.array() *= kick_phases_.array().conjugate();
  fwht_inplace(state);
}

StateVector apply_floquet(StateVector state, const ChainParams& params) {
  const FloquetOperator op(params);
  op.apply_inplace(state);
  return state;
}

DenseUnitary build_dense_unitary(const ChainParams& params) {
  check_chain(params);
  if (params.sites > 14)
    throw ResourceLimitError("build_dense_unitary: sites > 14 needs the matrix-free path");
  const FloquetOperator op(params);
  const Eigen::Index dim = op.dim();
  DenseUnitary u(dim, dim);
  StateVector column(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    column.setZero();
    column[j] = 1.0;
    op.apply_inplace(column);
    u.col(j) = column;
  }
  return u;
}

DenseUnitary sample_haar_unitary(int dim, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("sample_haar_unitary: dim must be >= 2");
  Rng rng(seed);
  DenseUnitary q(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) q(i, j) = rng.complex_normal();

  const auto n = static_cast<lapack_int>(dim);
  Eigen::VectorXcd tau(dim);
  auto* data = reinterpret_cast<lapack_complex_double*>(q.data());
  if (LAPACKE_zgeqrf(LAPACK_COL_MAJOR, n, n, data, n,
                     reinterpret_cast<lapack_complex_double*>(tau.data())) != 0)
    throw std::runtime_error("sample_haar_unitary: zgeqrf failed");
  // Fix the gauge so Q is Haar rather than QR-convention biased.
  Eigen::VectorXcd phase(dim);
  for (Eigen::Index j = 0; j < dim; ++j) phase[j] = q(j, j) / std::abs(q(j, j));
  if (LAPACKE_zungqr(LAPACK_COL_MAJOR, n, n, n, data, n,
                     reinterpret_cast<lapack_complex_double*>(tau.data())) != 0)
    throw std::runtime_error("sample_haar_unitary: zungqr failed");
  q = q * phase.asDiagonal();
  return q;
}

DenseUnitary sample_coe(int dim, std::uint64_t seed) {
  DenseUnitary w = sample_haar_unitary(dim, seed);
  return w.transpose() * w;
}

double unitarity_error(const DenseUnitary& u) {
  DenseUnitary gram = u.adjoint() * u;
  gram.diagonal().array() -= 1.0;
  return gram.cwiseAbs().maxCoeff();
}

}  // namespace kfim
