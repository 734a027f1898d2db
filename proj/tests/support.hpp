#pragma once

// Test-side oracles and helpers, kept independent of the library's fast
// paths so they can serve as references.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <utility>
#include <vector>

#include "kfim/model.hpp"
#include "kfim/rng.hpp"
#include "kfim/spectral.hpp"

namespace kfim::testing {

// Dense one-period unitary straight from the Hamiltonian definition: a
// diagonal bond/field phase matrix times the Kronecker power of the
// single-site kick rotation. No Hadamard transforms anywhere.
inline DenseUnitary oracle_unitary(const ChainParams& p) {
  const Eigen::Index dim = p.dim();
  const int L = p.sites;

  Eigen::MatrixXcd kick(2, 2);
  const double b = p.kick_strength;
  const std::complex<double> off(0, -std::sin(b));
  kick << std::cos(b), off, off, std::cos(b);
  Eigen::MatrixXcd ux = Eigen::MatrixXcd::Identity(1, 1);
  for (int i = 0; i < L; ++i) {
    Eigen::MatrixXcd next(ux.rows() * 2, ux.cols() * 2);
    next << kick(0, 0) * ux, kick(0, 1) * ux, kick(1, 0) * ux, kick(1, 1) * ux;
    ux = std::move(next);
  }

  Eigen::VectorXcd uz(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    double e = 0.0;
    for (int site = 1; site <= L; ++site) {
      const int next_site = site % L + 1;
      e += p.ising_coupling * spin_at(k, site, L) * spin_at(k, next_site, L);
      e += p.fields[site - 1] * spin_at(k, site, L);
    }
    uz[k] = std::polar(1.0, -e);
  }
  return uz.asDiagonal() * ux;
}

inline StateVector random_state(Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  StateVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.complex_normal();
  v.normalize();
  return v;
}

/// `count` pairs closest to `target`, re-sorted by phase.
inline EigenpairSet window_near(const EigenpairSet& all, double target,
                                int count) {
  std::vector<Eigen::Index> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return phase_distance(all.phases[a], target) <
           phase_distance(all.phases[b], target);
  });
  order.resize(std::min<std::size_t>(count, order.size()));
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return all.phases[a] < all.phases[b];
  });
  EigenpairSet out;
  out.target_phase = target;
  out.phases.resize(order.size());
  out.vectors.resize(all.vectors.rows(), order.size());
  out.residues.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.phases[i] = all.phases[order[i]];
    out.vectors.col(i) = all.vectors.col(order[i]);
    out.residues[i] = all.residues[order[i]];
  }
  return out;
}

/// Inverse-CDF sampler for the extreme-value law (paper sign convention);
/// the oracle counterpart of the fitted density.
inline double gev_quantile(double u, double shape) {
  if (shape == 0.0) return -std::log(-std::log(u));
  return (1.0 - std::pow(-std::log(u), shape)) / shape;
}

}  // namespace kfim::testing
