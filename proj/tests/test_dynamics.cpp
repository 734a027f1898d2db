#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "kfim/dynamics.hpp"
#include "kfim/model.hpp"
#include "kfim/rng.hpp"
#include "kfim/spectral.hpp"
#include "support.hpp"

using namespace kfim;
using testing::window_near;
using cd = std::complex<double>;

TEST_CASE("observable matrix elements") {
  SUBCASE("computational basis eigenvectors") {
    EigenpairSet basis;
    const int sites = 4;
    const Eigen::Index dim = 16;
    basis.phases = Eigen::VectorXd::LinSpaced(dim, -3.0, 3.0);
    basis.vectors = Eigen::MatrixXcd::Identity(dim, dim);
    basis.residues = Eigen::VectorXd::Zero(dim);
    const int site = 2;
    const ObservableElements obs = observable_elements(basis, site, sites);
    for (Eigen::Index k = 0; k < dim; ++k)
      CHECK(obs.diagonal[k] == doctest::Approx(spin_at(k, site, sites)));
    for (const double m : obs.offdiag_magnitudes) CHECK(m == 0.0);
  }

  SUBCASE("full-spectrum identities on a dense run") {
    const ChainParams p = ChainParams::self_dual(6, 9);
    const EigenpairSet eigs = dense_eig(build_dense_unitary(p));
    const int site = center_site(6);
    const ObservableElements obs = observable_elements(eigs, site, 6);
    // operator norm bound
    CHECK(obs.diagonal.maxCoeff() <= 1.0 + 1e-12);
    CHECK(obs.diagonal.minCoeff() >= -1.0 - 1e-12);
    // traceless observable: diagonal sums to zero exactly up to roundoff
    CHECK(std::abs(obs.diagonal.sum()) < 1e-10);
    // hermiticity + involution: row sums of |elements|^2 equal 1
    const Eigen::Index dim = eigs.size();
    Eigen::VectorXd row_sums = obs.diagonal.array().square();
    Eigen::Index pair = 0;
    for (Eigen::Index a = 0; a < dim; ++a)
      for (Eigen::Index b = a + 1; b < dim; ++b) {
        const double m2 = obs.offdiag_magnitudes[pair] * obs.offdiag_magnitudes[pair];
        row_sums[a] += m2;
        row_sums[b] += m2;
        ++pair;
      }
    for (Eigen::Index a = 0; a < dim; ++a)
      CHECK(std::abs(row_sums[a] - 1.0) < 1e-10);
  }
}

TEST_CASE("diagonal gap statistics") {
  const std::vector<double> constant{0.4, 0.4, 0.4};
  const GapStats flat = diagonal_gap_stats(constant);
  CHECK(flat.mean_gap == 0.0);
  CHECK(flat.max_gap == 0.0);

  const std::vector<double> three{0.0, 1.0, -1.0};
  const GapStats g = diagonal_gap_stats(three);
  CHECK(g.mean_gap == doctest::Approx(1.5));
  CHECK(g.max_gap == 2.0);
  CHECK(g.count == 2);

  CHECK_THROWS_AS(diagonal_gap_stats(std::vector<double>{1.0}),
                  std::invalid_argument);
}

TEST_CASE("off-diagonal fluctuation") {
  CHECK(offdiag_fluctuation(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(offdiag_fluctuation(std::vector<double>{0.5}) == doctest::Approx(0.5));
  CHECK(offdiag_fluctuation(std::vector<double>{3.0, 4.0}) ==
        doctest::Approx(std::sqrt(12.5)));
}

TEST_CASE("autocorrelation") {
  const ChainParams p = ChainParams::self_dual(8, 33);
  const DenseUnitary u = build_dense_unitary(p);
  const EigenpairSet eigs = window_near(dense_eig(u), pi / 2, 1);
  const double phase = eigs.phases[0];
  const StateVector psi = eigs.vectors.col(0);

  const CorrelationSeries series = autocorrelation(p, phase, psi, 100);
  CHECK(std::abs(series.values[0] - 1.0) < 1e-12);

  SUBCASE("matches the dense evaluation of the definition") {
    // oracle: C(t) = e^{-i phi t} <psi| sigma U^t sigma |psi> with explicit
    // matrix powers
    const Eigen::Index dim = u.rows();
    Eigen::MatrixXcd ut = Eigen::MatrixXcd::Identity(dim, dim);
    StateVector flipped = psi;
    apply_sigma_z(flipped, 8, 8);
    for (int t = 0; t <= 100; ++t) {
      const cd direct =
          std::polar(1.0, -phase * t) * cd(flipped.dot(ut * flipped));
      CHECK(std::abs(series.values[t] - direct) < 1e-10);
      ut = u * ut;
    }
  }

  SUBCASE("non-eigenstate input is rejected") {
    StateVector junk = StateVector::Zero(p.dim());
    junk[0] = 1.0;
    CHECK_THROWS_AS(autocorrelation(p, phase, junk, 10), std::invalid_argument);
  }
}

TEST_CASE("squared-commutator correlator") {
  SUBCASE("vanishes at t = 0 and for commuting dynamics") {
    ChainParams p = ChainParams::self_dual(6, 41);
    OtocOptions opt;
    opt.t_max = 10;
    const CorrelationSeries series = otoc(p, opt);
    CHECK(series.values[0] == cd(0.0));

    ChainParams decoupled = p;
    decoupled.ising_coupling = 0.0;
    decoupled.kick_strength = 0.0;  // diagonal evolution commutes with sigma^z
    const CorrelationSeries flat = otoc(decoupled, opt);
    for (const cd v : flat.values) CHECK(std::abs(v) < 1e-12);
  }

  SUBCASE("values are real and nonnegative") {
    ChainParams p = ChainParams::self_dual(8, 43);
    OtocOptions opt;
    opt.t_max = 12;
    const CorrelationSeries series = otoc(p, opt);
    for (const cd v : series.values) {
      CHECK(std::abs(v.imag()) < 1e-10);
      CHECK(v.real() >= -1e-10);
    }
  }

  SUBCASE("stochastic estimator tracks the dense trace") {
    ChainParams p = ChainParams::self_dual(6, 47);
    OtocOptions dense_opt;
    dense_opt.t_max = 8;
    const CorrelationSeries dense = otoc(p, dense_opt);
    OtocOptions stoch = dense_opt;
    stoch.stochastic_trace = true;
    stoch.probes = 96;
    stoch.probe_seed = 7;
    const CorrelationSeries est = otoc(p, stoch);
    for (int t = 0; t <= 8; ++t)
      CHECK(std::abs(est.values[t].real() - dense.values[t].real()) < 0.2);
  }

  SUBCASE("memory guard beyond 12 sites") {
    ChainParams p = ChainParams::self_dual(13, 1);
    OtocOptions opt;
    CHECK_THROWS_AS(otoc(p, opt), ResourceLimitError);
  }
}
