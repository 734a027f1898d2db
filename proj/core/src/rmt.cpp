#include "kfim/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "kfim/common.hpp"
#include "kfim/rng.hpp"

namespace kfim {

namespace {

Eigen::MatrixXd gaussian_matrix(int dim, Rng& rng) {
  Eigen::MatrixXd g(dim, dim);
  // Column-major fill order is part of the documented draw sequence.
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index i = 0; i < dim; ++i) g(i, j) = rng.normal();
  return g;
}

// Largest eigenvalue of the symmetric tridiagonal (diag, offdiag) by Sturm
// bisection; used on the small Lanczos projections below.
double tridiag_top_eigenvalue(const std::vector<double>& diag,
                              const std::vector<double>& offdiag) {
  const std::size_t n = diag.size();
  if (n == 1) return diag[0];
  double lo = diag[0], hi = diag[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (i > 0 ? std::abs(offdiag[i - 1]) : 0.0) +
                     (i + 1 < n ? std::abs(offdiag[i]) : 0.0);
    lo = std::min(lo, diag[i] - r);
    hi = std::max(hi, diag[i] + r);
  }
  const auto count_below = [&](double x) {
    std::size_t count = 0;
    double d = diag[0] - x;
    if (d < 0) ++count;
    for (std::size_t i = 1; i < n; ++i) {
      if (d == 0.0) d = -1e-300;
      d = diag[i] - x - offdiag[i - 1] * offdiag[i - 1] / d;
      if (d < 0) ++count;
    }
    return count;
  };
  const double span = hi - lo;
  while (hi - lo > 1e-13 * std::max(1.0, std::abs(hi)) && hi - lo > 1e-15 * span) {
    const double mid = 0.5 * (lo + hi);
    if (count_below(mid) >= n)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

struct LanczosOptions {
  int max_iter = 0;
  double tol = 1e-10;
  bool full_reorth = false;
  int check_stride = 5;
  int min_iter = 20;
};

// Symmetric Lanczos iteration returning the top Ritz value. Convergence is
// declared when the top Ritz value stagnates (relative change below tol) on
// two consecutive checks, or at exact breakdown.
template <typename Matvec>
double lanczos_largest(const Matvec& matvec, Eigen::Index dim,
                       const LanczosOptions& opt, std::uint64_t start_seed) {
  Rng rng(start_seed);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
  v.normalize();

  Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd w(dim);
  std::vector<double> alpha, beta;
  Eigen::MatrixXd basis;
  if (opt.full_reorth) basis.resize(dim, opt.max_iter);

  double theta = 0.0, theta_prev = 0.0;
  int stagnant = 0;
  double scale = 0.0;

  for (int k = 0; k < opt.max_iter; ++k) {
    if (opt.full_reorth) basis.col(k) = v;
    matvec(v, w);
    const double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v;
    if (k > 0) w -= beta.back() * v_prev;
    if (opt.full_reorth) {
      const auto q = basis.leftCols(k + 1);
      w.noalias() -= q * (q.transpose() * w);
    }
    const double b = w.norm();
    scale = std::max({scale, std::abs(a), b});

    const bool breakdown = b <= 1e-13 * std::max(1.0, scale);
    const bool check = breakdown || k + 1 >= opt.max_iter ||
                       ((k + 1) % opt.check_stride == 0 && k + 1 >= opt.min_iter);
    if (check) {
      theta = tridiag_top_eigenvalue(alpha, beta);
      if (breakdown || k + 1 >= opt.max_iter) {
        if (breakdown) return theta;
        break;
      }
      if (std::abs(theta - theta_prev) <= opt.tol * std::max(1.0, std::abs(theta))) {
        if (++stagnant >= 2) return theta;
      } else {
        stagnant = 0;
      }
      theta_prev = theta;
    }

    beta.push_back(b);
    v_prev.swap(v);
    v = w / b;
  }
  throw ConvergenceError("lanczos_largest: no convergence within max iterations",
                         theta);
}

constexpr std::uint64_t kLanczosStartStream = 0x6c616e637a6fULL;

}  // namespace

WishartSample sample_wishart_unit_trace(int dim, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("sample_wishart_unit_trace: dim >= 2");
  Rng rng(seed);
  const Eigen::MatrixXd g = gaussian_matrix(dim, rng);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, dim);
  w.selfadjointView<Eigen::Lower>().rankUpdate(g);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sample_wishart_unit_trace: eigensolve failed");
  WishartSample out;
  out.dim = dim;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvalues /= out.eigenvalues.sum();
  return out;
}

double wishart_largest(int dim, std::uint64_t seed, bool unit_trace) {
  if (dim < 2) throw std::invalid_argument("wishart_largest: dim >= 2");
  Rng rng(seed);
  const Eigen::MatrixXd g = gaussian_matrix(dim, rng);
  Eigen::VectorXd tmp(dim);
  const auto matvec = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    tmp.noalias() = g.transpose() * x;
    y.noalias() = g * tmp;
  };
  LanczosOptions opt;
  opt.max_iter = std::min(dim, 192);
  opt.tol = 1e-11;
  opt.full_reorth = true;
  opt.check_stride = 4;
  opt.min_iter = 16;
  const double top =
      lanczos_largest(matvec, dim, opt, derive_seed(seed, kLanczosStartStream));
  return unit_trace ? top / g.squaredNorm() : top;
}

double mp_density(double rescaled_eigenvalue) {
  if (rescaled_eigenvalue <= 0.0 || rescaled_eigenvalue > 4.0) return 0.0;
  return std::sqrt((4.0 - rescaled_eigenvalue) / rescaled_eigenvalue) / (2.0 * pi);
}

CenteringConstants centering_constants(int dim) {
  if (dim < 2) throw std::invalid_argument("centering_constants: dim >= 2");
  const double d = dim;
  const double root_sum = std::sqrt(d - 1.0) + std::sqrt(d);
  CenteringConstants c;
  c.location = root_sum * root_sum / (d * d);
  c.scale = root_sum * std::cbrt(1.0 / std::sqrt(d) + 1.0 / std::sqrt(d - 1.0)) /
            (d * d);
  return c;
}

double rescale_lambda_max(double lmax, int dim) {
  const CenteringConstants c = centering_constants(dim);
  return (lmax - c.location) / c.scale;
}

TridiagonalMatrix laguerre_tridiagonal(int dim, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("laguerre_tridiagonal: dim >= 2");
  Rng rng(seed);
  // Bidiagonal chi factors: diagonal dof dim..1, subdiagonal dof dim-1..1.
  Eigen::VectorXd d(dim), s(dim - 1);
  for (int i = 0; i < dim; ++i) d[i] = std::sqrt(rng.chi_squared(dim - i));
  for (int i = 0; i + 1 < dim; ++i) s[i] = std::sqrt(rng.chi_squared(dim - 1 - i));
  TridiagonalMatrix t;
  t.diag.resize(dim);
  t.offdiag.resize(dim - 1);
  t.diag[0] = d[0] * d[0];
  for (int i = 1; i < dim; ++i) t.diag[i] = d[i] * d[i] + s[i - 1] * s[i - 1];
  for (int i = 0; i + 1 < dim; ++i) t.offdiag[i] = d[i] * s[i];
  return t;
}

double largest_eig_tridiag(const TridiagonalMatrix& t, bool trace_normalize) {
  const Eigen::Index n = t.dim();
  if (n < 1 || t.offdiag.size() != n - 1)
    throw std::invalid_argument("largest_eig_tridiag: malformed tridiagonal");
  if (n == 1) return trace_normalize ? 1.0 : t.diag[0];

  // Plain three-term Lanczos with fused passes; at large dimension the loop
  // is memory bound, so the matvec, the alpha reduction, and the
  // orthogonalization share traversals.
  Rng start_rng(kLanczosStartStream);
  Eigen::VectorXd v(n), v_prev = Eigen::VectorXd::Zero(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = start_rng.normal();
  v.normalize();

  const double* d = t.diag.data();
  const double* off = t.offdiag.data();
  const int max_iter = static_cast<int>(std::min<Eigen::Index>(10 * n, 1000000));
  std::vector<double> alpha, beta;
  double beta_prev = 0.0;
  double theta = 0.0, theta_prev = 0.0;
  int stagnant = 0;
  double scale = 0.0;

  for (int k = 0; k < max_iter; ++k) {
    double a = 0.0;
    {
      double* wp = w.data();
      const double* vp = v.data();
      const double* pp = v_prev.data();
      wp[0] = d[0] * vp[0] + off[0] * vp[1] - beta_prev * pp[0];
      a += vp[0] * wp[0];
      for (Eigen::Index i = 1; i + 1 < n; ++i) {
        const double wi =
            off[i - 1] * vp[i - 1] + d[i] * vp[i] + off[i] * vp[i + 1] -
            beta_prev * pp[i];
        wp[i] = wi;
        a += vp[i] * wi;
      }
      wp[n - 1] = off[n - 2] * vp[n - 2] + d[n - 1] * vp[n - 1] -
                  beta_prev * pp[n - 1];
      a += vp[n - 1] * wp[n - 1];
    }
    alpha.push_back(a);
    double b2 = 0.0;
    {
      double* wp = w.data();
      const double* vp = v.data();
      for (Eigen::Index i = 0; i < n; ++i) {
        wp[i] -= a * vp[i];
        b2 += wp[i] * wp[i];
      }
    }
    const double b = std::sqrt(b2);
    scale = std::max({scale, std::abs(a), b});

    const bool breakdown = b <= 1e-13 * std::max(1.0, scale);
    const bool check = breakdown || k + 1 >= max_iter ||
                       ((k + 1) % 10 == 0 && k + 1 >= 40);
    if (check) {
      theta = tridiag_top_eigenvalue(alpha, beta);
      if (breakdown) return trace_normalize ? theta / t.trace() : theta;
      if (k + 1 >= max_iter) break;
      if (std::abs(theta - theta_prev) <= 1e-10 * std::max(1.0, std::abs(theta))) {
        if (++stagnant >= 2) return trace_normalize ? theta / t.trace() : theta;
      } else {
        stagnant = 0;
      }
      theta_prev = theta;
    }

    beta.push_back(b);
    beta_prev = b;
    v_prev.swap(v);
    const double inv_b = 1.0 / b;
    for (Eigen::Index i = 0; i < n; ++i) v[i] = w[i] * inv_b;
  }
  throw ConvergenceError(
      "largest_eig_tridiag: no convergence within max iterations", theta);
}

}  // namespace kfim
