#include "kfim/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "kfim/common.hpp"

namespace kfim {

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kKlFloor = 1e-12;

}  // namespace

Eigen::VectorXd Histogram::masses() const {
  const double n = total();
  if (n <= 0.0) throw std::invalid_argument("Histogram: empty histogram");
  return counts / n;
}

Eigen::VectorXd Histogram::densities() const {
  Eigen::VectorXd m = masses();
  for (Eigen::Index i = 0; i < m.size(); ++i) m[i] /= edges[i + 1] - edges[i];
  return m;
}

Histogram make_histogram(std::span<const double> samples, int bins) {
  if (samples.empty()) throw std::invalid_argument("make_histogram: no samples");
  if (bins < 1) throw std::invalid_argument("make_histogram: bins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {  // single point: give it a unit-width bin
    lo -= 0.5;
    hi += 0.5;
  }
  Eigen::VectorXd edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = lo + (hi - lo) * i / bins;
  edges[bins] = hi;
  return make_histogram(samples, edges);
}

Histogram make_histogram(std::span<const double> samples,
                         const Eigen::VectorXd& edges) {
  if (samples.empty()) throw std::invalid_argument("make_histogram: no samples");
  if (edges.size() < 2) throw std::invalid_argument("make_histogram: need >= 2 edges");
  for (Eigen::Index i = 0; i + 1 < edges.size(); ++i)
    if (!(edges[i] < edges[i + 1]))
      throw std::invalid_argument("make_histogram: edges must be ascending");
  Histogram h;
  h.edges = edges;
  h.counts = Eigen::VectorXd::Zero(edges.size() - 1);
  const double lo = edges[0], hi = edges[edges.size() - 1];
  const Eigen::Index bins = h.counts.size();
  for (const double x : samples) {
    if (x < lo || x > hi) continue;
    // Upper edge closes the last bin.
    Eigen::Index b = std::upper_bound(edges.data(), edges.data() + edges.size(), x) -
                     edges.data() - 1;
    if (b == bins) b = bins - 1;
    h.counts[b] += 1.0;
  }
  return h;
}

double kl_divergence(const Histogram& p, const Histogram& q) {
  if (p.edges.size() != q.edges.size() || (p.edges - q.edges).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("kl_divergence: bin edges must match exactly");
  const Eigen::VectorXd pm = p.masses();
  const Eigen::VectorXd qm = q.masses();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < pm.size(); ++i) {
    if (pm[i] <= 0.0) continue;
    const double qv = qm[i] > 0.0 ? qm[i] : kKlFloor;
    kl += pm[i] * std::log(pm[i] / qv);
  }
  return kl;
}

double gev_log_density(double y, double shape) {
  if (shape == 0.0) return -std::exp(-y) - y;
  const double u = shape * y;
  if (u >= 1.0) return -std::numeric_limits<double>::infinity();
  // log1p keeps (1 - shape y)^{1/shape} accurate through the Gumbel limit
  const double log_t = std::log1p(-u);
  const double inv = 1.0 / shape;
  return -std::exp(inv * log_t) + (inv - 1.0) * log_t;
}

double gev_density(double y, double shape) {
  const double lp = gev_log_density(y, shape);
  return std::isfinite(lp) ? std::exp(lp) : 0.0;
}

namespace {

// Negative log likelihood of the location/scale/shape parameterization;
// +inf whenever a sample leaves the support or the scale is nonpositive.
double gev_nll(const std::array<double, 3>& p, std::span<const double> x) {
  const double loc = p[0], scale = p[1], shape = p[2];
  if (scale <= 0.0) return std::numeric_limits<double>::infinity();
  const double log_scale = std::log(scale);
  double nll = 0.0;
  for (const double v : x) {
    const double lp = gev_log_density((v - loc) / scale, shape);
    if (!std::isfinite(lp)) return std::numeric_limits<double>::infinity();
    nll += log_scale - lp;
  }
  return nll;
}

struct SimplexResult {
  std::array<double, 3> best;
  double value = 0.0;
  bool converged = false;
  int evaluations = 0;
};

// Nelder-Mead with standard coefficients. The initial simplex is built with
// steps proportional to the given scales so the search is affine-equivariant.
SimplexResult nelder_mead(const std::function<double(const std::array<double, 3>&)>& f,
                          const std::array<double, 3>& start,
                          const std::array<double, 3>& steps, double tol,
                          int max_eval) {
  constexpr int n = 3;
  std::array<std::array<double, 3>, n + 1> pts;
  std::array<double, n + 1> val;
  pts[0] = start;
  for (int i = 0; i < n; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += steps[i];
  }
  SimplexResult res;
  for (int i = 0; i <= n; ++i) {
    val[i] = f(pts[i]);
    ++res.evaluations;
  }

  while (res.evaluations < max_eval) {
    std::array<int, n + 1> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int lo = order[0], hi = order[n], second_hi = order[n - 1];

    const double spread = std::abs(val[hi] - val[lo]);
    if (spread <= tol * (std::abs(val[lo]) + tol)) {
      res.best = pts[lo];
      res.value = val[lo];
      res.converged = true;
      return res;
    }

    std::array<double, 3> centroid{0, 0, 0};
    for (int i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (int d = 0; d < n; ++d) centroid[d] += pts[i][d] / n;
    }
    const auto mix = [&](double c) {
      std::array<double, 3> p;
      for (int d = 0; d < n; ++d) p[d] = centroid[d] + c * (pts[hi][d] - centroid[d]);
      return p;
    };

    const auto reflect = mix(-1.0);
    const double fr = f(reflect);
    ++res.evaluations;
    if (fr < val[lo]) {
      const auto expand = mix(-2.0);
      const double fe = f(expand);
      ++res.evaluations;
      if (fe < fr) {
        pts[hi] = expand;
        val[hi] = fe;
      } else {
        pts[hi] = reflect;
        val[hi] = fr;
      }
    } else if (fr < val[second_hi]) {
      pts[hi] = reflect;
      val[hi] = fr;
    } else {
      const auto contract = mix(fr < val[hi] ? -0.5 : 0.5);
      const double fc = f(contract);
      ++res.evaluations;
      if (fc < std::min(fr, val[hi])) {
        pts[hi] = contract;
        val[hi] = fc;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == lo) continue;
          for (int d = 0; d < n; ++d)
            pts[i][d] = pts[lo][d] + 0.5 * (pts[i][d] - pts[lo][d]);
          val[i] = f(pts[i]);
          ++res.evaluations;
        }
      }
    }
  }

  const auto best = std::min_element(val.begin(), val.end());
  res.best = pts[best - val.begin()];
  res.value = *best;
  res.converged = false;
  return res;
}

// Standard errors from the inverse of the finite-difference Hessian of the
// negative log likelihood at the optimum. A bounded-tail optimum can sit
// close to the support boundary, so each probe step shrinks until both
// one-sided evaluations stay finite.
std::array<double, 3> information_errors(
    const std::function<double(const std::array<double, 3>&)>& f,
    const std::array<double, 3>& p, const std::array<double, 3>& scales) {
  std::array<double, 3> step;
  for (int i = 0; i < 3; ++i) {
    step[i] = 1e-4 * std::max(std::abs(scales[i]), 1e-12);
    for (int attempt = 0; attempt < 60; ++attempt) {
      std::array<double, 3> plus = p, minus = p;
      plus[i] += 2.0 * step[i];
      minus[i] -= 2.0 * step[i];
      if (std::isfinite(f(plus)) && std::isfinite(f(minus))) break;
      step[i] *= 0.5;
    }
  }

  Eigen::Matrix3d hess;
  const double f0 = f(p);
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      auto shift = [&](int a, int b) {
        std::array<double, 3> q = p;
        q[i] += a * step[i];
        q[j] += b * step[j];
        return f(q);
      };
      double d2;
      if (i == j) {
        d2 = (shift(1, 0) - 2.0 * f0 + shift(-1, 0)) / (step[i] * step[i]);
      } else {
        d2 = (shift(1, 1) - shift(1, -1) - shift(-1, 1) + shift(-1, -1)) /
             (4.0 * step[i] * step[j]);
      }
      hess(i, j) = hess(j, i) = std::isfinite(d2) ? d2 : 0.0;
    }
  }
  std::array<double, 3> err{0, 0, 0};
  const Eigen::Matrix3d cov = hess.inverse();
  for (int i = 0; i < 3; ++i) {
    const double v = cov(i, i);
    err[i] = v > 0.0 && std::isfinite(v) ? std::sqrt(v) : 0.0;
  }
  return err;
}

}  // namespace

GevFit fit_gev(std::span<const double> samples) {
  if (samples.size() < 100)
    throw std::invalid_argument("fit_gev: needs at least 100 samples");
  const MomentSummary m = moment_summary(samples);
  if (m.variance <= 0.0)
    throw std::invalid_argument("fit_gev: degenerate data (all samples equal)");

  // Gumbel moment estimators seed the location and scale; shape starts small.
  const double scale0 = std::sqrt(6.0 * m.variance) / pi;
  const double loc0 = m.mean - kEulerGamma * scale0;
  const std::array<double, 3> start{loc0, scale0, 0.1};
  const std::array<double, 3> steps{0.1 * scale0, 0.1 * scale0, 0.1};

  const auto nll = [&](const std::array<double, 3>& p) { return gev_nll(p, samples); };
  SimplexResult sol = nelder_mead(nll, start, steps, 1e-12, 4000);
  // One restart from the incumbent tightens the simplex after early moves.
  const std::array<double, 3> steps2{0.01 * sol.best[1], 0.01 * sol.best[1], 0.01};
  sol = nelder_mead(nll, sol.best, steps2, 1e-13, 4000);

  GevFit fit;
  fit.location = sol.best[0];
  fit.scale = sol.best[1];
  fit.shape = sol.best[2];
  fit.log_likelihood = -sol.value;
  fit.count = samples.size();
  const auto err = information_errors(nll, sol.best, {sol.best[1], sol.best[1], 1.0});
  fit.location_err = err[0];
  fit.scale_err = err[1];
  fit.shape_err = err[2];
  if (!sol.converged)
    throw ConvergenceError("fit_gev: simplex did not converge; best shape " +
                               std::to_string(fit.shape),
                           fit.shape);
  return fit;
}

MomentSummary moment_summary(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 3) throw std::invalid_argument("moment_summary: needs at least 3 samples");
  double mean = 0.0;
  for (const double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (const double x : samples) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  MomentSummary out;
  out.count = n;
  out.mean = mean;
  out.variance = m2 / static_cast<double>(n - 1);
  const double biased_m2 = m2 / static_cast<double>(n);
  out.skewness =
      biased_m2 > 0.0 ? (m3 / static_cast<double>(n)) / std::pow(biased_m2, 1.5) : 0.0;
  return out;
}

double ratio_R(double model_mean, const TwReference& tw) {
  return std::abs(model_mean - tw.mean) / std::sqrt(tw.variance);
}

ScalingFit fit_exponential_scaling(
    std::span<const std::pair<double, double>> points) {
  const std::size_t n = points.size();
  if (n < 3)
    throw std::invalid_argument("fit_exponential_scaling: needs >= 3 points");
  for (const auto& [l, v] : points)
    if (!(v > 0.0))
      throw std::invalid_argument("fit_exponential_scaling: values must be > 0");

  // Least squares on log2(value) = c0 + c1 * L with c1 = -1/decay.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [l, v] : points) {
    const double y = std::log2(v);
    sx += l;
    sy += y;
    sxx += l * l;
    sxy += l * y;
  }
  const double dn = static_cast<double>(n);
  const double sxx_c = sxx - sx * sx / dn;
  const double c1 = (sxy - sx * sy / dn) / sxx_c;
  const double c0 = (sy - c1 * sx) / dn;

  double ssr = 0.0;
  for (const auto& [l, v] : points) {
    const double r = std::log2(v) - (c0 + c1 * l);
    ssr += r * r;
  }
  const double mse = n > 2 ? ssr / static_cast<double>(n - 2) : 0.0;
  const double c1_err = std::sqrt(std::max(mse / sxx_c, 0.0));
  const double c0_err = std::sqrt(std::max(mse * (1.0 / dn + (sx / dn) * (sx / dn) / sxx_c), 0.0));

  ScalingFit fit;
  fit.prefactor = std::exp2(c0);
  fit.decay = -1.0 / c1;
  fit.prefactor_err = std::log(2.0) * fit.prefactor * c0_err;
  fit.decay_err = c1_err / (c1 * c1);
  return fit;
}

}  // namespace kfim
