#include <doctest.h>

#include <cmath>
#include <vector>

#include "kfim/rng.hpp"

using namespace kfim;

TEST_CASE("identical seeds give identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.gamma(3.5) == b.gamma(3.5));
  }
}

TEST_CASE("normal moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0, sum2 = 0, sum3 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
    sum3 += x * x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
  CHECK(std::abs(sum3 / n) < 0.05);
}

TEST_CASE("gamma and chi-squared moments") {
  Rng rng(11);
  const int n = 100000;
  for (const double shape : {0.5, 1.0, 4.0, 37.0}) {
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.gamma(shape);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - shape) < 0.05 * std::max(1.0, shape));
    CHECK(std::abs(var - shape) < 0.1 * std::max(1.0, shape));
  }
  // chi-squared with large fractional dof, as used by the tridiagonal model
  double sum = 0;
  const double dof = 1 << 12;
  for (int i = 0; i < 2000; ++i) sum += rng.chi_squared(dof);
  CHECK(std::abs(sum / 2000 - dof) < 0.01 * dof);
}

TEST_CASE("derived seeds separate streams") {
  const std::uint64_t master = 42;
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 100; ++i) seeds.push_back(derive_seed(master, i));
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j) CHECK(seeds[i] != seeds[j]);
  CHECK(derive_seed(master, 5) == derive_seed(master, 5));
  CHECK(derive_seed(master, 5) != derive_seed(master + 1, 5));
}
