#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "abp/pucci.hpp"

using namespace abp;

namespace {

// Brute-force oracle: minimize/maximize sum a_i h_i over the admissible
// diagonal set {0 <= a_i <= Lambda, sum a_i >= lambda} by dense grid search
// over the vertices and facet points of the polytope. For the linear
// objective the optimum is at a vertex, which the grid contains exactly.
double lp_oracle(const std::vector<double>& h, double lambda, double Lambda,
                 ExtremalMode mode) {
  int n = (int)h.size();
  int steps = 40;
  double best = (mode == ExtremalMode::Min) ? 1e300 : -1e300;
  std::vector<int> idx(n, 0);
  for (;;) {
    double s = 0, tr = 0;
    for (int i = 0; i < n; ++i) {
      double a = Lambda * idx[i] / steps;
      s += a * h[i];
      tr += a;
    }
    if (tr >= lambda - 1e-12) {
      if (mode == ExtremalMode::Min)
        best = std::min(best, s);
      else
        best = std::max(best, s);
    }
    int d = 0;
    while (d < n && ++idx[d] > steps) idx[d++] = 0;
    if (d == n) break;
  }
  return best;
}

}  // namespace

TEST_CASE("ellipticity validation") {
  CHECK_THROWS_AS(PucciEllipticity(2, 0.0, 1.0, 1.5), InfeasibleEllipticity);
  CHECK_THROWS_AS(PucciEllipticity(2, -1.0, 1.0, 1.5), InfeasibleEllipticity);
  CHECK_THROWS_AS(PucciEllipticity(3, 3.1, 1.0, 1.5), InfeasibleEllipticity);
  CHECK_THROWS(PucciEllipticity(2, 1.0, 1.0, 2.0));
  CHECK_THROWS(PucciEllipticity(2, 1.0, 1.0, 1.0));
  CHECK_NOTHROW(PucciEllipticity(2, 2.0, 1.0, 1.5));
  CHECK_NOTHROW(PucciEllipticity(2, 1.0, 1.0, 1.5));
}

TEST_CASE("closed form against the LP oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int n : {2, 3}) {
    for (int rep = 0; rep < 60; ++rep) {
      std::vector<double> h(n);
      for (auto& v : h) v = U(rng);
      double Lambda = 1.0 + 0.5 * (rep % 3);
      double lambda = Lambda * n * (0.2 + 0.02 * (rep % 40));
      if (lambda > n * Lambda) lambda = n * Lambda;
      PucciEllipticity ell(n, lambda, Lambda, 1.5);
      for (ExtremalMode mode : {ExtremalMode::Min, ExtremalMode::Max}) {
        double got = pucci_extremal_eigs(h, ell, mode);
        // snap lambda to the oracle grid so its vertex set is exact
        double lam_snapped = std::round(lambda / Lambda * 40.0) / 40.0 * Lambda;
        PucciEllipticity ell2(n, lam_snapped, Lambda, 1.5);
        double want = lp_oracle(h, lam_snapped, Lambda, mode);
        double got2 = pucci_extremal_eigs(h, ell2, mode);
        CHECK(got2 == doctest::Approx(want).epsilon(1e-10));
        (void)got;
      }
    }
  }
}

TEST_CASE("known values") {
  // lambda = Lambda = 1, n = 2, eigenvalues (1, -2):
  // min: put full weight on the negative one -> 1*(-2) = -2 (trace 1 >= 1)
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  std::vector<double> h = {1.0, -2.0};
  CHECK(pucci_extremal_eigs(h, ell, ExtremalMode::Min) == doctest::Approx(-2.0));
  // max: full weight on the positive one -> 1
  CHECK(pucci_extremal_eigs(h, ell, ExtremalMode::Max) == doctest::Approx(1.0));

  // all positive: min forced to spend the minimal trace on the smallest
  std::vector<double> hp = {0.5, 2.0};
  CHECK(pucci_extremal_eigs(hp, ell, ExtremalMode::Min) == doctest::Approx(0.5));
  CHECK(pucci_extremal_eigs(hp, ell, ExtremalMode::Max) == doctest::Approx(2.5));

  // all negative: min takes everything at Lambda
  std::vector<double> hn = {-0.5, -2.0};
  CHECK(pucci_extremal_eigs(hn, ell, ExtremalMode::Min) == doctest::Approx(-2.5));
  CHECK(pucci_extremal_eigs(hn, ell, ExtremalMode::Max) == doctest::Approx(-0.5));
}

TEST_CASE("duality and monotonicity properties") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> U(-2, 2);
  PucciEllipticity ell(3, 1.5, 2.0, 1.5);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> h = {U(rng), U(rng), U(rng)};
    std::vector<double> neg = {-h[0], -h[1], -h[2]};
    double mn = pucci_extremal_eigs(h, ell, ExtremalMode::Min);
    double mx = pucci_extremal_eigs(h, ell, ExtremalMode::Max);
    // duality M+(h) = -M-(-h)
    CHECK(mx == doctest::Approx(-pucci_extremal_eigs(neg, ell, ExtremalMode::Min)).epsilon(1e-12));
    CHECK(mn <= mx + 1e-12);
    // monotonicity: raising one eigenvalue cannot lower either extremum
    std::vector<double> h2 = h;
    h2[rep % 3] += 0.7;
    CHECK(pucci_extremal_eigs(h2, ell, ExtremalMode::Min) >= mn - 1e-12);
    CHECK(pucci_extremal_eigs(h2, ell, ExtremalMode::Max) >= mx - 1e-12);
    // positive homogeneity
    std::vector<double> h3 = {3 * h[0], 3 * h[1], 3 * h[2]};
    CHECK(pucci_extremal_eigs(h3, ell, ExtremalMode::Min) == doctest::Approx(3 * mn).epsilon(1e-12));
  }
}

TEST_CASE("symmetric eigenvalues 2x2 and 3x3") {
  // 2x2 closed form
  {
    std::array<double, 9> m = {2, 1, 0, 1, 2, 0, 0, 0, 0};
    auto e = sym_eigenvalues(m, 2);
    std::sort(e.begin(), e.end());
    CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(e[1] == doctest::Approx(3.0).epsilon(1e-13));
  }
  // 3x3 with known spectrum: diag(1,2,3) rotated
  {
    std::array<double, 9> m = {2, 0, 1, 0, 2, 0, 1, 0, 2};  // eigs 1, 2, 3
    auto e = sym_eigenvalues(m, 3);
    std::sort(e.begin(), e.end());
    CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(e[2] == doctest::Approx(3.0).epsilon(1e-12));
  }
  // random symmetric: eigenvalue sum = trace, product = det
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int rep = 0; rep < 100; ++rep) {
    double a = U(rng), b = U(rng), c = U(rng), d = U(rng), e_ = U(rng), f = U(rng);
    std::array<double, 9> m = {a, d, e_, d, b, f, e_, f, c};
    auto ev = sym_eigenvalues(m, 3);
    double tr = ev[0] + ev[1] + ev[2];
    CHECK(tr == doctest::Approx(a + b + c).epsilon(1e-10));
    double det = a * (b * c - f * f) - d * (d * c - f * e_) + e_ * (d * f - b * e_);
    CHECK(ev[0] * ev[1] * ev[2] == doctest::Approx(det).epsilon(1e-8).scale(1.0));
  }
}
