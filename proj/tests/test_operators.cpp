#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "abp/operators.hpp"

using namespace abp;

namespace {

// The standard mollifier bump: exp(1 - 1/(1 - |x|^2)) on B_1, zero outside.
double bump(double r2) {
  if (r2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - r2));
}

double bump_at(const Vec& x, int n) {
  double r2 = 0;
  for (int d = 0; d < n; ++d) r2 += x[d] * x[d];
  return bump(r2);
}

// Oracle for H(0) of the radial bump in n = 2: by symmetry H = c I with
//   c = pi * int_0^inf delta(rho) rho^{-1-sigma} drho,
//   delta(rho) = 2 (bump(rho^2) - 1),
// evaluated by composite Simpson on the graded substitution rho = s^4 over
// [0,1] (integrand ~ rho^{1-sigma} at 0) plus the exact analytic piece
// -2/sigma on [1, inf) where delta = -2.
double bump_H_oracle(double sigma) {
  // Integrate 2 (bump(rho^2) - 1) rho^{-1-sigma} on [eps, 1] on a log grid,
  // where the integrand is smooth with all derivatives bounded:
  // rho = e^t gives 2 (bump(e^{2t}) - 1) e^{-sigma t} dt.
  auto f = [&](double t) {
    double rho = std::exp(t);
    return 2 * (bump(rho * rho) - 1.0) * std::exp(-sigma * t);
  };
  // On [0, eps]: bump(rho^2) - 1 = -rho^2 - rho^4/2 + O(rho^6), so the head is
  // -2 eps^{2-sigma}/(2-sigma) - eps^{4-sigma}/(4-sigma) + O(eps^{6-sigma}).
  const double eps = 1e-3;
  double head = -2.0 * std::pow(eps, 2.0 - sigma) / (2.0 - sigma) -
                std::pow(eps, 4.0 - sigma) / (4.0 - sigma);
  const int m = 1 << 20;
  double a = std::log(eps), b = 0.0;
  double hstep = (b - a) / m;
  double acc = f(a) + f(b);
  for (int k = 1; k < m; ++k) acc += f(a + k * hstep) * (k % 2 ? 4.0 : 2.0);
  acc *= hstep / 3.0;
  return M_PI * (head + acc - 2.0 / sigma);
}

}  // namespace

TEST_CASE("second difference basics") {
  Domain d(2, 1.0 / 32, 8.0);
  GridFunction c(d, 3.0);
  c.ext = Exterior::constant(3.0);
  CHECK(second_difference(c, {0.5, 0.25, 0}, {0.1, 0.7, 0}) == doctest::Approx(0.0));

  GridFunction q(d);
  q.fill([&](const Vec& x) { return x[0] * x[0] + x[1] * x[1]; });
  // exact for quadratics even through bilinear interpolation at lattice points
  CHECK(second_difference(q, {0, 0, 0}, {0.25, 0.5, 0}) ==
        doctest::Approx(2 * (0.25 * 0.25 + 0.5 * 0.5)).epsilon(1e-10));

  GridFunction cu(d);
  cu.fill([&](const Vec& x) { return x[0] * x[0] * x[0]; });
  double v = second_difference(cu, {0.5, 0, 0}, {0.1, 0, 0});
  double want = std::pow(0.6, 3) + std::pow(0.4, 3) - 2 * std::pow(0.5, 3);
  CHECK(v == doctest::Approx(want).epsilon(2e-2));  // 0.03, through interpolation
}

TEST_CASE("kernel moment of constants and symmetry") {
  Domain d(2, 1.0 / 16, 8.0);
  MomentTable t = build_moment_table(2, d.h, 1.5, 4.0);
  GridFunction c(d, 2.0);
  c.ext = Exterior::constant(2.0);
  KernelMoment km = kernel_moment(c, {0, 0, 0}, t);
  for (int k = 0; k < 9; ++k) CHECK(km.H[k] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  GridFunction b(d);
  b.fill([&](const Vec& x) { return bump_at(x, 2); });
  KernelMoment kb = kernel_moment(b, {0, 0, 0}, t);
  // radial symmetry: diagonal, equal entries
  CHECK(kb.H[0] == doctest::Approx(kb.H[4]).epsilon(1e-10));
  CHECK(kb.H[1] == doctest::Approx(0.0).scale(std::abs(kb.H[0])).epsilon(1e-3));
  CHECK(kb.H[1] == kb.H[3]);  // symmetric by construction
  CHECK(!kb.nonclassical_point);
  // tail bound invariant
  CHECK(kb.tail_estimate <= 4.0 * 1.0 * t.tail_scalar + 1e-15);
  CHECK_THROWS(build_moment_table(2, d.h, 2.5, 4.0));
}

TEST_CASE("bump moment matrix against the polar oracle") {
  for (double sigma : {1.25, 1.5, 1.75}) {
    double oracle = bump_H_oracle(sigma);
    Domain d(2, 1.0 / 32, 8.0);
    GridFunction b(d);
    b.fill([&](const Vec& x) { return bump_at(x, 2); });
    MomentTable t = build_moment_table(2, d.h, sigma, 6.0);
    KernelMoment km = kernel_moment(b, {0, 0, 0}, t);
    CHECK(km.H[0] == doctest::Approx(oracle).epsilon(1e-3));
    CHECK(km.H[4] == doctest::Approx(oracle).epsilon(1e-3));
  }
}

TEST_CASE("m_extremal invariances on the bump") {
  Domain d(2, 1.0 / 16, 8.0);
  GridFunction b(d);
  b.fill([&](const Vec& x) { return bump_at(x, 2); });
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  MomentTable t = build_moment_table(2, d.h, 1.5, 4.0);

  double mn = m_extremal(b, {3, -5, 0}, ell, ExtremalMode::Min, t);
  double mx = m_extremal(b, {3, -5, 0}, ell, ExtremalMode::Max, t);
  CHECK(mn <= mx + 1e-14);

  // constant shift invariance
  GridFunction bs = b;
  for (auto& v : bs.values) v += 7.0;
  bs.ext = Exterior::constant(7.0);
  CHECK(m_extremal(bs, {3, -5, 0}, ell, ExtremalMode::Min, t) ==
        doctest::Approx(mn).epsilon(1e-11));

  // positive homogeneity
  GridFunction b3 = b;
  for (auto& v : b3.values) v *= 3.0;
  CHECK(m_extremal(b3, {3, -5, 0}, ell, ExtremalMode::Min, t) ==
        doctest::Approx(3 * mn).epsilon(1e-11));

  // duality min(-u) = -max(u)
  GridFunction bneg = b;
  for (auto& v : bneg.values) v = -v;
  CHECK(m_extremal(bneg, {3, -5, 0}, ell, ExtremalMode::Min, t) ==
        doctest::Approx(-mx).epsilon(1e-11));

  // inf <= sup at scattered points
  std::mt19937 rng(2);
  std::uniform_int_distribution<int> J(-20, 20);
  for (int rep = 0; rep < 100; ++rep) {
    Idx xi{J(rng), J(rng), 0};
    CHECK(m_extremal(b, xi, ell, ExtremalMode::Min, t) <=
          m_extremal(b, xi, ell, ExtremalMode::Max, t) + 1e-14);
  }
}

TEST_CASE("kernel moment monotonicity in the Loewner order") {
  Domain d(2, 1.0 / 16, 8.0);
  GridFunction u(d);
  u.fill([&](const Vec& x) { return bump_at(x, 2); });
  // w >= u everywhere, equality at the origin
  GridFunction w = u;
  w.dom.for_each([&](const Idx& i) {
    Vec x = d.coords(i);
    double r2 = x[0] * x[0] + x[1] * x[1];
    w.at(i) += 0.3 * r2 / (1.0 + r2);
  });
  w.ext = Exterior::table_fn(
      [&](const Vec& x) {
        double r2 = x[0] * x[0] + x[1] * x[1];
        return 0.3 * r2 / (1.0 + r2);
      },
      0.3);
  MomentTable t = build_moment_table(2, d.h, 1.5, 4.0);
  KernelMoment ku = kernel_moment(u, {0, 0, 0}, t);
  KernelMoment kw = kernel_moment(w, {0, 0, 0}, t);
  // H_w - H_u must be positive semidefinite
  std::array<double, 9> diff{};
  for (int k = 0; k < 9; ++k) diff[k] = kw.H[k] - ku.H[k];
  auto e = sym_eigenvalues(diff, 2);
  CHECK(e.front() >= -1e-11);
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  CHECK((2 - 1.5) * pucci_extremal_eigs(sym_eigenvalues(ku.H, 2), ell, ExtremalMode::Min) <=
        (2 - 1.5) * pucci_extremal_eigs(sym_eigenvalues(kw.H, 2), ell, ExtremalMode::Min) + 1e-11);
}

TEST_CASE("sigma to 2 angular limit") {
  // exact hessian of the bump at 0 is -2 I; the sigma -> 2 limit of M- is
  // the closed-form assignment on omega4 (tr D I + 2 D) = -2 pi I, giving
  // -4 pi for lambda = Lambda = 1 in n = 2.
  Domain d(2, 1.0 / 32, 8.0);
  GridFunction b(d);
  b.fill([&](const Vec& x) { return bump_at(x, 2); });
  double sigma = 1.99;
  PucciEllipticity ell(2, 1.0, 1.0, sigma);
  MomentTable t = build_moment_table(2, d.h, sigma, 6.0);
  double got = m_extremal(b, {0, 0, 0}, ell, ExtremalMode::Min, t);
  std::array<double, 9> limitM{};
  double D2[9] = {-2, 0, 0, 0, -2, 0, 0, 0, 0};
  double trD = -4;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      limitM[i * 3 + j] = omega4(2) * ((i == j ? trD : 0.0) + 2 * D2[i * 3 + j]);
  double want = pucci_extremal_eigs(sym_eigenvalues(limitM, 2), ell, ExtremalMode::Min);
  CHECK(want == doctest::Approx(-4 * M_PI).epsilon(1e-12));
  CHECK(got == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("discrete scaling law") {
  // u_tilde(x) = u(2^{-1} x)/N obeys M- u_tilde(0) = (2^{-sigma}/N) M- u(0)
  double sigma = 1.5;
  PucciEllipticity ell(2, 1.0, 1.0, sigma);
  double N = 3.0;

  Domain dfine(2, 1.0 / 64, 8.0);
  GridFunction u(dfine);
  u.fill([&](const Vec& x) { return bump_at(x, 2); });
  MomentTable tf = build_moment_table(2, dfine.h, sigma, 6.0);
  double base = m_extremal(u, {0, 0, 0}, ell, ExtremalMode::Min, tf);

  Domain dcoarse(2, 1.0 / 32, 8.0);
  GridFunction ut(dcoarse);
  ut.fill([&](const Vec& x) { return bump_at({x[0] / 2, x[1] / 2, 0}, 2) / N; });
  ut.ext = Exterior::table_fn(
      [&](const Vec& x) { return bump_at({x[0] / 2, x[1] / 2, 0}, 2) / N; }, 0.0);
  MomentTable tc = build_moment_table(2, dcoarse.h, sigma, 12.0);
  double scaled = m_extremal(ut, {0, 0, 0}, ell, ExtremalMode::Min, tc);

  CHECK(scaled == doctest::Approx(std::pow(2.0, -sigma) / N * base).epsilon(1e-2));
}

TEST_CASE("fractional hessian and first eigenvalue") {
  Domain d(2, 1.0 / 16, 8.0);
  MomentTable t = build_moment_table(2, d.h, 1.5, 4.0);

  GridFunction c(d, 1.0);
  c.ext = Exterior::constant(1.0);
  CHECK(first_eigenvalue(c, {0, 0, 0}, t) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  // negative bump: strict interior minimum at 0 forces positive delta, E > 0
  GridFunction nb(d);
  nb.fill([&](const Vec& x) { return -bump_at(x, 2); });
  CHECK(first_eigenvalue(nb, {0, 0, 0}, t) > 0);

  // radial symmetry: E equals the diagonal entry
  auto H = fractional_hessian(nb, {0, 0, 0}, t);
  CHECK(first_eigenvalue(nb, {0, 0, 0}, t) == doctest::Approx(H[0]).epsilon(1e-3));

  // eigenvalue equals the minimum of the sampled quadratic form
  GridFunction g(d);
  g.fill([&](const Vec& x) {
    return bump_at({x[0] - 0.25, x[1] + 0.125, 0}, 2) + 0.2 * bump_at(x, 2);
  });
  auto Hg = fractional_hessian(g, {2, -1, 0}, t);
  double emin = sym_eigenvalues(Hg, 2).front();
  double sampled = 1e300;
  for (int k = 0; k < 360; ++k) {
    double th = 2 * M_PI * k / 360.0;
    double tau[2] = {std::cos(th), std::sin(th)};
    double q = Hg[0] * tau[0] * tau[0] + 2 * Hg[1] * tau[0] * tau[1] + Hg[4] * tau[1] * tau[1];
    sampled = std::min(sampled, q);
  }
  CHECK(emin <= sampled + 1e-10);
  CHECK(sampled - emin <= 1e-3 * std::abs(emin) + 1e-10);  // 360 samples resolve it
}

TEST_CASE("fft moment field matches the direct path") {
  for (int n : {2, 3}) {
    double h = n == 2 ? 1.0 / 16 : 1.0 / 8;
    Domain d(n, h, 8.0);
    GridFunction u(d);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> U(-1, 1);
    u.fill([&](const Vec& x) {
      return bump_at(x, n) + 0.5 * bump_at({x[0] - 0.3, x[1] + 0.2, x[2]}, n);
    });
    for (auto& v : u.values) v += 1e-3 * U(rng);  // roughness; both paths must agree anyway
    double cutoff = 3.0;
    int V = 8;
    MomentFieldPlan plan(n, h, 1.5, V, cutoff);
    MomentField mf = plan.evaluate(u);
    std::mt19937 rng2(4);
    std::uniform_int_distribution<int> J(-V, V);
    for (int rep = 0; rep < (n == 2 ? 25 : 10); ++rep) {
      Idx xi{J(rng2), J(rng2), n == 3 ? J(rng2) : 0};
      KernelMoment km = kernel_moment(u, xi, plan.table());
      auto Hf = mf.H(xi);
      for (int k = 0; k < 9; ++k)
        CHECK(Hf[k] == doctest::Approx(km.H[k]).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("nonclassical point is flagged") {
  Domain d(2, 1.0 / 16, 8.0);
  GridFunction kinked(d);
  kinked.fill([&](const Vec& x) { return -std::sqrt(std::abs(x[0])) * bump_at(x, 2); });
  MomentTable t = build_moment_table(2, d.h, 1.5, 4.0);
  KernelMoment km = kernel_moment(kinked, {0, 0, 0}, t);
  CHECK(km.nonclassical_point);
  // splicing a smooth test function over a neighborhood clears the flag
  GridFunction v = splice_test(kinked, [&](const Vec& x) { return 2 * bump_at(x, 2) - 2; },
                               {0, 0, 0}, 0.25);
  KernelMoment km2 = kernel_moment(v, {0, 0, 0}, t);
  CHECK(!km2.nonclassical_point);
  double spliced = evaluate_with_test(kinked, [&](const Vec& x) { return 2 * bump_at(x, 2) - 2; },
                                      {0, 0, 0}, 0.25, PucciEllipticity(2, 1, 1, 1.5),
                                      ExtremalMode::Min, t);
  CHECK(std::isfinite(spliced));
}
