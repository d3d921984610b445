#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "abp/envelope.hpp"

using namespace abp;

namespace {

// Independent oracle: projected Gauss-Seidel on the same lattice, updating
// each point in place from single-point kernel evaluations (no shared moment
// field, no extrapolation). Run to a tighter tolerance than the solver under
// test; discrete complementarity fixed points are unique for this monotone
// system, so the two solvers must agree.
GridFunction gauss_seidel_envelope(const GridFunction& u, double sigma,
                                   double tol, int max_sweeps) {
  const Domain& dom = u.dom;
  const int n = dom.n;
  GridFunction obst(dom, 0.0);
  dom.for_each([&](const Idx& i) { obst.at(i) = std::min(u.at(i), 0.0); });
  GridFunction g = obst;
  g.ext = Exterior::constant(0.0);
  MomentTable table = build_moment_table(n, dom.h, sigma, 2 * 3.0 + dom.h);
  const double coef = fractional_hessian_coef(n, sigma);
  // diagonal sensitivity measured directly at one interior point
  Idx probe{1, 1, 0};
  double e0 = coef * first_eigenvalue(g, probe, table);
  GridFunction gp = g;
  gp.at(probe) -= 1.0;
  double kappa = coef * first_eigenvalue(gp, probe, table) - e0;
  REQUIRE(kappa > 0);
  Region inside = ball(3.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double worst = 0;
    dom.for_each([&](const Idx& i) {
      if (!inside(dom.coords(i))) return;
      double E = coef * first_eigenvalue(g, i, table);
      double slack = obst.at(i) - g.at(i);
      worst = std::max(worst, std::abs(std::min(E / kappa, slack)));
      g.at(i) = std::min(obst.at(i), g.at(i) + 0.45 / kappa * E);
    });
    if (worst < tol) return g;
  }
  FAIL("gauss_seidel_envelope did not converge");
  return g;
}

}  // namespace

TEST_CASE("nonnegative input gives the zero envelope in one iteration") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0);
  u.fill([](const Vec& x) { return 1.0 + x[0] * x[0]; });
  EnvelopeResult r = compute_envelope(u, 1.5);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  dom.for_each([&](const Idx& i) { CHECK(r.gamma.at(i) == 0.0); });
}

TEST_CASE("single deep well: contact at the minimum, negative neighborhood") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0);
  u.at({0, 0, 0}) = -1.0;
  EnvelopeConfig cfg;
  cfg.tol = 1e-8;
  EnvelopeResult r = compute_envelope(u, 1.5, cfg);
  CHECK(r.converged);
  CHECK(r.max_residual < 1e-8);
  // envelope touches the obstacle at the global minimum
  CHECK(r.gamma.at({0, 0, 0}) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.in_contact({0, 0, 0}));
  // strictly negative in a neighborhood, zero outside B_3
  CHECK(r.gamma.at({1, 0, 0}) < -1e-4);
  CHECK(r.gamma.at({0, -1, 0}) < -1e-4);
  dom.for_each([&](const Idx& i) {
    CHECK(r.gamma.at(i) <= 0.0);
    if (norm2(dom.coords(i), 2) >= 3.0) CHECK(r.gamma.at(i) == 0.0);
  });
}

TEST_CASE("agreement with an independent projected Gauss-Seidel oracle") {
  Domain dom(2, 1.0 / 4, 8.0);
  GridFunction u(dom, 0.0);
  // a lopsided two-well obstacle
  u.fill([](const Vec& x) {
    double a = std::exp(-8 * ((x[0] - 0.5) * (x[0] - 0.5) + x[1] * x[1]));
    double b = std::exp(-12 * ((x[0] + 0.7) * (x[0] + 0.7) +
                               (x[1] - 0.3) * (x[1] - 0.3)));
    return -a - 0.6 * b;
  });
  EnvelopeConfig cfg;
  cfg.tol = 1e-9;
  EnvelopeResult r = compute_envelope(u, 1.5, cfg);
  REQUIRE(r.converged);
  GridFunction oracle = gauss_seidel_envelope(u, 1.5, 1e-10, 20000);
  double diff = 0;
  dom.for_each([&](const Idx& i) {
    diff = std::max(diff, std::abs(r.gamma.at(i) - oracle.at(i)));
  });
  CHECK(diff < 1e-6);
}

TEST_CASE("flat obstacle on B_3 keeps a certified complementarity residual") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0);
  u.fill([](const Vec& x) { return norm2(x, 2) < 3.0 ? -1.0 : 0.0; });
  EnvelopeConfig cfg;
  cfg.tol = 1e-7;
  EnvelopeResult r = compute_envelope(u, 1.5, cfg);
  CHECK(r.converged);
  CHECK(r.max_residual < 1e-7);
  dom.for_each([&](const Idx& i) {
    CHECK(r.gamma.at(i) <= std::min(u.at(i), 0.0) + 1e-12);
  });
}

TEST_CASE("monotonicity: u <= w implies gamma(u) <= gamma(w) + 2 tol") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0), w(dom, 0.0);
  u.fill([](const Vec& x) {
    return -std::exp(-4 * norm2(x, 2) * norm2(x, 2));
  });
  w.fill([](const Vec& x) {
    return -0.5 * std::exp(-4 * norm2(x, 2) * norm2(x, 2));
  });
  EnvelopeConfig cfg;
  cfg.tol = 1e-8;
  EnvelopeResult ru = compute_envelope(u, 1.5, cfg);
  EnvelopeResult rw = compute_envelope(w, 1.5, cfg);
  REQUIRE(ru.converged);
  REQUIRE(rw.converged);
  dom.for_each([&](const Idx& i) {
    CHECK(ru.gamma.at(i) <= rw.gamma.at(i) + 2e-8);
  });
}

TEST_CASE("inf of the envelope equals inf over B_1 of u at the contact point") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0);
  u.fill([](const Vec& x) {
    double d2 = (x[0] - 0.25) * (x[0] - 0.25) + x[1] * x[1];
    return -0.8 * std::exp(-16 * d2);
  });
  EnvelopeConfig cfg;
  cfg.tol = 1e-8;
  EnvelopeResult r = compute_envelope(u, 1.5, cfg);
  REQUIRE(r.converged);
  double inf_u = 0, inf_g = 0;
  dom.for_each([&](const Idx& i) {
    if (norm2(dom.coords(i), 2) < 1.0) inf_u = std::min(inf_u, u.at(i));
    inf_g = std::min(inf_g, r.gamma.at(i));
  });
  CHECK(inf_g == doctest::Approx(inf_u).epsilon(1e-6));
}

TEST_CASE("residual summary reports convergence state honestly") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0);
  u.at({0, 0, 0}) = -1.0;
  EnvelopeConfig cfg;
  cfg.tol = 1e-10;
  cfg.max_iter = 3;  // force an unconverged return
  EnvelopeResult r = compute_envelope(u, 1.5, cfg);
  CHECK(!r.converged);
  EnvelopeSummary s = envelope_residuals(r);
  CHECK(!s.converged);
  CHECK(s.max_residual > 1e-10);
  CHECK(s.iterations == r.iterations);
}

TEST_CASE("contact measure of the zero envelope matches {u = 0} in B_3") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction u(dom, 0.0);
  u.fill([](const Vec& x) { return std::max(0.0, 1.0 - norm2(x, 2)); });
  EnvelopeResult r = compute_envelope(u, 1.5);
  REQUIRE(r.converged);
  EnvelopeSummary s = envelope_residuals(r);
  // u >= 0: gamma = 0, so contact is exactly {u = 0} within B_3
  double cells = std::pow(dom.h, 2);
  double expect = 0;
  dom.for_each([&](const Idx& i) {
    if (u.at(i) == 0.0 && norm2(dom.coords(i), 2) < 3.0) expect += cells;
  });
  CHECK(s.contact_measure == doctest::Approx(expect));
}
