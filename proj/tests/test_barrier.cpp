#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "abp/barrier.hpp"

using namespace abp;

namespace {

// Independent closed-form arithmetic for the profile constants at n = 2:
// body(r) = r^{-p} - R^{-p} + p R^{-p-1}(r - R) with R = 2 sqrt(2), clamped
// below rho_in = 1/8 by a - b r^m matching value and slope, scaled so the
// value at the Q_3 corner radius (3/2) sqrt(2) equals -2.
struct ProfileOracle {
  double a, b, c2, peak;
  ProfileOracle(double p, double m) {
    const double R = 2 * std::sqrt(2.0), rin = 0.125;
    auto body = [&](double r) {
      return std::pow(r, -p) - std::pow(R, -p) + p * std::pow(R, -p - 1) * (r - R);
    };
    double slope = -p * std::pow(rin, -p - 1) + p * std::pow(R, -p - 1);
    b = -slope / (m * std::pow(rin, m - 1));
    a = body(rin) + b * std::pow(rin, m);
    c2 = 2.0 / body(1.5 * std::sqrt(2.0));
    peak = c2 * a;
  }
};

}  // namespace

TEST_CASE("profile constants match the closed form") {
  for (double p : {3.0, 4.0}) {
    for (double m : {4.0, 6.0}) {
      BarrierProfile prof(2, p, m);
      ProfileOracle want(p, m);
      CHECK(prof.core_a == doctest::Approx(want.a).epsilon(1e-14));
      CHECK(prof.core_b == doctest::Approx(want.b).epsilon(1e-14));
      CHECK(prof.c2 == doctest::Approx(want.c2).epsilon(1e-14));
      // sup norm is attained at the center of the flat core
      CHECK(prof.c2 * prof.shape(0) == doctest::Approx(want.peak).epsilon(1e-14));
    }
  }
}

TEST_CASE("eta vanishes outside B_{2 sqrt n} for every exponent") {
  Domain dom(2, 1.0 / 8, 8.0);
  for (double p : {2.0, 3.0, 4.0}) {
    GridFunction eta = build_eta(dom, p);
    double rsupp = 2 * std::sqrt(2.0);
    dom.for_each([&](const Idx& i) {
      if (norm2(dom.coords(i), 2) >= rsupp) CHECK(eta.at(i) == 0.0);
    });
  }
}

TEST_CASE("eta is at most -2 on Q_3 and is C^{1,1}-flat at the support edge") {
  BarrierProfile prof(2, 4);
  // corner calibration: the farthest point of Q_3 sits at radius 1.5 sqrt(2)
  CHECK(-prof.c2 * prof.shape(1.5 * std::sqrt(2.0)) == doctest::Approx(-2.0));
  for (double r = 0.0; r <= 1.5 * std::sqrt(2.0); r += 1e-3)
    CHECK(-prof.c2 * prof.shape(r) <= -2.0 + 1e-12);
  // double zero at R: value and first difference vanish
  double R = prof.R;
  CHECK(prof.shape(R) == 0.0);
  double d = 1e-6;
  CHECK(std::abs(prof.shape(R - d)) < 1e-9 * prof.shape(0));
  CHECK(std::abs(prof.shape(R - d) / d) < 1e-3 * prof.shape(0));
}

TEST_CASE("scale guard: undersized corner value or oversized peak throws") {
  CHECK_THROWS_AS(BarrierProfile(2, 8), BarrierScaleFail);
  CHECK_THROWS_AS(BarrierProfile(2, 4, 2), BarrierScaleFail);
  CHECK_THROWS_AS(BarrierProfile(2, 4, 1.5), std::invalid_argument);
}

TEST_CASE("zero eta certifies trivially but is invalid with a reason") {
  Domain dom(2, 1.0 / 8, 8.0);
  GridFunction eta(dom, 0.0);
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  BarrierCertificate c = certify_barrier(eta, ell, {1.5});
  CHECK(c.M2 == 0.0);
  CHECK(c.violations.empty());
  CHECK(!c.q3_ok);
  CHECK(!c.valid());
  CHECK(!c.reason.empty());
}

TEST_CASE("doubling eta doubles M1 and M2") {
  Domain dom(2, 1.0 / 16, 8.0);
  GridFunction eta = build_eta(dom, 4);
  GridFunction eta2 = eta;
  dom.for_each([&](const Idx& i) { eta2.at(i) *= 2.0; });
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  BarrierCertificate c1 = certify_barrier(eta, ell, {1.5});
  BarrierCertificate c2 = certify_barrier(eta2, ell, {1.5});
  CHECK(c2.M1 == doctest::Approx(2 * c1.M1).epsilon(1e-12));
  CHECK(c2.M2 == doctest::Approx(2 * c1.M2).epsilon(1e-10));
}

TEST_CASE("M2 is nonincreasing as the core smoothing flattens") {
  Domain dom(2, 1.0 / 16, 8.0);
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  double prev = -1;
  for (double m : {4.0, 6.0, 8.0}) {
    GridFunction eta = build_eta(dom, 4, m);
    BarrierCertificate c = certify_barrier(eta, ell, {1.05, 1.5, 1.99});
    if (prev >= 0) CHECK(c.M2 <= prev);
    prev = c.M2;
  }
}

TEST_CASE("the p-scan certifies a barrier with no violations at h = 1/32") {
  Domain dom(2, 1.0 / 32, 8.0);
  PucciEllipticity ell(2, 1.0, 1.0, 1.5);
  BarrierCertificate c =
      build_certified_barrier(dom, ell, {1.05, 1.5, 1.99});
  CHECK(c.valid());
  CHECK(c.violations.empty());
  CHECK(c.q3_ok);
  CHECK(c.support_ok);
  CHECK(c.M1 > 0);
  CHECK(c.M1 <= 1e6);
  CHECK(std::isfinite(c.M2));
  CHECK(c.M2 > 0);

  // xi reconstruction: (M+ eta)^+ / M2 lies in [0,1] and is supported in
  // B_{1/4} when the certificate is valid
  GridFunction xi = barrier_xi(c, 1.5, ell);
  dom.for_each([&](const Idx& i) {
    CHECK(xi.at(i) >= 0.0);
    CHECK(xi.at(i) <= 1.0 + 1e-12);
    if (norm2(dom.coords(i), 2) >= 0.25 && xi.at(i) != 0.0)
      CHECK(xi.at(i) <= c.tol / c.M2);
  });

  // serialization carries the ledger-facing fields
  auto j = c.to_json();
  CHECK(j["valid"].get<bool>());
  CHECK(j["log_M2"].get<double>() == doctest::Approx(std::log(c.M2)));
}
