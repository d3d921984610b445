#ifndef ABP_BARRIER_HPP
#define ABP_BARRIER_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abp/operators.hpp"

namespace abp {

struct BarrierScaleFail : std::runtime_error {
  BarrierScaleFail() : std::runtime_error("BarrierScaleFail") {}
};

// Radial barrier profile eta = -c2 * shape(|x|) built from the inverse power
// r^{-p} with its tangent line at the support radius R = 2 sqrt(n) removed:
//
//   shape(r) = r^{-p} - R^{-p} + p R^{-p-1} (r - R),   rho_in <= r < R,
//
// so shape(R) = shape'(R) = 0 and eta is C^{1,1} at the support edge with no
// separate glue. A double zero there matters because the extremal operator's
// sigma -> 2 limit sees the angular average of the hessian — the sign
// condition is tr(D^2 eta) + 2 max-eig(D^2 eta) <= 0, which this convex
// decreasing shape satisfies for p >= n, while any tail that bends up to
// reach zero (however smooth) turns M+ eta positive near the edge. Below
// rho_in = 1/8 the shape is clamped by a quartic a - b r^4 matching value
// and slope at rho_in; the quartic's flat top keeps the peak (and so
// ||eta||_inf) small enough to fit the scale budget at the exponents that
// certify. c2 is calibrated so eta <= -2 on Q_3, whose farthest point is
// |x| = (3/2) sqrt(n).
struct BarrierProfile {
  int n = 2;
  double p = 4;          // inverse-power exponent
  double smoothing = 4;  // core clamp exponent m: core = a - b r^m
  double rho_in = 0.125;
  double R = 0;  // support radius 2 sqrt(n)
  double c2 = 0;
  double core_a = 0, core_b = 0;

  explicit BarrierProfile(int n_, double p_, double smoothing_ = 4)
      : n(n_), p(p_), smoothing(smoothing_) {
    if (!(smoothing >= 2))
      throw std::invalid_argument("BarrierProfile: smoothing must be >= 2");
    R = 2 * std::sqrt(double(n));
    double corner = 1.5 * std::sqrt(double(n));
    // core a - b r^m matching value and slope of the body at rho_in; the
    // peak v + |slope| rho_in / m flattens as the smoothing exponent grows
    double v = body(rho_in);
    double slope = -p * std::pow(rho_in, -p - 1) + p * std::pow(R, -p - 1);
    core_b = -slope / (smoothing * std::pow(rho_in, smoothing - 1));
    core_a = v + core_b * std::pow(rho_in, smoothing);
    double base = shape(corner);
    if (!(base > 0)) throw BarrierScaleFail();
    c2 = 2.0 / base;
    if (!(c2 * shape(0) <= 1e6)) throw BarrierScaleFail();
  }

  double body(double r) const {
    return std::pow(r, -p) - std::pow(R, -p) + p * std::pow(R, -p - 1) * (r - R);
  }

  // positive radial shape before scaling; eta = -c2 * shape
  double shape(double r) const {
    if (r >= R) return 0;
    if (r < rho_in) return core_a - core_b * std::pow(r, smoothing);
    return body(r);
  }

  double eta(const Vec& x) const { return -c2 * shape(norm2(x, n)); }
};

inline GridFunction build_eta(const Domain& dom, double p,
                              double smoothing = 4) {
  if (!(p > 0)) throw std::invalid_argument("build_eta: p must be positive");
  BarrierProfile prof(dom.n, p, smoothing);
  GridFunction eta(dom, 0.0);
  eta.ext = Exterior::constant(0.0);
  eta.fill([&](const Vec& x) { return prof.eta(x); });
  return eta;
}

struct BarrierViolation {
  Vec x{};
  double sigma = 0;
  double value = 0;  // M+ eta at the point
};

struct BarrierCertificate {
  GridFunction eta;
  double p = 0;
  double M1 = 0;  // ||eta||_inf
  double M2 = 0;  // max over B_{1/4} of (M+ eta)^+ across the sigma grid
  std::vector<double> sigma_grid;
  std::vector<BarrierViolation> violations;  // M+ eta > tol outside B_{1/4}
  double tol = 0;
  bool q3_ok = false;       // eta <= -2 on Q_3
  bool support_ok = false;  // eta = 0 outside B_{2 sqrt n}
  std::string reason;

  bool valid() const { return violations.empty() && q3_ok && support_ok; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["p"] = p;
    j["M1"] = M1;
    j["log_M1"] = std::log(M1);
    j["M2"] = M2;
    j["log_M2"] = std::log(M2);
    j["sigma_grid"] = sigma_grid;
    j["tol"] = tol;
    j["q3_ok"] = q3_ok;
    j["support_ok"] = support_ok;
    j["valid"] = valid();
    j["reason"] = reason;
    auto& v = j["violations"] = nlohmann::json::array();
    for (const auto& w : violations)
      v.push_back({{"x", {w.x[0], w.x[1], w.x[2]}},
                   {"sigma", w.sigma},
                   {"value", w.value}});
    return j;
  }
};

inline std::vector<double> default_sigma_grid() {
  return {1.05, 1.25, 1.5, 1.75, 1.9, 1.99};
}

// Evaluate M+ eta over B_{2 sqrt n + 1} for each sigma; M2 is the positive
// part's max over B_{1/4}; positive values above tol elsewhere are recorded
// as violations. tol <= 0 selects 1e-9 times the largest |M+ eta| seen.
inline BarrierCertificate certify_barrier(const GridFunction& eta,
                                          const PucciEllipticity& ell_any,
                                          const std::vector<double>& sigma_grid,
                                          double tol = 0) {
  const Domain& dom = eta.dom;
  const int n = dom.n;
  const double h = dom.h;
  const double rsupp = 2 * std::sqrt(double(n));

  BarrierCertificate cert;
  cert.eta = eta;
  cert.sigma_grid = sigma_grid;

  // clause (i): support, and clause (ii): eta <= -2 on Q_3, ||eta||_inf
  cert.support_ok = true;
  cert.q3_ok = true;
  Region q3 = cube(3.0);
  dom.for_each([&](const Idx& i) {
    Vec x = dom.coords(i);
    double v = eta.at(i);
    cert.M1 = std::max(cert.M1, std::abs(v));
    if (norm2(x, n) >= rsupp && v != 0) cert.support_ok = false;
    if (q3(x) && !(v <= -2 + 1e-12)) cert.q3_ok = false;
  });
  if (!cert.support_ok) cert.reason = "eta does not vanish outside B_{2 sqrt n}";
  if (!cert.q3_ok) cert.reason = "eta > -2 somewhere on Q_3";

  const int V = std::min(dom.radius_cells(), int(std::ceil((rsupp + 1) / h)));
  const Region core = ball(0.25);
  const Region window = ball(rsupp + 1);

  std::vector<std::pair<Idx, std::pair<double, double>>> raw;  // (x, sigma, value)
  double scale = 0;
  for (double sigma : sigma_grid) {
    PucciEllipticity ell(n, ell_any.lambda, ell_any.Lambda, sigma);
    // eta = 0 = exterior outside B_{2 sqrt n}: cutoff covering the support
    // from anywhere in the window makes the constant tail exact
    MomentFieldPlan plan(n, h, sigma, V, 2 * rsupp + 1 + h);
    MomentField mf = plan.evaluate(eta);
    mf.for_each([&](const Idx& x) {
      if (!dom.in_box(x)) return;
      Vec pt = dom.coords(x);
      if (!window(pt)) return;
      auto eigs = sym_eigenvalues(mf.H(x), n);
      double mplus = (2 - sigma) * pucci_extremal_eigs(eigs, ell, ExtremalMode::Max);
      scale = std::max(scale, std::abs(mplus));
      if (core(pt)) {
        cert.M2 = std::max(cert.M2, std::max(mplus, 0.0));
      } else if (mplus > 0) {
        raw.push_back({x, {sigma, mplus}});
      }
    });
  }
  cert.tol = tol > 0 ? tol : 1e-9 * scale;
  for (auto& [x, sv] : raw)
    if (sv.second > cert.tol)
      cert.violations.push_back({dom.coords(x), sv.first, sv.second});
  if (!cert.violations.empty() && cert.reason.empty())
    cert.reason = "M+ eta positive outside B_{1/4}";
  return cert;
}

// xi(x) = (M+ eta)^+ / M2 at one sigma; support must match the certificate.
inline GridFunction barrier_xi(const BarrierCertificate& cert, double sigma,
                               const PucciEllipticity& ell_any) {
  const Domain& dom = cert.eta.dom;
  const int n = dom.n;
  const double rsupp = 2 * std::sqrt(double(n));
  PucciEllipticity ell(n, ell_any.lambda, ell_any.Lambda, sigma);
  const int V = std::min(dom.radius_cells(),
                         int(std::ceil((rsupp + 1) / dom.h)));
  MomentFieldPlan plan(n, dom.h, sigma, V, 2 * rsupp + 1 + dom.h);
  MomentField mf = plan.evaluate(cert.eta);
  GridFunction xi(dom, 0.0);
  mf.for_each([&](const Idx& x) {
    if (!dom.in_box(x)) return;
    auto eigs = sym_eigenvalues(mf.H(x), n);
    double mplus = (2 - sigma) * pucci_extremal_eigs(eigs, ell, ExtremalMode::Max);
    xi.at(x) = std::max(mplus, 0.0) / cert.M2;
  });
  return xi;
}

// Scan p and return the first certified candidate.
inline BarrierCertificate build_certified_barrier(
    const Domain& dom, const PucciEllipticity& ell,
    const std::vector<double>& sigma_grid = default_sigma_grid(),
    double tol = 0) {
  BarrierCertificate last;
  for (int p = 2; p <= 12; ++p) {
    GridFunction eta;
    try {
      eta = build_eta(dom, double(p));
    } catch (const BarrierScaleFail&) {
      continue;  // core too deep at this exponent; keep scanning
    }
    BarrierCertificate cert = certify_barrier(eta, ell, sigma_grid, tol);
    cert.p = double(p);
    if (cert.valid()) return cert;
    last = cert;
  }
  if (last.reason.empty()) last.reason = "no p in {2..12} certified";
  return last;
}

}  // namespace abp

#endif
