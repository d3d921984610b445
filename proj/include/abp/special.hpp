#ifndef ABP_SPECIAL_HPP
#define ABP_SPECIAL_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace abp {

struct GammaDomain : std::domain_error {
  GammaDomain() : std::domain_error("GammaDomain") {}
};
struct AlphaDomain : std::domain_error {
  AlphaDomain() : std::domain_error("AlphaDomain") {}
};

// Euler gamma for x > 0, Lanczos approximation (g = 7, 9 terms).
// Good to ~15 significant digits on the range used here.
inline double gamma_fn(double x) {
  if (std::isnan(x) || (x <= 0 && x == std::floor(x))) throw GammaDomain();
  static const double g = 7;
  static const double coef[9] = {
      0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
      771.32342877765313,       -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection keeps small arguments accurate
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * gamma_fn(1 - x));
  }
  x -= 1;
  double a = coef[0];
  double t = x + g + 0.5;
  for (int i = 1; i < 9; ++i) a += coef[i] / (x + i);
  return std::sqrt(2 * std::numbers::pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

inline double log_gamma_fn(double x) {
  if (!(x > 0)) throw GammaDomain();
  return std::lgamma(x);
}

// A(alpha) = pi^{alpha - n/2} Gamma((n-alpha)/2) / Gamma(alpha/2)
inline double calA(double alpha, int n) {
  if (!(alpha > 0) || alpha >= 2 || alpha >= n) throw AlphaDomain();
  return std::pow(std::numbers::pi, alpha - n / 2.0) * gamma_fn((n - alpha) / 2) /
         gamma_fn(alpha / 2);
}

// A(alpha)/alpha, stable as alpha -> 0 via alpha*Gamma(alpha/2) = 2*Gamma(alpha/2+1).
inline double calA_over_alpha(double alpha, int n) {
  if (!(alpha >= 0) || alpha >= 2 || alpha >= n) throw AlphaDomain();
  return std::pow(std::numbers::pi, alpha - n / 2.0) * gamma_fn((n - alpha) / 2) /
         (2 * gamma_fn(alpha / 2 + 1));
}

// F(sigma) = (sqrt n / 2)^{-n+2-sigma} * A(2-sigma) / (8 (1 - 4^{-(2-sigma)/n})),
// the quantity bounded below by c_0 uniformly in sigma.
inline double c0_integrand(double sigma, int n) {
  double eps = 2 - sigma;
  double rn = std::sqrt(double(n)) / 2;
  double denom = 8 * (1 - std::pow(4.0, -eps / n));
  // near sigma = 2 both factors vanish linearly; use the stable ratio
  if (eps < 1e-8) {
    double a_over = calA_over_alpha(eps, n);          // A(eps)/eps
    double d_over = 8 * (2 * std::numbers::ln2 / n);  // (1-4^{-eps/n})/eps limit * 8
    return std::pow(rn, -n + eps) * a_over / d_over;
  }
  return std::pow(rn, -n + eps) * calA(eps, n) / denom;
}

// Exact sigma -> 2 endpoint of F.
inline double c0_endpoint(int n) {
  double rn = std::sqrt(double(n)) / 2;
  return std::pow(rn, double(-n)) * calA_over_alpha(0.0, n) * n /
         (16 * std::numbers::ln2);
}

struct C0Certificate {
  double c0;          // certified lower bound
  double grid_min;    // raw grid minimum of F
  double sigma_min;   // argmin on the grid
  double margin;      // safety margin subtracted
};

// Largest certified lower bound of F over sigma in (0,2): dense grid minimum
// minus a Lipschitz margin from the grid slopes near the minimizer. (F blows
// up as sigma -> 0, so a global slope bound would be uselessly pessimistic;
// away from the minimum the interpolation error cannot create a lower value.)
inline C0Certificate c0_certificate(int n, double step = 1e-4) {
  const int m = (int)std::llround(2.0 / step) - 1;
  std::vector<double> vals(m);
  int best_i = 0;
  for (int i = 0; i < m; ++i) {
    vals[i] = c0_integrand((i + 1) * step, n);
    if (vals[i] < vals[best_i]) best_i = i;
  }
  double best = vals[best_i];
  double best_sigma = (best_i + 1) * step;
  double end = c0_endpoint(n);
  if (end < best) {
    best = end;
    best_sigma = 2.0;
  }
  double local_slope = 0;
  for (int i = std::max(1, best_i - 16); i <= std::min(m - 1, best_i + 16); ++i)
    local_slope = std::max(local_slope, std::abs(vals[i] - vals[i - 1]) / step);
  // the tail [last grid point, 2) is covered by the endpoint value and the
  // same local slope bound since F is smooth up to sigma = 2
  C0Certificate cert;
  cert.grid_min = best;
  cert.sigma_min = best_sigma;
  cert.margin = 0.5 * local_slope * step;
  cert.c0 = best - cert.margin;
  return cert;
}

inline double c0_of(int n) { return c0_certificate(n).c0; }

}  // namespace abp

#endif
