#ifndef ABP_PUCCI_HPP
#define ABP_PUCCI_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace abp {

struct InfeasibleEllipticity : std::invalid_argument {
  InfeasibleEllipticity() : std::invalid_argument("InfeasibleEllipticity") {}
};

// (n, lambda, Lambda, sigma); the matrix class is {A : lambda <= Tr A, 0 <= A <= Lambda Id}.
struct PucciEllipticity {
  int n = 2;
  double lambda = 1.0;
  double Lambda = 1.0;
  double sigma = 1.5;

  PucciEllipticity() = default;
  PucciEllipticity(int n_, double lam, double Lam, double sig)
      : n(n_), lambda(lam), Lambda(Lam), sigma(sig) {
    if (!(lambda > 0) || lambda > n * Lambda) throw InfeasibleEllipticity();
    if (!(sigma > 1) || !(sigma < 2))
      throw std::invalid_argument("PucciEllipticity: sigma must be in (1,2)");
  }
};

enum class ExtremalMode { Min, Max };

// min/max of sum a_i h_i over 0 <= a_i <= Lambda, sum a_i >= lambda.
// Min mode: full weight Lambda on every negative eigenvalue; if the trace
// constraint is still short, fill greedily from the smallest nonnegative
// eigenvalues. Max mode is the mirrored assignment.
inline double pucci_extremal_eigs(std::vector<double> h, const PucciEllipticity& ell,
                                  ExtremalMode mode) {
  if (!(ell.lambda > 0) || ell.lambda > ell.n * ell.Lambda) throw InfeasibleEllipticity();
  if ((int)h.size() != ell.n)
    throw std::invalid_argument("pucci_extremal_eigs: eigenvalue count != n");
  if (mode == ExtremalMode::Max) {
    for (double& v : h) v = -v;
    return -pucci_extremal_eigs(std::move(h), ell, ExtremalMode::Min);
  }
  std::sort(h.begin(), h.end());
  double value = 0;
  double mass = 0;
  for (double v : h) {
    if (v < 0) {
      value += ell.Lambda * v;
      mass += ell.Lambda;
    }
  }
  double need = ell.lambda - mass;
  for (double v : h) {
    if (need <= 0) break;
    if (v < 0) continue;
    double a = std::min(need, ell.Lambda);
    value += a * v;
    need -= a;
  }
  return value;
}

// Eigenvalues of a symmetric n x n matrix, ascending; closed forms for 2x2
// and the trigonometric solution for 3x3. The matrix is packed row-major.
inline std::vector<double> sym_eigenvalues(const std::array<double, 9>& m, int n) {
  if (n == 2) {
    double a = m[0], b = m[1], d = m[4];
    double tr = a + d;
    double disc = std::sqrt(std::max(0.0, (a - d) * (a - d) / 4 + b * b));
    return {tr / 2 - disc, tr / 2 + disc};
  }
  // 3x3: eigenvalues of B = (A - q I)/p via the cubic's trigonometric roots
  double a = m[0], b = m[4], c = m[8];
  double d = m[1], e = m[5], f = m[2];
  double p1 = d * d + e * e + f * f;
  if (p1 == 0) {
    std::vector<double> r = {a, b, c};
    std::sort(r.begin(), r.end());
    return r;
  }
  double q = (a + b + c) / 3;
  double p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2 * p1;
  double p = std::sqrt(p2 / 6);
  double B[9];
  for (int k = 0; k < 9; ++k) B[k] = m[k] / p;
  B[0] -= q / p;
  B[4] -= q / p;
  B[8] -= q / p;
  double detB = B[0] * (B[4] * B[8] - B[5] * B[7]) - B[1] * (B[3] * B[8] - B[5] * B[6]) +
                B[2] * (B[3] * B[7] - B[4] * B[6]);
  double r = std::clamp(detB / 2, -1.0, 1.0);
  double phi = std::acos(r) / 3;
  double e1 = q + 2 * p * std::cos(phi);
  double e3 = q + 2 * p * std::cos(phi + 2 * M_PI / 3);
  double e2 = 3 * q - e1 - e3;
  std::vector<double> out = {e1, e2, e3};
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace abp

#endif
