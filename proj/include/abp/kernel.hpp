#ifndef ABP_KERNEL_HPP
#define ABP_KERNEL_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "abp/grid.hpp"
#include "abp/pucci.hpp"

namespace abp {

// Packed symmetric component order: 2d (00,01,11), 3d (00,01,02,11,12,22).
inline int sym_comp_count(int n) { return n == 2 ? 3 : 6; }

inline std::array<std::pair<int, int>, 6> sym_pairs(int n) {
  if (n == 2) return {{{0, 0}, {0, 1}, {1, 1}, {0, 0}, {0, 0}, {0, 0}}};
  return {{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};
}

inline std::array<double, 9> unpack_sym(const double* c, int n) {
  std::array<double, 9> m{};
  if (n == 2) {
    m[0] = c[0]; m[1] = c[1]; m[3] = c[1]; m[4] = c[2];
  } else {
    m[0] = c[0]; m[1] = c[1]; m[2] = c[2];
    m[3] = c[1]; m[4] = c[3]; m[5] = c[4];
    m[6] = c[2]; m[7] = c[4]; m[8] = c[5];
  }
  return m;
}

inline double surface_measure(int n) {
  return n == 2 ? 2 * std::numbers::pi : 4 * std::numbers::pi;
}

// |S^{n-1}| / (n (n+2)); the fourth spherical moment coefficient.
inline double omega4(int n) { return surface_measure(n) / (n * (n + 2.0)); }

struct QuadratureConfig {
  double near_mult = 4.0;   // chi support radius = near_mult * h
  double cutoff = 0.0;      // kernel truncation radius; 0 = pick per use
  int edge_subsample = 3;   // cell averaging for moderately near offsets
};

// Precomputed cell-quadrature table of the kernel moments
//   W_ij(z) ~ integral over the cell at offset z of y_i y_j / |y|^{n+sigma+2},
// plus the smooth-model correction tensor and analytic tail pieces shared by
// every operator built from the moment matrix H.
struct MomentTable {
  int n = 2;
  double h = 0, sigma = 0, rcut = 0, rchi = 0;
  int K = 0;       // offsets z in [-K, K]^n
  int ncomp = 3;
  std::vector<double> w;          // ncomp * (2K+1)^n, component-major
  double wsum[6] = {0};           // sum of W over all offsets
  double model[6][6] = {{0}};     // chi-model lattice tensor, off-diag folded
  double tail_scalar = 0;         // (|S^{n-1}|/n) rcut^{-sigma} / sigma
  double chi_radial = 0;          // int_0^{rchi} chi(rho) rho^{1-sigma} drho
  double om4 = 0;

  std::size_t offsets_per_axis() const { return std::size_t(2 * K + 1); }
  std::size_t offset_flat(const Idx& z) const {
    std::size_t p = offsets_per_axis(), f = 0;
    for (int d = 0; d < n; ++d) f = f * p + std::size_t(z[d] + K);
    return f;
  }
  double weight(int comp, const Idx& z) const {
    return w[comp * wstride_ + offset_flat(z)];
  }
  std::size_t wstride_ = 0;
};

inline double chi_cutoff(double rho, double rchi) {
  if (rho >= rchi) return 0;
  double t = 1 - (rho / rchi) * (rho / rchi);
  return t * t;
}

inline MomentTable build_moment_table(int n, double h, double sigma, double cutoff,
                                      const QuadratureConfig& cfg = {}) {
  if (!(sigma > 1) || !(sigma < 2))
    throw std::invalid_argument("build_moment_table: sigma must be in (1,2)");
  MomentTable t;
  t.n = n;
  t.h = h;
  t.sigma = sigma;
  t.rcut = cutoff;
  // The quadratic-model blend needs a grid-independent support radius to keep
  // the node-sampled remainder quadrature second order; near_mult * h is only
  // a floor for coarse grids.
  t.rchi = std::max(cfg.near_mult * h, std::min(1.0, cutoff / 4));
  t.K = int(std::ceil(cutoff / h));
  t.ncomp = sym_comp_count(n);
  t.om4 = omega4(n);
  t.tail_scalar = surface_measure(n) / n * std::pow(cutoff, -sigma) / sigma;
  {
    double e = 2 - sigma;
    t.chi_radial = std::pow(t.rchi, e) * (1 / e - 2 / (4 - sigma) + 1 / (6 - sigma));
  }
  std::size_t per = t.offsets_per_axis();
  std::size_t cells = 1;
  for (int d = 0; d < n; ++d) cells *= per;
  t.wstride_ = cells;
  t.w.assign(std::size_t(t.ncomp) * cells, 0.0);

  auto pairs = sym_pairs(n);
  const double expo = n + sigma + 2;
  const double hn = std::pow(h, n);

  // subsample counts keyed to |z|_inf; the singularity sits at z = 0
  auto subs_for = [&](int zinf) {
    if (zinf <= 2) return 17;
    if (zinf <= 4) return 9;
    if (zinf <= 8) return 5;
    if (zinf <= 16) return cfg.edge_subsample;
    return 1;
  };

  Idx z{0, 0, 0};
  int zmin = -t.K, zmax = t.K;
  int z2lo = (n == 3) ? zmin : 0, z2hi = (n == 3) ? zmax : 0;
  for (z[0] = zmin; z[0] <= zmax; ++z[0])
    for (z[1] = zmin; z[1] <= zmax; ++z[1])
      for (z[2] = z2lo; z[2] <= z2hi; ++z[2]) {
        if (z[0] == 0 && z[1] == 0 && z[2] == 0) continue;
        double rc = 0;
        int zinf = 0;
        for (int d = 0; d < n; ++d) {
          rc += double(z[d]) * z[d];
          zinf = std::max(zinf, std::abs(z[d]));
        }
        rc = std::sqrt(rc) * h;
        if (rc > cutoff) continue;
        int s = subs_for(zinf);
        double wacc[6] = {0};
        double macc[6][6] = {{0}};
        double cellw = hn / std::pow(double(s), n);
        int s2lo = (n == 3) ? 0 : 0, s2hi = (n == 3) ? s - 1 : 0;
        for (int a = 0; a < s; ++a)
          for (int b = 0; b < s; ++b)
            for (int c = s2lo; c <= s2hi; ++c) {
              Vec y{(z[0] + (a + 0.5) / s - 0.5) * h,
                    (z[1] + (b + 0.5) / s - 0.5) * h,
                    n == 3 ? (z[2] + (c + 0.5) / s - 0.5) * h : 0.0};
              double rho2 = 0;
              for (int d = 0; d < n; ++d) rho2 += y[d] * y[d];
              double rho = std::sqrt(rho2);
              double kern = std::pow(rho, -expo);
              for (int cmp = 0; cmp < t.ncomp; ++cmp) {
                auto [i, j] = pairs[cmp];
                wacc[cmp] += y[i] * y[j] * kern * cellw;
              }
            }
        // The quadratic-model weights sample chi * y_k y_l at the cell node,
        // matching how delta is sampled in the assembly; this makes the
        // assembled difference the smooth remainder delta - chi y'Dy, which
        // is what keeps the near-origin quadrature second order.
        {
          Vec yn{z[0] * h, z[1] * h, n == 3 ? z[2] * h : 0.0};
          double chn = chi_cutoff(rc, t.rchi);
          if (chn > 0)
            for (int cmp = 0; cmp < t.ncomp; ++cmp)
              for (int cm2 = 0; cm2 < t.ncomp; ++cm2) {
                auto [k, l] = pairs[cm2];
                double fold = (k == l) ? 1.0 : 2.0;
                macc[cmp][cm2] += chn * fold * yn[k] * yn[l] * wacc[cmp];
              }
        }
        std::size_t f = t.offset_flat(z);
        for (int cmp = 0; cmp < t.ncomp; ++cmp) {
          t.w[cmp * cells + f] = wacc[cmp];
          t.wsum[cmp] += wacc[cmp];
          for (int cm2 = 0; cm2 < t.ncomp; ++cm2) t.model[cmp][cm2] += macc[cmp][cm2];
        }
      }
  return t;
}

// Second difference u(x+y) + u(x-y) - 2 u(x); off-lattice points go through
// interpolation or the exterior model.
inline double second_difference(const GridFunction& u, const Vec& x, const Vec& y) {
  int n = u.dom.n;
  return u(vadd(x, y, n)) + u(vsub(x, y, n)) - 2 * u(x);
}

// Finite-difference hessian surrogate at a lattice point, packed symmetric.
inline void fd_hessian(const GridFunction& u, const Idx& xi, double* D) {
  const int n = u.dom.n;
  const double h = u.dom.h;
  const Vec x = u.dom.coords(xi);
  auto pairs = sym_pairs(n);
  double axis[3] = {0, 0, 0};
  for (int d = 0; d < n; ++d) {
    Vec e{0, 0, 0};
    e[d] = h;
    axis[d] = second_difference(u, x, e);
  }
  int ncomp = sym_comp_count(n);
  for (int c = 0; c < ncomp; ++c) {
    auto [i, j] = pairs[c];
    if (i == j) {
      D[c] = axis[i] / (h * h);
    } else {
      Vec e{0, 0, 0};
      e[i] = h;
      e[j] = h;
      D[c] = (second_difference(u, x, e) - axis[i] - axis[j]) / (2 * h * h);
    }
  }
}

struct KernelMoment {
  std::array<double, 9> H{};  // symmetric n x n, row-major
  Vec x{};
  double near_field_radius = 0;
  double tail_estimate = 0;
  bool nonclassical_point = false;
};

// Assembles H(x) = int delta(u,x,y) (y o y)/|y|^{n+sigma+2} dy by
// singularity subtraction: the local quadratic model integrates in closed
// form over the chi-ball, the remainder over the cell table, and the far
// field uses the exterior constant analytically.
inline KernelMoment kernel_moment(const GridFunction& u, const Idx& xi,
                                  const MomentTable& t) {
  const int n = u.dom.n;
  const double h = u.dom.h;
  const int ncomp = t.ncomp;
  KernelMoment km;
  km.x = u.dom.coords(xi);
  km.near_field_radius = t.rchi;

  double D[6] = {0};
  fd_hessian(u, xi, D);

  // crude regularity probe: the surrogate at doubled spacing should agree
  {
    double Dcheck[6] = {0};
    const Vec x = km.x;
    auto pairs = sym_pairs(n);
    double axis[3];
    for (int d = 0; d < n; ++d) {
      Vec e{0, 0, 0};
      e[d] = 2 * h;
      axis[d] = second_difference(u, x, e);
    }
    for (int c = 0; c < ncomp; ++c) {
      auto [i, j] = pairs[c];
      if (i == j) {
        Dcheck[c] = axis[i] / (4 * h * h);
      } else {
        Vec e{0, 0, 0};
        e[i] = 2 * h;
        e[j] = 2 * h;
        Dcheck[c] = (second_difference(u, x, e) - axis[i] - axis[j]) / (8 * h * h);
      }
    }
    double scale = 0, diff = 0;
    for (int c = 0; c < ncomp; ++c) {
      scale = std::max(scale, std::abs(D[c]));
      diff = std::max(diff, std::abs(D[c] - Dcheck[c]));
    }
    km.nonclassical_point = scale > 0 && diff > 0.5 * scale;
  }

  const double far = u.ext.far_value;
  const double ux = u.at(xi);

  double acc[6] = {0};
  Idx z{0, 0, 0};
  int z2lo = (n == 3) ? -t.K : 0, z2hi = (n == 3) ? t.K : 0;
  for (z[0] = -t.K; z[0] <= t.K; ++z[0])
    for (z[1] = -t.K; z[1] <= t.K; ++z[1])
      for (z[2] = z2lo; z[2] <= z2hi; ++z[2]) {
        if (z[0] == 0 && z[1] == 0 && z[2] == 0) continue;
        std::size_t f = t.offset_flat(z);
        // the diagonal weights sum to the positive rho^2 moment inside the
        // cutoff; all zero happens only for cells outside it. (Off-axis
        // single-sample cells can have individual components exactly zero.)
        double wd = t.w[f];
        for (int dc = 1; dc < n; ++dc)
          wd += t.w[std::size_t(dc * (2 * n + 1 - dc) / 2) * t.wstride_ + f];
        if (wd == 0) continue;
        Vec y{z[0] * h, z[1] * h, n == 3 ? z[2] * h : 0.0};
        Vec xp = vadd(km.x, y, n), xm = vsub(km.x, y, n);
        double up = u.dom.in_box_point(xp) ? u(xp) : u.ext.at(xp);
        double um = u.dom.in_box_point(xm) ? u(xm) : u.ext.at(xm);
        double delta = up + um - 2 * ux;
        for (int c = 0; c < ncomp; ++c) acc[c] += delta * t.w[c * t.wstride_ + f];
      }

  auto pairs = sym_pairs(n);
  double trD = 0;
  for (int c = 0; c < ncomp; ++c) {
    auto [i, j] = pairs[c];
    if (i == j) trD += D[c];
  }
  double tail = 2 * (far - ux) * t.tail_scalar;
  km.tail_estimate = std::abs(tail);

  for (int c = 0; c < ncomp; ++c) {
    auto [i, j] = pairs[c];
    double g = t.om4 * ((i == j ? trD : 0.0) + 2 * D[c]) * t.chi_radial;
    double corr = 0;
    for (int c2 = 0; c2 < ncomp; ++c2) corr += t.model[c][c2] * D[c2];
    double v = g + acc[c] - corr + (i == j ? tail : 0.0);
    km.H[i * 3 + j] = v;
    km.H[j * 3 + i] = v;
  }
  return km;
}

}  // namespace abp

#endif
