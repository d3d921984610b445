#ifndef ABP_RIESZ_HPP
#define ABP_RIESZ_HPP

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "abp/grid.hpp"
#include "abp/kernel.hpp"
#include "abp/special.hpp"

namespace abp {

// Riesz potential P(x) = A(2-sigma) * int Gamma(y) |x-y|^{-n+2-sigma} dy for
// a compactly supported Gamma <= 0. The kernel exponent -n+2-sigma is
// integrable; the cell containing x is handled by an exact polar integral
// over the cell's inscribed ball plus a midpoint rule on the leftover corner
// region, and the first shells around x are subsampled.
inline double riesz(const GridFunction& gamma, double sigma, const Vec& x) {
  if (!(sigma > 1) || !(sigma < 2))
    throw std::invalid_argument("riesz: sigma must be in (1,2)");
  const Domain& dom = gamma.dom;
  const int n = dom.n;
  const double h = dom.h;
  const double expo = -double(n) + 2 - sigma;  // kernel = rho^expo
  const double hn = std::pow(h, n);

  // nearest lattice node to x (the singular cell)
  Idx cx{0, 0, 0};
  for (int d = 0; d < n; ++d) cx[d] = int(std::lround(x[d] / h));

  double acc = 0;
  dom.for_each([&](const Idx& i) {
    double gv = gamma.at(i);
    if (gv == 0) return;
    Vec y = dom.coords(i);
    Vec dz = vsub(y, x, n);
    double rho = norm2(dz, n);
    int cells = 0;
    for (int d = 0; d < n; ++d)
      cells = std::max(cells, std::abs(i[d] - cx[d]));
    if (cells == 0) {
      // exact polar integral over the inscribed ball of radius h/2:
      //   int_{B_{h/2}} rho^expo = |S^{n-1}| (h/2)^{n+expo} / (n+expo)
      double rin = h / 2;
      double wball = surface_measure(n) * std::pow(rin, n + expo) / (n + expo);
      // leftover corner volume, kernel frozen midway between the inradius
      // and the cell's circumradius
      double rout = rin * std::sqrt(double(n));
      double rmid = (rin + rout) / 2;
      double wcorner = (hn - std::pow(rin, n) * surface_measure(n) / n) *
                       std::pow(rmid, expo);
      acc += gv * (wball + wcorner);
    } else if (cells <= 2) {
      // subsample the strongly varying kernel over the cell
      const int s = 9;
      double w = 0;
      double cw = hn / std::pow(double(s), n);
      int lo2 = n == 3 ? 0 : 0, hi2 = n == 3 ? s - 1 : 0;
      for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b)
          for (int c = lo2; c <= hi2; ++c) {
            Vec q{y[0] + ((a + 0.5) / s - 0.5) * h,
                  y[1] + ((b + 0.5) / s - 0.5) * h,
                  n == 3 ? y[2] + ((c + 0.5) / s - 0.5) * h : 0.0};
            double r = norm2(vsub(q, x, n), n);
            w += std::pow(r, expo) * cw;
          }
      acc += gv * w;
    } else {
      acc += gv * std::pow(rho, expo) * hn;
    }
  });
  return calA(2 - sigma, n) * acc;
}

// Rings r_l = 4^{-l/n} r0 around x0 and the measures of
// A_l = {Gamma <= Gamma(x0)/2} cap (Q_{r_l}(x0) \ Q_{r_{l+1}}(x0)),
// where Q_r is the cube of side r. The exact ratio gives
// |Q_{r_{l+1}}| = r_l^n / 4, the bookkeeping behind the ring bound.
struct Ring {
  int l = 0;
  double r = 0;        // r_l
  double measure = 0;  // |A_l|
  double quarter = 0;  // r_l^n / 4
  bool pass = false;   // measure >= quarter
};

struct RingDecomposition {
  Vec x0{};
  double r0 = 0;
  double gamma_x0 = 0;
  std::vector<Ring> rings;
};

inline RingDecomposition ring_decomposition(const GridFunction& gamma,
                                            const Vec& x0, double r0,
                                            int levels) {
  const Domain& dom = gamma.dom;
  const int n = dom.n;
  RingDecomposition rd;
  rd.x0 = x0;
  rd.r0 = r0;
  rd.gamma_x0 = gamma(x0);
  double half = rd.gamma_x0 / 2;
  for (int l = 0; l < levels; ++l) {
    double rl = std::pow(4.0, -double(l) / n) * r0;
    double rn = std::pow(4.0, -double(l + 1) / n) * r0;
    Region outer = cube(rl, x0);
    Region inner = cube(rn, x0);
    Region ringr = [outer, inner](const Vec& p) { return outer(p) && !inner(p); };
    double meas = 0;
    const double cell = std::pow(dom.h, n);
    dom.for_each([&](const Idx& i) {
      Vec p = dom.coords(i);
      if (ringr(p) && gamma.at(i) <= half) meas += cell;
    });
    Ring r;
    r.l = l;
    r.r = rl;
    r.measure = meas;
    r.quarter = std::pow(rl, n) / 4;
    r.pass = meas >= r.quarter;
    rd.rings.push_back(r);
  }
  return rd;
}

struct NotNegativeAtCenter : std::runtime_error {
  NotNegativeAtCenter() : std::runtime_error("NotNegativeAtCenter") {}
};

// The ring chain: whenever |A_l| >= r_l^n/4 for all rings, the potential obeys
//   -P(x0) >= A(2-sigma) (-Gamma(x0)/2) sum_l |A_l| (sqrt(n)/2 r_l)^{2-sigma-n}
// because every point of A_l lies within sqrt(n)/2 * r_l of x0 and Gamma <=
// Gamma(x0)/2 there. The report compares the chain value and the c0-form
// lower bound against the directly computed -P(x0).
struct RingReport {
  RingDecomposition rings;
  double chain_value = 0;     // partial-sum lower bound for -P(x0)
  double c0_bound = 0;        // c0 * (-Gamma(x0)) * r0^{2-sigma}
  double minus_P_direct = 0;  // -P(x0) by quadrature
  bool hypothesis_all = false;
  bool chain_holds = false;   // -P >= chain_value (when hypothesis holds)
  bool c0_holds = false;      // -P >= c0_bound  (when hypothesis holds)
};

inline RingReport verify_ring_bound(const GridFunction& gamma,
                                    const RingDecomposition& rd, double sigma) {
  if (!(rd.gamma_x0 < 0)) throw NotNegativeAtCenter();
  const int n = gamma.dom.n;
  RingReport rep;
  rep.rings = rd;
  const double A = calA(2 - sigma, n);
  const double geom = std::pow(std::sqrt(double(n)) / 2, 2 - sigma - double(n));
  double sum = 0;
  bool all = true;
  for (const Ring& r : rd.rings) {
    all = all && r.pass;
    sum += r.measure * std::pow(r.r, 2 - sigma - double(n));
  }
  rep.hypothesis_all = all;
  rep.chain_value = A * geom * (-rd.gamma_x0 / 2) * sum;
  rep.c0_bound = c0_of(n) * (-rd.gamma_x0) * std::pow(rd.r0, 2 - sigma);
  rep.minus_P_direct = -riesz(gamma, sigma, rd.x0);
  rep.chain_holds = rep.minus_P_direct >= rep.chain_value;
  rep.c0_holds = rep.minus_P_direct >= rep.c0_bound;
  return rep;
}

inline void save_ring_csv(const RingReport& rep, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("save_ring_csv: cannot open " + path);
  std::fprintf(fp, "l,r_l,measure,quarter,pass\n");
  for (const Ring& r : rep.rings.rings)
    std::fprintf(fp, "%d,%.17g,%.17g,%.17g,%d\n", r.l, r.r, r.measure,
                 r.quarter, int(r.pass));
  std::fclose(fp);
}

}  // namespace abp

#endif
