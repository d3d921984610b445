#ifndef ABP_SUPERSOLUTION_HPP
#define ABP_SUPERSOLUTION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "abp/ledger.hpp"
#include "abp/operators.hpp"

namespace abp {

struct SchemeDiverged : std::runtime_error {
  SchemeDiverged()
      : std::runtime_error("SchemeDiverged: pseudo-time iterate escaped the "
                           "forcing scale; reduce cfl") {}
};

struct ZeroForcing : std::runtime_error {
  ZeroForcing() : std::runtime_error("ZeroForcing: normalization needs g != 0") {}
};

// A grid supersolution of M^- u <= f in B_1, u >= 0 outside B_1, together
// with its residual certificate (M^- u - f)^+ on the interior lattice.
struct Supersolution {
  GridFunction u;
  GridFunction f;
  double sigma = 1.5;
  PucciEllipticity ell;
  double radius = 1.0;       // Dirichlet ball radius (B_1 in the estimates)
  GridFunction residual;     // (M^- u - f)^+ at lattice points of the ball
  double max_residual = 0;   // sup of the residual grid
  bool exterior_ok = false;  // u >= 0 at every lattice point outside the ball
  double tol = 0;
  int iterations = 0;
  bool converged = false;

  bool certified() const { return exterior_ok && max_residual <= tol; }
};

// M^- u at the interior lattice points of B_radius, applied through a
// callback fn(idx, value); a single moment-field evaluation per call.
template <class Fn>
inline void for_each_m_minus(const MomentFieldPlan& plan, const GridFunction& u,
                             const PucciEllipticity& ell, double sigma, Fn&& fn,
                             double radius = 1.0) {
  const Domain& dom = u.dom;
  const Region interior = ball(radius);
  MomentField mf = plan.evaluate(u);
  mf.for_each([&](const Idx& x) {
    if (!dom.in_box(x) || !interior(dom.coords(x))) return;
    auto eigs = sym_eigenvalues(mf.H(x), mf.n);
    fn(x, (2 - sigma) * pucci_extremal_eigs(eigs, ell, ExtremalMode::Min));
  });
}

// Monotone pseudo-time solution of the Dirichlet problem
//   M^- u = f in B_radius,  u = 0 outside B_radius.
// Explicit iteration u <- u + tau (M^- u - f) on interior lattice points.
// tau is tied to the kernel's diagonal sensitivity so the update is a convex
// combination: a uniform shift of u(x) by delta moves every diagonal moment
// by diag_coefficient * delta, and the extremal assignment weights the trace
// by at most n * Lambda, so cfl < 1 keeps the scheme monotone (larger cfl is
// permitted but can diverge). The converged field solves the equation to tol,
// hence is a residual-certified supersolution. The smooth error mode
// contracts slowly (1 - O(h^sigma) per sweep), so a safeguarded Aitken
// extrapolation is attempted periodically: the whole-field step is kept only
// when a verification sweep confirms the residual did not grow.
inline Supersolution solve_dirichlet(const GridFunction& f, double sigma,
                                     const PucciEllipticity& ell, double cfl = 0.9,
                                     double tol = 0, double radius = 1.0,
                                     int max_iter = 200000, int aitken_period = 50) {
  if (!(cfl > 0)) throw std::invalid_argument("solve_dirichlet: cfl must be positive");
  const Domain& dom = f.dom;
  const int n = dom.n;
  const double h = dom.h;
  const Region interior = ball(radius);

  double fscale = linf_norm(f, interior);
  dom.for_each([&](const Idx& i) {
    if (interior(dom.coords(i)) && f.at(i) < 0)
      throw std::invalid_argument("solve_dirichlet: f must be >= 0 on the ball");
  });
  if (tol <= 0) tol = 1e-6 * std::max(fscale, 1.0);

  Supersolution s;
  s.f = f;
  s.sigma = sigma;
  s.ell = ell;
  s.radius = radius;
  s.tol = tol;
  s.u = GridFunction(dom, 0.0);
  s.residual = GridFunction(dom, 0.0);

  const int V = std::min(dom.radius_cells(), int(std::ceil(radius / h)));
  // u vanishes outside B_radius, so once the truncation ball around any
  // interior point covers B_radius the constant-exterior tail correction is
  // exact.
  const double cutoff = 2.0 * radius + h;
  MomentFieldPlan plan(n, h, sigma, V, cutoff);
  const double kappa = (2 - sigma) * ell.n * ell.Lambda * plan.diag_coefficient();
  const double tau = cfl / kappa;
  const double escape = 1e3 * std::max(fscale, tol);

  if (fscale == 0) {
    // f == 0: zero is the exact solution with zero exterior data
    s.converged = true;
    s.exterior_ok = true;
    s.iterations = 0;
    return s;
  }

  // one explicit sweep; returns the pre-update equation residual sup-norm
  auto sweep = [&](GridFunction& w) -> double {
    double worst = 0;
    for_each_m_minus(plan, w, ell, sigma, [&](const Idx& x, double mv) {
      double r = mv - f.at(x);
      worst = std::max(worst, std::abs(r));
      w.at(x) += tau * r;
    }, radius);
    return worst;
  };

  GridFunction prev = s.u, dold;
  bool have_dold = false;
  int it = 0;
  double worst = fscale;
  while (it < max_iter && worst >= tol) {
    worst = sweep(s.u);
    ++it;
    if (linf_norm(s.u, everywhere()) > escape) throw SchemeDiverged();
    if (aitken_period > 0 && it % aitken_period == 0 && worst >= tol) {
      GridFunction dnew(dom, 0.0);
      double nn = 0, dd = 0;
      dom.for_each([&](const Idx& i) {
        dnew.at(i) = s.u.at(i) - prev.at(i);
        nn += dnew.at(i) * dnew.at(i);
        if (have_dold) dd += dold.at(i) * dold.at(i);
      });
      if (have_dold && dd > 0) {
        double q = std::sqrt(nn / dd);
        if (q > 0.2 && q < 0.999) {
          double fac = q / (1 - q);
          GridFunction trial = s.u;
          dom.for_each([&](const Idx& i) { trial.at(i) += fac * dnew.at(i); });
          double wtrial = sweep(trial);
          ++it;
          if (wtrial < worst) {
            s.u = trial;
            worst = wtrial;
          }
        }
      }
      prev = s.u;
      dold = dnew;
      have_dold = true;
    }
  }
  s.iterations = it;
  s.converged = worst < tol;

  // residual certificate and exterior check from the final iterate
  for_each_m_minus(plan, s.u, ell, sigma, [&](const Idx& x, double mv) {
    s.residual.at(x) = std::max(mv - f.at(x), 0.0);
    s.max_residual = std::max(s.max_residual, s.residual.at(x));
  }, radius);
  s.exterior_ok = true;
  dom.for_each([&](const Idx& i) {
    if (!interior(dom.coords(i)) && s.u.at(i) < 0) s.exterior_ok = false;
  });
  return s;
}

// g_hat = f^+ restricted to a dilation of {u <= 0} intersected with B_1. The
// dilation margin (in grid cells) models the continuous-support mollification;
// the admissible infimum is approached by shrinking the margin.
inline GridFunction hat_g(const GridFunction& u, const GridFunction& f, double margin) {
  const Domain& dom = u.dom;
  const Region b1 = ball(1.0);
  std::vector<char> core(dom.total(), 0);
  dom.for_each([&](const Idx& i) {
    if (b1(dom.coords(i)) && u.at(i) <= 0) core[dom.flat(i)] = 1;
  });
  const int m = int(std::lround(margin / dom.h));
  GridFunction g(dom, 0.0);
  const int N = dom.radius_cells();
  dom.for_each([&](const Idx& i) {
    bool near = false;
    Idx j = i;
    if (dom.n == 2) {
      for (j[0] = std::max(i[0] - m, -N); !near && j[0] <= std::min(i[0] + m, N); ++j[0])
        for (j[1] = std::max(i[1] - m, -N); j[1] <= std::min(i[1] + m, N); ++j[1])
          if (core[dom.flat(j)]) { near = true; break; }
    } else {
      for (j[0] = std::max(i[0] - m, -N); !near && j[0] <= std::min(i[0] + m, N); ++j[0])
        for (j[1] = std::max(i[1] - m, -N); !near && j[1] <= std::min(i[1] + m, N); ++j[1])
          for (j[2] = std::max(i[2] - m, -N); j[2] <= std::min(i[2] + m, N); ++j[2])
            if (core[dom.flat(j)]) { near = true; break; }
    }
    if (near) g.at(i) = std::max(f.at(i), 0.0);
  });
  return g;
}

// Three shrinking mollification margins {2h, h, 0}.
inline std::vector<GridFunction> hat_g_levels(const GridFunction& u, const GridFunction& f) {
  std::vector<GridFunction> out;
  for (double m : {2.0 * u.dom.h, u.dom.h, 0.0}) out.push_back(hat_g(u, f, m));
  return out;
}

// Scalar inputs of the rescaling step, in log space because the schedule
// constants overflow/underflow linear doubles for certified barrier data.
struct ScaleInputs {
  double log_L = 0;      // L_{i-1}
  double log_M3 = 0;
  double log_M1 = 0;
  double log_k0 = 0;

  static ScaleInputs from_ledger(const ConstantLedger& led, int i, double sigma) {
    ScaleInputs in;
    in.log_L = led.Li(i - 1, sigma).log_Li;
    in.log_M3 = led.log_M3;
    in.log_M1 = led.log_M1;
    in.log_k0 = led.log_k0;
    return in;
  }

  // log(M1^{k0}) = k0 * log M1; saturates to +inf when k0 is beyond double.
  double log_M1_pow_k0() const {
    if (log_M1 <= 0) return 0.0;
    double l = log_k0 + std::log(log_M1);
    return l > 709.0 ? std::numeric_limits<double>::infinity() : std::exp(l);
  }
};

struct NormalizedPair {
  GridFunction u_r;  // (u(x0 + r x) - u(x0)) / N0 on the rescaled lattice
  GridFunction h_r;  // r^sigma g(x0 + r x) / N0
  double N0 = 0;     // linear value; may over/underflow
  double log_N0 = 0; // authoritative
  double g_inf = 0;  // sup of the rescaled-lattice samples of g
  double g_n = 0;    // L^n norm of g in the original variable, rescaled lattice quadrature
};

inline double logsumexp2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Lemma-3 normalization around x0 at scale r:
//   N0 = (r^sigma / L_{i-1}) ||g||_inf + (r^{sigma-1} / M3) ||g||_n,
//   u_r(x) = (u(x0 + r x) - u(x0)) / N0,  h_r(x) = r^sigma g(x0 + r x) / N0.
// Norms of g are taken on the rescaled lattice itself so the normalization
// bounds ||h_r||_inf <= L_{i-1} and ||h_r||_n <= M3 hold exactly in the
// discrete norms. N0 is assembled in log space.
inline NormalizedPair normalize(const GridFunction& u, const GridFunction& g,
                                const Vec& x0, double r, const ScaleInputs& in,
                                double sigma) {
  if (!(r > 0) || !(r < 1)) throw std::invalid_argument("normalize: r must be in (0,1)");
  const Domain& dom = u.dom;
  const int n = dom.n;

  // rescaled lattice: same mesh width, domain big enough for Q_3 / B_3 work
  Domain rdom(n, dom.h, dom.half_extent);

  NormalizedPair out;
  GridFunction gr(rdom, 0.0);
  double acc_n = 0;
  const double hn = std::pow(rdom.h, n);
  rdom.for_each([&](const Idx& i) {
    Vec x = rdom.coords(i);
    Vec y{0, 0, 0};
    for (int d = 0; d < n; ++d) y[d] = x0[d] + r * x[d];
    double gv = g(y);
    gr.at(i) = gv;
    out.g_inf = std::max(out.g_inf, std::abs(gv));
    acc_n += std::pow(std::abs(gv), n) * hn;
  });
  // ||g||_n in the original variable: dy = r^n dx
  out.g_n = r * std::pow(acc_n, 1.0 / n);
  if (out.g_inf == 0) throw ZeroForcing();

  const double log_r = std::log(r);
  out.log_N0 = logsumexp2(sigma * log_r + std::log(out.g_inf) - in.log_L,
                          (sigma - 1) * log_r + std::log(out.g_n) - in.log_M3);
  out.N0 = std::exp(out.log_N0);

  const double u0 = u(x0);
  out.u_r = GridFunction(rdom, 0.0);
  out.h_r = GridFunction(rdom, 0.0);
  rdom.for_each([&](const Idx& i) {
    Vec x = rdom.coords(i);
    Vec y{0, 0, 0};
    for (int d = 0; d < n; ++d) y[d] = x0[d] + r * x[d];
    out.u_r.at(i) = (u(y) - u0) * std::exp(-out.log_N0);
    out.h_r.at(i) = gr.at(i) * std::exp(sigma * log_r - out.log_N0);
  });
  return out;
}

// The three candidate radii of the Lemma-3 case split, in log space:
//   s1 = (-u(x0) M3 / (4 M1^{k0} ||g||_n))^{1/(sigma-1)}
//   s2 = (-u(x0) L_{i-1} / (4 M1^{k0} ||g||_inf))^{1/sigma}
//   r0 = min{s1, s2, 1}
struct RadiiReport {
  double log_s1 = 0, log_s2 = 0, log_r0 = 0;
  double s1 = 0, s2 = 0, r0 = 0;
  int branch = 0;  // 1: s1 attains the min, 2: s2, 3: the unit cap
};

inline RadiiReport radii(double u_at_x0, double g_n, double g_inf, double sigma,
                         const ScaleInputs& in) {
  if (!(u_at_x0 < 0)) throw std::invalid_argument("radii: need u(x0) < 0");
  if (!(g_n > 0) || !(g_inf > 0)) throw std::invalid_argument("radii: need positive norms");
  RadiiReport rep;
  const double log_neg_u = std::log(-u_at_x0);
  const double pow_term = in.log_M1_pow_k0();
  rep.log_s1 = (log_neg_u + in.log_M3 - std::log(4.0) - pow_term - std::log(g_n)) /
               (sigma - 1);
  rep.log_s2 = (log_neg_u + in.log_L - std::log(4.0) - pow_term - std::log(g_inf)) /
               sigma;
  rep.log_r0 = std::min({rep.log_s1, rep.log_s2, 0.0});
  rep.s1 = std::exp(rep.log_s1);
  rep.s2 = std::exp(rep.log_s2);
  rep.r0 = std::exp(rep.log_r0);
  if (rep.log_r0 == rep.log_s1)
    rep.branch = 1;
  else if (rep.log_r0 == rep.log_s2)
    rep.branch = 2;
  else
    rep.branch = 3;
  return rep;
}

// log(M1^{k0} N0): the pivotal quantity of the proof. For r <= r0 it is
// <= log(-u(x0)/2).
inline double log_pivot(double log_N0, const ScaleInputs& in) {
  return in.log_M1_pow_k0() + log_N0;
}

// ---------------------------------------------------------------------------
// Analytic catalog: radially symmetric profiles with known sign structure.
// Each entry takes f := M^- u on B_1, so the residual certificate is zero by
// construction and harness tests decouple from solver convergence.
// ---------------------------------------------------------------------------

inline std::vector<std::string> catalog_names() {
  return {"zero", "neg-bump", "neg-dome", "offset-bump"};
}

inline Supersolution catalog_instance(const std::string& name, const Domain& dom,
                                      double sigma, const PucciEllipticity& ell) {
  Supersolution s;
  s.sigma = sigma;
  s.ell = ell;
  s.u = GridFunction(dom, 0.0);
  const int n = dom.n;
  if (name == "zero") {
    // u == 0 identically
  } else if (name == "neg-bump") {
    s.u.fill([&](const Vec& x) {
      double r2 = 0;
      for (int d = 0; d < n; ++d) r2 += x[d] * x[d];
      double t = 1 - r2;
      return t > 0 ? -t * t : 0.0;
    });
  } else if (name == "neg-dome") {
    s.u.fill([&](const Vec& x) {
      double r2 = 0;
      for (int d = 0; d < n; ++d) r2 += x[d] * x[d];
      double t = 1 - r2;
      return t > 0 ? -t * t * t : 0.0;
    });
  } else if (name == "offset-bump") {
    s.u.fill([&](const Vec& x) {
      double r2 = 0;
      Vec c{0.3, -0.2, 0};
      for (int d = 0; d < n; ++d) {
        double t = x[d] - c[d];
        r2 += t * t;
      }
      double t = 0.25 - r2;  // supported in B_{1/2}(c) subset B_1
      return t > 0 ? -16 * t * t : 0.0;
    });
  } else {
    throw std::invalid_argument("catalog_instance: unknown name " + name);
  }

  // f := M^- u on B_1, clamped up to 0 so the Theorem-1 hypothesis f >= 0
  // holds; clamping only enlarges f, preserving M^- u <= f.
  s.f = GridFunction(dom, 0.0);
  s.residual = GridFunction(dom, 0.0);
  const Region interior = ball(1.0);
  const int V = std::min(dom.radius_cells(), int(std::ceil(1.0 / dom.h)));
  MomentFieldPlan plan(n, dom.h, sigma, V, 2.0 + dom.h);
  for_each_m_minus(plan, s.u, ell, sigma, [&](const Idx& x, double mv) {
    s.f.at(x) = std::max(mv, 0.0);
  });
  s.exterior_ok = true;
  dom.for_each([&](const Idx& i) {
    if (!interior(dom.coords(i)) && s.u.at(i) < 0) s.exterior_ok = false;
  });
  s.tol = 1e-12;
  s.converged = true;
  s.max_residual = 0;
  return s;
}

}  // namespace abp

#endif
