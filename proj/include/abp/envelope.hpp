#ifndef ABP_ENVELOPE_HPP
#define ABP_ENVELOPE_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "abp/operators.hpp"

namespace abp {

struct EnvelopeResult {
  GridFunction gamma;              // the envelope; zero outside B_3
  GridFunction residual_Esigma;    // E_sigma Gamma on the working window
  GridFunction residual_obstacle;  // (-u^-) - Gamma
  std::vector<char> contact;       // flat-indexed: Gamma touches the obstacle
  int iterations = 0;
  bool converged = false;
  double tol = 0;
  double max_residual = 0;  // complementarity residual, obstacle units

  bool in_contact(const Idx& i) const { return contact[gamma.dom.flat(i)] != 0; }
};

struct EnvelopeConfig {
  double tol = 0;          // 0: default 1e-8 * ||u^-||_inf
  int max_iter = 100000;
  double relax = 0.45;     // under-relaxation factor of the scaled update
  double radius = 3.0;     // envelope lives on B_radius
  double cutoff = 0;       // kernel truncation; 0: default for the domain
  int aitken_period = 50;  // sweeps between extrapolation attempts; 0 disables
};

// Fractional convex envelope of u: the solution of the obstacle problem
//   min{ E_sigma Gamma, (-u^-) - Gamma } = 0 in B_3,  Gamma = 0 outside.
// Projected relaxation: Gamma starts at the obstacle -u^- and each sweep
// applies Gamma <- min(obstacle, Gamma + relax * E_sigma Gamma / kappa),
// where kappa is the sensitivity of E_sigma to the center value, so the
// update is measured in obstacle units. Where E_sigma < 0 the point is
// pushed down (restoring one-sided convexity); where E_sigma > 0 it relaxes
// up against the obstacle clamp. Fixed points satisfy the discrete
// complementarity system, certified a posteriori by the residual grids.
//
// relax must stay well below 1: E_sigma takes the minimal eigenvalue of the
// moment matrix, and where the two eigenvalues nearly cross, a full-strength
// sweep overshoots, flips the minimizing direction, and the iteration locks
// into a period-2 cycle instead of converging (observed directly at
// relax = 0.9; 0.45 is cycle-free with margin).
//
// The smooth error mode decays only like 1 - O((h/R)^sigma) per sweep, so
// every aitken_period sweeps the solver tries one Aitken step: it measures
// the per-block contraction q of the iterate differences and extrapolates
// the whole field by q/(1-q), clamped to the obstacle. The step is kept only
// if a verification sweep shows the residual did not grow, so the
// extrapolation cannot destabilize the projected iteration (5-6x fewer
// sweeps on the battery instances).
inline EnvelopeResult compute_envelope(const GridFunction& u, double sigma,
                                       const EnvelopeConfig& cfg = {}) {
  const Domain& dom = u.dom;
  const int n = dom.n;
  const double h = dom.h;

  // obstacle = -u^- = min(u, 0); zero exterior
  GridFunction obst(dom, 0.0);
  dom.for_each([&](const Idx& i) { obst.at(i) = std::min(u.at(i), 0.0); });

  double obst_scale = 0;
  dom.for_each([&](const Idx& i) { obst_scale = std::max(obst_scale, -obst.at(i)); });
  double tol = cfg.tol > 0 ? cfg.tol : 1e-8 * obst_scale;

  EnvelopeResult res;
  res.gamma = obst;  // Gamma^0 = obstacle
  res.tol = tol;

  const int V = std::min(dom.radius_cells(), int(std::ceil(cfg.radius / h)));
  // Gamma vanishes identically outside B_radius, so once the truncation ball
  // around any x in B_radius covers B_radius the constant-exterior tail
  // correction is exact and a larger cutoff buys nothing.
  const double cutoff = cfg.cutoff > 0 ? cfg.cutoff : 2 * cfg.radius + h;
  const Region inside = ball(cfg.radius);

  res.residual_Esigma = GridFunction(dom, 0.0);
  res.residual_obstacle = GridFunction(dom, 0.0);
  res.contact.assign(dom.total(), 0);

  MomentFieldPlan plan(n, h, sigma, V, cutoff);
  const double coef = fractional_hessian_coef(n, sigma);
  const double kappa = coef * plan.diag_coefficient();
  const double step = cfg.relax / kappa;

  if (obst_scale == 0) {
    // u >= 0: Gamma = 0 immediately (E_sigma 0 = 0 and the obstacle is 0)
    res.converged = true;
    res.iterations = 1;
  } else {
    // one projected sweep; returns the pre-update complementarity residual
    auto sweep = [&](GridFunction& f) -> double {
      MomentField mf = plan.evaluate(f);
      double worst = 0;
      mf.for_each([&](const Idx& x) {
        if (!dom.in_box(x)) return;
        Vec p = dom.coords(x);
        if (!inside(p)) return;
        double E = coef * sym_eigenvalues(mf.H(x), n).front();
        double slack = obst.at(x) - f.at(x);  // >= 0
        // complementarity residual in obstacle units
        double r = std::min(E / kappa, slack);
        worst = std::max(worst, std::abs(r));
        f.at(x) = std::min(obst.at(x), f.at(x) + step * E);
      });
      return worst;
    };

    const int period = cfg.aitken_period;
    GridFunction prev = res.gamma, dold;
    bool have_dold = false;
    int it = 0;
    double worst = obst_scale;
    while (it < cfg.max_iter && worst >= tol) {
      worst = sweep(res.gamma);
      ++it;
      if (period > 0 && it % period == 0 && worst >= tol) {
        GridFunction dnew(dom, 0.0);
        double nn = 0, dd = 0;
        dom.for_each([&](const Idx& i) {
          dnew.at(i) = res.gamma.at(i) - prev.at(i);
          nn += dnew.at(i) * dnew.at(i);
          if (have_dold) dd += dold.at(i) * dold.at(i);
        });
        if (have_dold && dd > 0) {
          double q = std::sqrt(nn / dd);
          if (q > 0.2 && q < 0.999) {
            double fac = q / (1 - q);
            GridFunction trial = res.gamma;
            dom.for_each([&](const Idx& i) {
              trial.at(i) = std::min(obst.at(i), trial.at(i) + fac * dnew.at(i));
            });
            double wtrial = sweep(trial);
            ++it;
            if (wtrial < worst) {
              res.gamma = trial;
              worst = wtrial;
            }
          }
        }
        prev = res.gamma;
        dold = dnew;
        have_dold = true;
      }
    }
    res.iterations = it;
    res.max_residual = worst;
    res.converged = worst < tol;
  }

  // final residual grids from the last iterate
  {
    MomentField mf = plan.evaluate(res.gamma);
    mf.for_each([&](const Idx& x) {
      if (!dom.in_box(x)) return;
      res.residual_Esigma.at(x) = coef * sym_eigenvalues(mf.H(x), n).front();
    });
  }
  dom.for_each([&](const Idx& i) {
    double slack = obst.at(i) - res.gamma.at(i);
    res.residual_obstacle.at(i) = slack;
    // contact means u = Gamma (the set Lemma 2 integrates over), which is
    // stricter than touching the truncated obstacle where u > 0
    if (inside(dom.coords(i)) && u.at(i) - res.gamma.at(i) <= 10 * tol)
      res.contact[dom.flat(i)] = 1;
  });
  return res;
}

struct EnvelopeSummary {
  double max_residual = 0;   // complementarity, obstacle units (reported)
  double mean_obstacle_gap = 0;
  double contact_measure = 0;
  int iterations = 0;
  bool converged = false;
};

inline EnvelopeSummary envelope_residuals(const EnvelopeResult& res) {
  EnvelopeSummary s;
  s.max_residual = res.max_residual;
  s.iterations = res.iterations;
  s.converged = res.converged;
  const Domain& dom = res.gamma.dom;
  const double cells = std::pow(dom.h, dom.n);
  double acc = 0;
  std::size_t cnt = 0;
  dom.for_each([&](const Idx& i) {
    acc += res.residual_obstacle.at(i);
    ++cnt;
    if (res.contact[dom.flat(i)]) s.contact_measure += cells;
  });
  s.mean_obstacle_gap = cnt ? acc / double(cnt) : 0.0;
  return s;
}

}  // namespace abp

#endif
