#ifndef ABP_HARNESS_HPP
#define ABP_HARNESS_HPP

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "abp/envelope.hpp"
#include "abp/riesz.hpp"
#include "abp/supersolution.hpp"

namespace abp {

// ---------------------------------------------------------------------------
// Experiment records and CSV emission
// ---------------------------------------------------------------------------

// One row of the sweep CSV. inf_u is inf_{B_1} u (nonpositive); ratio is
// (-inf_u) / ||f^+||_{L^n({u<=0})}; the gs bound carries the L^infty factor
// the main bound avoids. Flags are semicolon-separated so the row stays a
// valid CSV record.
struct ExperimentRecord {
  std::string instance;
  double sigma = 0;
  double h = 0;
  double inf_u = 0;
  double ln_sub = 0;      // ||f^+||_{L^n({u<=0})}
  double ln_contact = 0;  // ||f^+||_{L^n({u=Gamma})}
  double linf = 0;        // ||f^+||_{L^inf(B_1)}
  double gs_bound = 0;    // C0 ||f^+||inf^{(2-sigma)/2} ||f^+||n^{sigma/2}
  double main_bound = 0;  // eps0^{-1/n} ||f^+||_{L^n({u<=0})}; inf when eps0 subnormal
  double ratio = 0;       // 0 when the sublevel norm vanishes
  double p_inf = 0;       // Riesz potential of Gamma at the envelope minimizer
  std::string flags;

  void add_flag(const std::string& f) {
    if (!flags.empty()) flags += ";";
    flags += f;
  }
};

inline const char* csv_header() {
  return "instance,sigma,h,inf_u,ln_sub,ln_contact,linf,gs_bound,main_bound,ratio,p_inf,flags";
}

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string to_csv_row(const ExperimentRecord& r) {
  std::string out = r.instance;
  for (double v : {r.sigma, r.h, r.inf_u, r.ln_sub, r.ln_contact, r.linf,
                   r.gs_bound, r.main_bound, r.ratio, r.p_inf})
    out += "," + fmt_num(v);
  out += "," + r.flags;
  return out;
}

inline std::string records_to_csv(const std::vector<ExperimentRecord>& recs) {
  std::string out = csv_header();
  out += "\n";
  for (const auto& r : recs) {
    out += to_csv_row(r);
    out += "\n";
  }
  return out;
}

inline void save_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_text: cannot open " + path);
  f << body;
}

// ---------------------------------------------------------------------------
// The instance battery
// ---------------------------------------------------------------------------

struct BatteryInstance {
  std::string name;
  std::function<GridFunction(const Domain&)> make_f;
};

// f >= 0 supported in B_1. Spikes live on the single lattice cell nearest
// (1/4, 1/4); their L^n norm is height * h while the L^inf norm is the full
// height, which is what the L^inf-independence experiment drives apart.
inline std::vector<BatteryInstance> default_battery() {
  std::vector<BatteryInstance> b;
  const Region b1 = ball(1.0);
  b.push_back({"ones", [b1](const Domain& dom) {
                 GridFunction f(dom, 0.0);
                 dom.for_each([&](const Idx& i) {
                   if (b1(dom.coords(i))) f.at(i) = 1.0;
                 });
                 return f;
               }});
  b.push_back({"gauss", [b1](const Domain& dom) {
                 GridFunction f(dom, 0.0);
                 dom.for_each([&](const Idx& i) {
                   Vec x = dom.coords(i);
                   if (b1(x)) {
                     double r2 = 0;
                     for (int d = 0; d < dom.n; ++d) r2 += x[d] * x[d];
                     f.at(i) = std::exp(-4 * r2);
                   }
                 });
                 return f;
               }});
  b.push_back({"offbump", [](const Domain& dom) {
                 GridFunction f(dom, 0.0);
                 f.fill([&](const Vec& x) {
                   double r2 = 0;
                   Vec c{0.3, -0.2, 0};
                   for (int d = 0; d < dom.n; ++d) {
                     double t = x[d] - c[d];
                     r2 += t * t;
                   }
                   double t = 1 - r2 / 0.16;
                   return t > 0 ? t * t : 0.0;
                 });
                 return f;
               }});
  for (double height : {1.0, 10.0, 100.0, 1000.0}) {
    std::string name = "spike-" + fmt_num(height);
    b.push_back({name, [height](const Domain& dom) {
                   GridFunction f(dom, 0.0);
                   Idx i{0, 0, 0};
                   for (int d = 0; d < dom.n; ++d)
                     i[d] = int(std::lround(0.25 / dom.h));
                   f.at(i) = height;
                   return f;
                 }});
  }
  b.push_back({"checker", [b1](const Domain& dom) {
                 GridFunction f(dom, 0.0);
                 dom.for_each([&](const Idx& i) {
                   if (!b1(dom.coords(i))) return;
                   int s = 0;
                   for (int d = 0; d < dom.n; ++d) s += i[d];
                   f.at(i) = (s % 2 == 0) ? 1.0 : 0.0;
                 });
                 return f;
               }});
  return b;
}

inline std::vector<std::string> all_battery_names() {
  std::vector<std::string> names;
  for (const auto& b : default_battery()) names.push_back(b.name);
  return names;
}

inline const BatteryInstance& battery_by_name(const std::vector<BatteryInstance>& b,
                                              const std::string& name) {
  for (const auto& e : b)
    if (e.name == name) return e;
  throw std::invalid_argument("battery_by_name: unknown instance " + name);
}

// ---------------------------------------------------------------------------
// abp_ratio: one record from a certified supersolution + converged envelope
// ---------------------------------------------------------------------------

// The sublevel mask uses u <= 10 * envelope tol rather than u <= 0 so that
// the contact set (u = Gamma within the same tolerance) is contained in it
// structurally; at the continuum level both are {u <= 0}.
inline ExperimentRecord abp_ratio(const Supersolution& s, const EnvelopeResult& env,
                                  const ConstantLedger& led,
                                  bool with_potential = true) {
  ExperimentRecord rec;
  const Domain& dom = s.u.dom;
  const int n = dom.n;
  const double hn = std::pow(dom.h, n);
  const Region b1 = ball(s.radius);
  rec.sigma = s.sigma;
  rec.h = dom.h;
  rec.inf_u = region_inf(s.u, b1);

  const double slack = 10 * env.tol;
  double acc_sub = 0, acc_contact = 0, acc_full = 0;
  double gamma_min = 0;
  Idx gamma_argmin{0, 0, 0};
  dom.for_each([&](const Idx& i) {
    Vec x = dom.coords(i);
    if (!b1(x)) return;
    double fp = std::max(s.f.at(i), 0.0);
    rec.linf = std::max(rec.linf, fp);
    double fpn = std::pow(fp, n) * hn;
    acc_full += fpn;
    if (s.u.at(i) <= slack) acc_sub += fpn;
    if (env.contact[dom.flat(i)]) acc_contact += fpn;
    if (env.gamma.at(i) < gamma_min) {
      gamma_min = env.gamma.at(i);
      gamma_argmin = i;
    }
  });
  rec.ln_sub = std::pow(acc_sub, 1.0 / n);
  rec.ln_contact = std::pow(acc_contact, 1.0 / n);
  double ln_full = std::pow(acc_full, 1.0 / n);

  rec.gs_bound = led.C0 * std::pow(rec.linf, (2 - s.sigma) / 2) *
                 std::pow(ln_full, s.sigma / 2);
  rec.main_bound = std::exp(-led.log_eps0 / n) * rec.ln_sub;
  rec.ratio = rec.ln_sub > 0 ? -rec.inf_u / rec.ln_sub : 0.0;

  if (rec.ln_sub == 0 && rec.inf_u < -slack) rec.add_flag("comparison-violation");
  if (!s.certified()) rec.add_flag("not-certified");
  if (!env.converged) rec.add_flag("envelope-unconverged");
  if (rec.ln_contact == 0 && gamma_min < 0) rec.add_flag("contact-norm-zero");

  if (with_potential && gamma_min < 0)
    rec.p_inf = riesz(env.gamma, s.sigma, dom.coords(gamma_argmin));
  return rec;
}

// ---------------------------------------------------------------------------
// The sigma sweep
// ---------------------------------------------------------------------------

struct SweepConfig {
  std::vector<std::string> instances;  // empty: header-only CSV (no rows)
  std::vector<double> sigmas{1.9, 1.95, 1.99};
  std::vector<double> hs{1.0 / 16};
  double half_extent = 6.0;
  double cfl = 0.9;
  double solve_tol = 0;     // 0: solver default
  double envelope_tol = 0;  // 0: envelope default
  bool with_potential = true;
  std::string cache_dir;  // cache solved fields keyed by (f, sigma, h, cfl, tol)
  unsigned seed = 1;      // recorded for determinism contracts
};

inline std::uint64_t fnv_hash(const void* data, std::size_t len, std::uint64_t h0) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = h0;
  for (std::size_t k = 0; k < len; ++k) {
    h ^= p[k];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t field_key(const GridFunction& f, double sigma, double cfl,
                               double tol) {
  std::uint64_t h = 1469598103934665603ull;
  h = fnv_hash(f.values.data(), f.values.size() * sizeof(double), h);
  double params[4] = {sigma, f.dom.h, cfl, tol};
  return fnv_hash(params, sizeof params, h);
}

struct SweptInstance {
  std::string name;
  Supersolution s;
  EnvelopeResult env;
  ExperimentRecord rec;
  bool ok = false;
};

// Solve + envelope + record for one (instance, sigma, h) cell, with an
// optional disk cache of the solved fields.
inline SweptInstance run_instance(const BatteryInstance& inst, double sigma, double h,
                                  const ConstantLedger& led, const SweepConfig& cfg) {
  SweptInstance out;
  out.name = inst.name;
  out.rec.instance = inst.name;
  out.rec.sigma = sigma;
  out.rec.h = h;
  try {
    Domain dom(2, h, cfg.half_extent);
    GridFunction f = inst.make_f(dom);
    PucciEllipticity ell(2, led.lambda, led.Lambda, sigma);

    bool cached = false;
    std::string upath;
    if (!cfg.cache_dir.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "/u_%016llx.csv",
                    (unsigned long long)field_key(f, sigma, cfg.cfl, cfg.solve_tol));
      upath = cfg.cache_dir + buf;
      std::ifstream probe(upath);
      cached = probe.good();
    }
    if (cached) {
      out.s.u = load_csv(upath);
      out.s.f = f;
      out.s.sigma = sigma;
      out.s.ell = ell;
      out.s.tol = cfg.solve_tol > 0
                      ? cfg.solve_tol
                      : 1e-6 * std::max(linf_norm(f, ball(1.0)), 1.0);
      // re-certify the cached field instead of trusting the cache
      const int V = std::min(dom.radius_cells(), int(std::ceil(1.0 / h)));
      MomentFieldPlan plan(2, h, sigma, V, 2.0 + h);
      out.s.residual = GridFunction(dom, 0.0);
      for_each_m_minus(plan, out.s.u, ell, sigma, [&](const Idx& x, double mv) {
        out.s.residual.at(x) = std::max(mv - f.at(x), 0.0);
        out.s.max_residual = std::max(out.s.max_residual, out.s.residual.at(x));
      });
      out.s.exterior_ok = true;
      const Region b1 = ball(1.0);
      dom.for_each([&](const Idx& i) {
        if (!b1(dom.coords(i)) && out.s.u.at(i) < 0) out.s.exterior_ok = false;
      });
      out.s.converged = out.s.max_residual <= out.s.tol;
    } else {
      out.s = solve_dirichlet(f, sigma, ell, cfg.cfl, cfg.solve_tol);
      if (!upath.empty()) save_csv(out.s.u, upath);
    }

    EnvelopeConfig ecfg;
    ecfg.tol = cfg.envelope_tol;
    out.env = compute_envelope(out.s.u, sigma, ecfg);
    out.rec = abp_ratio(out.s, out.env, led, cfg.with_potential);
    out.rec.instance = inst.name;
    out.ok = true;
  } catch (const std::exception& e) {
    out.rec.add_flag(std::string("error:") + e.what());
  }
  return out;
}

// Deterministic map over (instance, sigma, h): instance-major, then sigma,
// then h; failures are recorded per row and the sweep continues.
inline std::vector<ExperimentRecord> sweep_sigma(const SweepConfig& cfg,
                                                 const ConstantLedger& led) {
  std::vector<BatteryInstance> battery = default_battery();
  std::vector<const BatteryInstance*> chosen;
  for (const auto& name : cfg.instances) chosen.push_back(&battery_by_name(battery, name));

  std::vector<ExperimentRecord> rows;
  for (const BatteryInstance* inst : chosen)
    for (double sigma : cfg.sigmas)
      for (double h : cfg.hs)
        rows.push_back(run_instance(*inst, sigma, h, led, cfg).rec);
  return rows;
}

// ---------------------------------------------------------------------------
// Remark-1 preprocessing: shrink the ball to B_{1-eta} over three eta levels
// (the translate-by-the-exterior-inf step is a no-op with zero exterior data).
// ---------------------------------------------------------------------------

inline std::vector<Supersolution> remark1_levels(const GridFunction& f, double sigma,
                                                 const PucciEllipticity& ell,
                                                 double cfl = 0.9, double tol = 0) {
  std::vector<Supersolution> out;
  for (double eta : {0.1, 0.05, 0.01})
    out.push_back(solve_dirichlet(f, sigma, ell, cfl, tol, 1.0 - eta));
  return out;
}

// ---------------------------------------------------------------------------
// Measure decay profile (the M1^k super-level cascade)
// ---------------------------------------------------------------------------

struct DecayEntry {
  long long k = 0;
  double measure = 0;    // |{v > M1^k} cap Q_1|
  double log_bound = 0;  // k * log(1 - mu eps0), exact in log space
};

struct DecayProfile {
  std::vector<DecayEntry> entries;
  bool hypotheses_met = false;
  std::string flags;
};

struct DecayInputs {
  double log_M1 = 0;
  double log_mu_eps = 0;  // log(mu eps0)
  double log_L = 0;       // forcing sup-norm cap
  double log_M3 = 0;      // forcing L^n-norm cap
};

// Super-level measures of v >= 0 against the geometric bound (1 - mu eps0)^k.
// The bound is carried in log space: log_bound = k * log1p(-mu eps0), which
// stays exact when mu eps0 is subnormal (the bound then degenerates to 1, and
// that degeneracy is reported, not hidden). Hypotheses (v >= 0,
// inf_{Q_3} v <= 1, forcing norm caps) are checked and flagged, and the
// profile is computed either way.
inline DecayProfile decay_profile(const GridFunction& v, const GridFunction& forcing,
                                  const DecayInputs& in, int kmax = 60) {
  DecayProfile out;
  bool nonneg = true;
  v.dom.for_each([&](const Idx& i) {
    if (v.at(i) < 0) nonneg = false;
  });
  double inf_q3 = region_inf(v, cube(3.0));
  double hinf = linf_norm(forcing, everywhere());
  double hn = ln_norm(forcing, everywhere());
  // a forcing norm that underflows to exact zero satisfies any cap
  bool inf_ok = hinf == 0 || std::log(hinf) <= in.log_L;
  bool n_ok = hn == 0 || std::log(hn) <= in.log_M3;
  out.hypotheses_met = nonneg && inf_q3 <= 1 && inf_ok && n_ok;
  if (!out.hypotheses_met) out.flags = "hypotheses-not-met";

  const double rate = std::log1p(-std::exp(in.log_mu_eps));
  const Region q1 = cube(1.0);
  for (int k = 0; k <= kmax; ++k) {
    DecayEntry e;
    e.k = k;
    double threshold = std::exp(double(k) * in.log_M1);  // +inf on overflow
    e.measure = superlevel_measure(v, threshold, q1);
    e.log_bound = double(k) * rate;
    out.entries.push_back(e);
    if (e.measure == 0 && k > 0) break;  // all later levels are empty too
  }
  return out;
}

inline DecayInputs decay_inputs(const ConstantLedger& led, int i, double sigma) {
  DecayInputs in;
  in.log_M1 = led.log_M1;
  in.log_mu_eps = led.log_mu + led.log_eps0;
  in.log_L = led.Li(i - 1, sigma).log_Li;
  in.log_M3 = led.log_M3;
  return in;
}

// measured <= bound for every entry, compared in log space.
inline bool decay_profile_holds(const DecayProfile& p) {
  for (const auto& e : p.entries) {
    if (e.measure == 0) continue;
    if (std::log(e.measure) > e.log_bound + 1e-12) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// PRE1 empirical constant
// ---------------------------------------------------------------------------

struct Pre1Row {
  double R = 0;
  double cbar = 0;  // max over the battery of (-inf_{B_R} P) / ||f||_{L^n(contact)}
  int flagged = 0;  // rows with zero contact norm and inf P < 0
};

struct Pre1Instance {
  const Supersolution* s = nullptr;
  const EnvelopeResult* env = nullptr;
};

// Empirical constant of the potential estimate: the Riesz potential of Gamma
// is evaluated on every lattice point of B_R, so keep the instances coarse.
inline std::vector<Pre1Row> pre1_empirical(const std::vector<Pre1Instance>& battery,
                                           const std::vector<double>& Rs = {1, 2, 3, 4}) {
  std::vector<Pre1Row> rows;
  for (double R : Rs) {
    Pre1Row row;
    row.R = R;
    for (const auto& inst : battery) {
      const Domain& dom = inst.s->u.dom;
      const int n = dom.n;
      const double hn = std::pow(dom.h, n);
      const Region bR = ball(R), b1 = ball(inst.s->radius);
      double infP = 0;
      dom.for_each([&](const Idx& i) {
        Vec x = dom.coords(i);
        if (!bR(x)) return;
        infP = std::min(infP, riesz(inst.env->gamma, inst.s->sigma, x));
      });
      double acc = 0;
      dom.for_each([&](const Idx& i) {
        if (!b1(dom.coords(i)) || !inst.env->contact[dom.flat(i)]) return;
        acc += std::pow(std::max(inst.s->f.at(i), 0.0), n) * hn;
      });
      double contact_norm = std::pow(acc, 1.0 / n);
      if (contact_norm > 0)
        row.cbar = std::max(row.cbar, -infP / contact_norm);
      else if (infP < 0)
        ++row.flagged;
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// SVG plots (static polyline charts generated from series data)
// ---------------------------------------------------------------------------

inline void save_svg_polylines(
    const std::string& path,
    const std::vector<std::vector<std::pair<double, double>>>& series,
    const std::vector<std::string>& labels, const std::string& title) {
  const double W = 640, H = 400, m = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!(xmax > xmin)) xmax = xmin + 1;
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (W - 2 * m); };
  auto py = [&](double y) { return H - m - (y - ymin) / (ymax - ymin) * (H - 2 * m); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' viewBox='0 0 " << W << " " << H << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>"
      << title << "</text>\n";
  svg << "<line x1='" << m << "' y1='" << H - m << "' x2='" << W - m << "' y2='"
      << H - m << "' stroke='black'/>\n";
  svg << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << H - m
      << "' stroke='black'/>\n";
  svg << "<text x='" << m << "' y='" << H - m + 16 << "' font-size='11'>"
      << fmt_num(xmin) << "</text>\n";
  svg << "<text x='" << W - m << "' y='" << H - m + 16
      << "' text-anchor='end' font-size='11'>" << fmt_num(xmax) << "</text>\n";
  svg << "<text x='" << m - 4 << "' y='" << H - m << "' text-anchor='end' font-size='11'>"
      << fmt_num(ymin) << "</text>\n";
  svg << "<text x='" << m - 4 << "' y='" << m << "' text-anchor='end' font-size='11'>"
      << fmt_num(ymax) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = colors[k % 8];
    svg << "<polyline fill='none' stroke='" << col << "' stroke-width='1.5' points='";
    for (auto [x, y] : series[k]) svg << px(x) << "," << py(y) << " ";
    svg << "'/>\n";
    if (k < labels.size())
      svg << "<text x='" << W - m - 4 << "' y='" << m + 16 * (k + 1)
          << "' text-anchor='end' font-size='12' fill='" << col << "'>" << labels[k]
          << "</text>\n";
  }
  svg << "</svg>\n";
  save_text(path, svg.str());
}

// ratio-vs-sigma chart, one polyline per instance, from sweep records.
inline void save_ratio_svg(const std::string& path,
                           const std::vector<ExperimentRecord>& recs) {
  std::map<std::string, std::vector<std::pair<double, double>>> by_inst;
  for (const auto& r : recs)
    if (r.flags.find("error") == std::string::npos)
      by_inst[r.instance].push_back({r.sigma, r.ratio});
  std::vector<std::vector<std::pair<double, double>>> series;
  std::vector<std::string> labels;
  for (auto& [name, s] : by_inst) {
    series.push_back(s);
    labels.push_back(name);
  }
  save_svg_polylines(path, series, labels, "ABP ratio vs sigma");
}

inline void save_decay_svg(const std::string& path, const DecayProfile& p) {
  std::vector<std::pair<double, double>> meas, bound;
  for (const auto& e : p.entries) {
    meas.push_back({double(e.k), e.measure > 0 ? std::log(e.measure) : -40.0});
    bound.push_back({double(e.k), e.log_bound});
  }
  save_svg_polylines(path, {meas, bound}, {"log measure", "log bound"},
                     "super-level decay");
}

}  // namespace abp

#endif
