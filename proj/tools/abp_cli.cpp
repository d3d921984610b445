// Command-line front end for the fractional-order ABP toolkit.
//
// Subcommands: constants, barrier, solve, envelope, riesz, czd-check, sweep,
// decay. Every subcommand accepts --config <json> (optional overrides),
// --out <dir>, and where meaningful --sigma, --h, --tol. Exit codes:
// 0 success, 2 certificate failure, 1 error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "abp/barrier.hpp"
#include "abp/dyadic.hpp"
#include "abp/harness.hpp"

using namespace abp;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  double sigma = 1.5;
  double h = 1.0 / 16;
  double tol = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->set_help_flag("--help", "print help");  // frees -h / --h for the mesh width
  cmd->add_option("--config", c.config, "JSON config file with overrides");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--sigma", c.sigma, "order parameter in (1,2)");
  cmd->add_option("--h", c.h, "mesh width");
  cmd->add_option("--tol", c.tol, "tolerance (0: module default)");
}

json load_config(const Common& c) {
  if (c.config.empty()) return json::object();
  std::ifstream f(c.config);
  if (!f) throw std::runtime_error("cannot open config " + c.config);
  json j;
  f >> j;
  return j;
}

std::string out_path(const Common& c, const std::string& name) {
  std::filesystem::create_directories(c.out);
  return (std::filesystem::path(c.out) / name).string();
}

void save_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  f << j.dump(2) << "\n";
}

double cfg_num(const json& j, const std::string& key, double dflt) {
  if (!j.contains(key)) return dflt;
  const auto& v = j.at(key);
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  return v.get<double>();
}

// The ledger used by experiment subcommands: load the file named in the
// config ("constants"), else reuse <out>/constants.json, else certify the
// barrier once and freeze a fresh ledger there.
ConstantLedger experiment_ledger(const Common& c, const json& cfg) {
  if (cfg.contains("constants")) return ConstantLedger::load(cfg.at("constants"));
  std::string cached = out_path(c, "constants.json");
  if (std::ifstream(cached).good()) return ConstantLedger::load(cached);
  ConstantLedger led;
  led.n = 2;
  Domain dom(2, 1.0 / 32, 8.0);
  BarrierCertificate cert =
      build_certified_barrier(dom, PucciEllipticity(2, led.lambda, led.Lambda, 1.5));
  if (!cert.valid())
    throw std::runtime_error("barrier certification failed: " + cert.reason);
  led.M1 = cert.M1;
  led.M2 = cert.M2;
  led.log_M1 = std::log(cert.M1);
  led.log_M2 = std::log(cert.M2);
  led.freeze();
  led.save(cached);
  return led;
}

GridFunction battery_f(const json& cfg, const Domain& dom) {
  std::string name = cfg.contains("instance") ? cfg.at("instance").get<std::string>()
                                              : std::string("ones");
  auto battery = default_battery();
  return battery_by_name(battery, name).make_f(dom);
}

int cmd_constants(const Common& c) {
  json cfg = load_config(c);
  ConstantLedger led;
  led.n = int(cfg_num(cfg, "n", 2));
  led.lambda = cfg_num(cfg, "lambda", 1.0);
  led.Lambda = cfg_num(cfg, "Lambda", 1.0);
  led.C0 = cfg_num(cfg, "C0", 10.0);
  led.Cbar = cfg_num(cfg, "Cbar", 10.0);
  led.R = cfg_num(cfg, "R", 10.0);
  if (cfg.contains("M1") && cfg.contains("M2")) {
    led.M1 = cfg.at("M1").get<double>();
    led.M2 = cfg.at("M2").get<double>();
    led.log_M1 = std::log(led.M1);
    led.log_M2 = std::log(led.M2);
    led.barrier_provenance = Provenance::Assumed;
  } else {
    Domain dom(led.n, c.h, 8.0);
    BarrierCertificate cert = build_certified_barrier(
        dom, PucciEllipticity(led.n, led.lambda, led.Lambda, 1.5));
    if (!cert.valid()) {
      std::fprintf(stderr, "barrier certificate invalid: %s\n", cert.reason.c_str());
      return 2;
    }
    led.M1 = cert.M1;
    led.M2 = cert.M2;
    led.log_M1 = std::log(cert.M1);
    led.log_M2 = std::log(cert.M2);
  }
  led.freeze();
  led.save(out_path(c, "constants.json"));
  std::printf("constants.json written (eps0 log %.6g, subnormal %d)\n", led.log_eps0,
              int(led.eps0_subnormal));
  return 0;
}

int cmd_barrier(const Common& c) {
  json cfg = load_config(c);
  Domain dom(2, c.h, 8.0);
  PucciEllipticity ell(2, cfg_num(cfg, "lambda", 1.0), cfg_num(cfg, "Lambda", 1.0), 1.5);
  BarrierCertificate cert = build_certified_barrier(dom, ell);
  save_json(out_path(c, "barrier.json"), cert.to_json());
  save_csv(cert.eta, out_path(c, "eta.csv"));
  std::printf("barrier p=%g M1=%.6g M2=%.6g valid=%d\n", cert.p, cert.M1, cert.M2,
              int(cert.valid()));
  return cert.valid() ? 0 : 2;
}

int cmd_solve(const Common& c) {
  json cfg = load_config(c);
  Domain dom(2, c.h, cfg_num(cfg, "half_extent", 6.0));
  GridFunction f = battery_f(cfg, dom);
  PucciEllipticity ell(2, cfg_num(cfg, "lambda", 1.0), cfg_num(cfg, "Lambda", 1.0),
                       c.sigma);
  Supersolution s = solve_dirichlet(f, c.sigma, ell, cfg_num(cfg, "cfl", 0.9), c.tol);
  save_csv(s.u, out_path(c, "u.csv"));
  json j;
  j["sigma"] = s.sigma;
  j["h"] = dom.h;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["max_residual"] = s.max_residual;
  j["tol"] = s.tol;
  j["exterior_ok"] = s.exterior_ok;
  j["certified"] = s.certified();
  save_json(out_path(c, "solve.json"), j);
  std::printf("solve: %d iterations, residual %.3g (tol %.3g), certified=%d\n",
              s.iterations, s.max_residual, s.tol, int(s.certified()));
  return s.certified() ? 0 : 2;
}

int cmd_envelope(const Common& c) {
  json cfg = load_config(c);
  Domain dom(2, c.h, cfg_num(cfg, "half_extent", 6.0));
  GridFunction f = battery_f(cfg, dom);
  PucciEllipticity ell(2, 1, 1, c.sigma);
  Supersolution s = solve_dirichlet(f, c.sigma, ell, cfg_num(cfg, "cfl", 0.9));
  EnvelopeConfig ecfg;
  ecfg.tol = c.tol;
  EnvelopeResult env = compute_envelope(s.u, c.sigma, ecfg);
  save_csv(env.gamma, out_path(c, "gamma.csv"));
  EnvelopeSummary sum = envelope_residuals(env);
  json j;
  j["iterations"] = sum.iterations;
  j["converged"] = sum.converged;
  j["max_residual"] = sum.max_residual;
  j["tol"] = env.tol;
  j["contact_measure"] = sum.contact_measure;
  j["inf_gamma"] = region_inf(env.gamma, everywhere());
  save_json(out_path(c, "envelope.json"), j);
  std::printf("envelope: %d iterations, residual %.3g (tol %.3g), converged=%d\n",
              sum.iterations, sum.max_residual, env.tol, int(sum.converged));
  return sum.converged ? 0 : 2;
}

int cmd_riesz(const Common& c) {
  json cfg = load_config(c);
  Domain dom(2, c.h, cfg_num(cfg, "half_extent", 6.0));
  GridFunction f = battery_f(cfg, dom);
  PucciEllipticity ell(2, 1, 1, c.sigma);
  Supersolution s = solve_dirichlet(f, c.sigma, ell, cfg_num(cfg, "cfl", 0.9));
  EnvelopeResult env = compute_envelope(s.u, c.sigma);
  // center the rings on the envelope minimizer
  Idx argmin{0, 0, 0};
  double gmin = 0;
  dom.for_each([&](const Idx& i) {
    if (env.gamma.at(i) < gmin) {
      gmin = env.gamma.at(i);
      argmin = i;
    }
  });
  json j;
  if (!(gmin < 0)) {
    j["note"] = "envelope is nonnegative; nothing to verify";
    save_json(out_path(c, "riesz.json"), j);
    std::printf("riesz: envelope nonnegative, nothing to verify\n");
    return 0;
  }
  double r0 = cfg_num(cfg, "r0", 1.0);
  int levels = int(cfg_num(cfg, "levels", 3));
  RingDecomposition rd = ring_decomposition(env.gamma, dom.coords(argmin), r0, levels);
  RingReport rep = verify_ring_bound(env.gamma, rd, c.sigma);
  save_ring_csv(rep, out_path(c, "rings.csv"));
  j["chain_value"] = rep.chain_value;
  j["c0_bound"] = rep.c0_bound;
  j["minus_P_direct"] = rep.minus_P_direct;
  j["hypothesis_all"] = rep.hypothesis_all;
  j["chain_holds"] = rep.chain_holds;
  j["c0_holds"] = rep.c0_holds;
  save_json(out_path(c, "riesz.json"), j);
  std::printf("riesz: -P=%.6g chain=%.6g c0=%.6g hypothesis=%d holds=%d\n",
              rep.minus_P_direct, rep.chain_value, rep.c0_bound,
              int(rep.hypothesis_all), int(rep.chain_holds && rep.c0_holds));
  if (rep.hypothesis_all && !(rep.chain_holds && rep.c0_holds)) return 2;
  return 0;
}

int cmd_czd_check(const Common& c) {
  json cfg = load_config(c);
  int trials = int(cfg_num(cfg, "trials", 1000));
  int max_gen = int(cfg_num(cfg, "max_gen", 6));
  unsigned seed = unsigned(cfg_num(cfg, "seed", 2026));
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0, 1);
  int checked = 0, violations = 0;
  for (int t = 0; t < trials; ++t) {
    double delta = 0.1 + 0.8 * uni(rng);
    DyadicSet A(2, max_gen);
    double fill = 0.6 * delta * uni(rng);
    int per = A.per_axis();
    for (int i = 0; i < per; ++i)
      for (int j = 0; j < per; ++j)
        if (uni(rng) < fill) A.set(i, j);
    if (A.measure() > delta) continue;  // hypothesis (a) must hold
    DyadicSet B = cz_b_closure(A, delta, max_gen);
    CzReport rep = cz_verify(A, B, delta, max_gen);
    if (!rep.hypothesis_a || !rep.hypothesis_b) continue;
    ++checked;
    if (!rep.conclusion) ++violations;
  }
  json j;
  j["trials"] = trials;
  j["checked"] = checked;
  j["violations"] = violations;
  j["max_gen"] = max_gen;
  j["seed"] = seed;
  save_json(out_path(c, "czd.json"), j);
  std::printf("czd-check: %d/%d instances checked, %d violations\n", checked, trials,
              violations);
  return violations == 0 ? 0 : 2;
}

int cmd_sweep(const Common& c) {
  json cfg = load_config(c);
  ConstantLedger led = experiment_ledger(c, cfg);
  SweepConfig sc;
  sc.instances = cfg.contains("instances")
                     ? cfg.at("instances").get<std::vector<std::string>>()
                     : all_battery_names();
  if (cfg.contains("sigmas")) sc.sigmas = cfg.at("sigmas").get<std::vector<double>>();
  if (cfg.contains("hs"))
    sc.hs = cfg.at("hs").get<std::vector<double>>();
  else
    sc.hs = {c.h};
  sc.cfl = cfg_num(cfg, "cfl", 0.9);
  sc.solve_tol = c.tol;
  sc.half_extent = cfg_num(cfg, "half_extent", 6.0);
  sc.with_potential = cfg_num(cfg, "with_potential", 1.0) != 0;
  if (cfg_num(cfg, "cache", 0.0) != 0) {
    sc.cache_dir = out_path(c, "cache");
    std::filesystem::create_directories(sc.cache_dir);
  }
  auto rows = sweep_sigma(sc, led);
  save_text(out_path(c, "sweep.csv"), records_to_csv(rows));
  save_ratio_svg(out_path(c, "ratio.svg"), rows);
  int bad = 0;
  for (const auto& r : rows)
    if (!r.flags.empty()) ++bad;
  std::printf("sweep: %zu rows, %d flagged -> %s\n", rows.size(), bad,
              out_path(c, "sweep.csv").c_str());
  return bad == 0 ? 0 : 2;
}

int cmd_decay(const Common& c) {
  json cfg = load_config(c);
  ConstantLedger led = experiment_ledger(c, cfg);
  Domain dom(2, c.h, cfg_num(cfg, "half_extent", 6.0));
  GridFunction f = battery_f(cfg, dom);
  PucciEllipticity ell(2, led.lambda, led.Lambda, c.sigma);
  Supersolution s = solve_dirichlet(f, c.sigma, ell, cfg_num(cfg, "cfl", 0.9));

  // normalize at the minimizer: u_r >= 0 everywhere with u_r(0) = 0
  Idx argmin{0, 0, 0};
  dom.for_each([&](const Idx& i) {
    if (s.u.at(i) < s.u.at(argmin)) argmin = i;
  });
  if (!(s.u.at(argmin) < 0)) {
    std::printf("decay: solution nonnegative, profile trivial\n");
    return 0;
  }
  GridFunction g = hat_g(s.u, s.f, dom.h);
  int i_sched = int(cfg_num(cfg, "i", 1));
  ScaleInputs si = ScaleInputs::from_ledger(led, i_sched, c.sigma);
  NormalizedPair np =
      normalize(s.u, g, dom.coords(argmin), cfg_num(cfg, "r", 0.5), si, c.sigma);
  DecayProfile prof = decay_profile(np.u_r, np.h_r, decay_inputs(led, i_sched, c.sigma),
                                    int(cfg_num(cfg, "kmax", 60)));
  std::string csv = "k,measure,log_bound\n";
  for (const auto& e : prof.entries)
    csv += fmt_num(double(e.k)) + "," + fmt_num(e.measure) + "," +
           fmt_num(e.log_bound) + "\n";
  save_text(out_path(c, "decay.csv"), csv);
  save_decay_svg(out_path(c, "decay.svg"), prof);
  bool holds = decay_profile_holds(prof);
  std::printf("decay: %zu levels, hypotheses_met=%d, bound holds=%d\n",
              prof.entries.size(), int(prof.hypotheses_met), int(holds));
  if (prof.hypotheses_met && !holds) return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fractional-order Pucci / ABP experiment toolkit"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);

  Common c_constants, c_barrier, c_solve, c_envelope, c_riesz, c_czd, c_sweep, c_decay;
  c_constants.h = 1.0 / 32;
  c_barrier.h = 1.0 / 32;
  add_common(app.add_subcommand("constants", "emit the constant ledger JSON"),
             c_constants);
  add_common(app.add_subcommand("barrier", "build and certify the barrier"), c_barrier);
  add_common(app.add_subcommand("solve", "solve one Dirichlet instance"), c_solve);
  add_common(app.add_subcommand("envelope", "fractional convex envelope of one instance"),
             c_envelope);
  add_common(app.add_subcommand("riesz", "ring decomposition and potential bound"),
             c_riesz);
  add_common(app.add_subcommand("czd-check", "randomized dyadic covering lemma check"),
             c_czd);
  add_common(app.add_subcommand("sweep", "full ABP experiment sweep"), c_sweep);
  add_common(app.add_subcommand("decay", "super-level measure decay profile"), c_decay);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("constants")) return cmd_constants(c_constants);
    if (app.got_subcommand("barrier")) return cmd_barrier(c_barrier);
    if (app.got_subcommand("solve")) return cmd_solve(c_solve);
    if (app.got_subcommand("envelope")) return cmd_envelope(c_envelope);
    if (app.got_subcommand("riesz")) return cmd_riesz(c_riesz);
    if (app.got_subcommand("czd-check")) return cmd_czd_check(c_czd);
    if (app.got_subcommand("sweep")) return cmd_sweep(c_sweep);
    if (app.got_subcommand("decay")) return cmd_decay(c_decay);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
