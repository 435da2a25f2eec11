#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "eqsing/config.hpp"
#include "eqsing/coupling.hpp"
#include "eqsing/equilibrium.hpp"
#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"
#include "eqsing/obstacle.hpp"
#include "eqsing/report.hpp"
#include "eqsing/simulate.hpp"

namespace fs = std::filesystem;
using namespace eqsing;

namespace {

// exit-code contract: 0 ok, 1 numerical failure, 2 config error, 3 missing artifacts
constexpr int kOk = 0, kNumerical = 1, kConfig = 2, kMissing = 3;

struct CommonArgs {
  std::string instance_file;
  std::string out_dir;
  std::string discount_override;
  int nx = 0, nt = 0, ns = 0;
  double xmin = 0, xmax = 0;
  int threads = 1;
  std::uint64_t seed = 1;
};

std::string default_out_dir() {
  const char* env = std::getenv("EQSING_OUTDIR");
  return env && *env ? env : "out";
}

void add_common(CLI::App* cmd, CommonArgs& a, bool grid_flags = true) {
  cmd->add_option("instance", a.instance_file, "instance config file")->required();
  cmd->add_option("--out", a.out_dir, "output directory (default $EQSING_OUTDIR or ./out)");
  cmd->add_option("--discount", a.discount_override,
                  "discount override, e.g. hyperbolic:k=1 or exponential:gamma=0.3");
  cmd->add_option("--threads", a.threads, "worker cap for internal parallelism");
  cmd->add_option("--seed", a.seed, "base seed for stochastic subcommands");
  if (grid_flags) {
    cmd->add_option("--nx", a.nx, "space nodes");
    cmd->add_option("--nt", a.nt, "time nodes");
    cmd->add_option("--ns", a.ns, "family nodes");
    auto* mn = cmd->add_option("--xmin", a.xmin, "window left edge");
    auto* mx = cmd->add_option("--xmax", a.xmax, "window right edge");
    mn->needs(mx);
  }
}

LoadedInstance load(const CommonArgs& a) {
  LoadedInstance li = load_instance(a.instance_file);
  if (!a.discount_override.empty()) {
    li.inst.discount = parse_discount(a.discount_override);
    li.inst.finalize();
  }
  double xmin = li.grid.x_min, xmax = li.grid.x_max;
  int nx = li.grid.Nx, nt = li.grid.Nt, ns = li.grid.Ns;
  if (a.nx > 0) nx = a.nx;
  if (a.nt > 0) nt = a.nt;
  if (a.ns > 0) ns = a.ns;
  if (a.xmin != 0.0 || a.xmax != 0.0) {
    xmin = a.xmin;
    xmax = a.xmax;
  }
  li.grid = SpaceTimeGrid(xmin, xmax, nx, li.inst.horizon, nt, ns);
  return li;
}

nlohmann::json options_json(const FixedPointOptions& fp, const CommonArgs& a) {
  return {{"theta", fp.theta},
          {"tol_fp", fp.tol_fp},
          {"max_iters", fp.max_iters},
          {"init", fp.init == FixedPointOptions::Init::zero_coupling ? "zero" : "proxy"},
          {"threads", fp.threads},
          {"discount_override", a.discount_override}};
}

int cmd_solve(const CommonArgs& a, const FixedPointOptions& fp) {
  LoadedInstance li = load(a);
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  fs::create_directories(dir);

  AssumptionReport pre = check_assumption_grid(
      li.inst, ProbeGrid{li.grid.x_min, li.grid.x_max, 101, 21});
  int pre_fails = 0;
  for (const auto& it : pre.items) pre_fails += it.pass ? 0 : 1;
  if (pre_fails)
    std::cout << "note: " << pre_fails
              << " grid inequalities fail for this instance (recorded in report)\n";

  EquilibriumSolution sol = solve_equilibrium(li.inst, li.grid, fp);
  ResidualReport res = verify_residuals(sol, li.inst);

  write_field_csv(dir + "/v.csv", sol.v);
  write_field_csv(dir + "/V.csv", sol.V);
  write_boundary_csv(dir + "/gamma.csv", sol.gamma);
  write_field_csv(dir + "/d.csv", sol.d);
  write_family_csv(dir + "/f_family.csv", sol.f);

  nlohmann::json rep = {
      {"tool", {{"name", kToolName}, {"version", kToolVersion}}},
      {"manifest",
       manifest_json(a.instance_file, li.grid, a.seed, dir, options_json(fp, a))},
      {"solve", trace_json(sol)},
      {"residuals", to_json(res)},
      {"assumption_check", to_json(pre)},
  };
  std::string err;
  if (!validate_report(rep, &err)) {
    std::cerr << "internal: report fails its schema: " << err << "\n";
    return kNumerical;
  }
  write_json(dir + "/report.json", rep);

  std::cout << (sol.converged ? "converged" : "NOT converged") << " in "
            << sol.coupling_iterations << " coupling iterations; complementarity "
            << res.comp_sup << "; artifacts in " << dir << "\n";
  return sol.converged ? kOk : kNumerical;
}

int cmd_verify(const std::string& dir) {
  for (const char* f :
       {"report.json", "v.csv", "V.csv", "gamma.csv", "d.csv", "f_family.csv"})
    if (!fs::exists(fs::path(dir) / f)) {
      std::cerr << "missing artifact: " << (fs::path(dir) / f).string() << "\n";
      return kMissing;
    }
  nlohmann::json rep;
  {
    std::ifstream in(fs::path(dir) / "report.json");
    in >> rep;
  }
  std::string err;
  if (!validate_report(rep, &err)) {
    std::cerr << "report.json fails the schema: " << err << "\n";
    return kMissing;
  }
  const auto& m = rep["manifest"];
  LoadedInstance li = load_instance(m["instance_file"].get<std::string>());
  if (m.contains("options") && m["options"].contains("discount_override")) {
    const std::string ov = m["options"]["discount_override"].get<std::string>();
    if (!ov.empty()) {
      li.inst.discount = parse_discount(ov);
      li.inst.finalize();
    }
  }
  const auto& gj = m["grid"];
  SpaceTimeGrid grid(gj["x_min"], gj["x_max"], gj["nx"], gj["T"], gj["nt"], gj["ns"]);

  EquilibriumSolution sol;
  sol.V = read_field_csv((fs::path(dir) / "V.csv").string(), grid);
  sol.v = read_field_csv((fs::path(dir) / "v.csv").string(), grid).flipped_time();
  sol.d = read_field_csv((fs::path(dir) / "d.csv").string(), grid);
  sol.f = read_family_csv((fs::path(dir) / "f_family.csv").string(), grid);
  sol.gamma =
      read_boundary_csv((fs::path(dir) / "gamma.csv").string(), grid).flipped_time();
  const double Cn = rep["solve"]["penalty"]["Cn"].get<double>();
  const double eps = rep["solve"]["penalty"]["eps_final"].get<double>();
  const double baseline = rep["residuals"]["comp_sup"].get<double>();

  ResidualReport res = verify_residuals(sol, li.inst);
  int hard_fails = 0;
  auto check = [&](const char* name, bool ok, double value) {
    std::printf("%-46s %s  (%.3e)\n", name, ok ? "ok" : "FAIL", value);
    if (!ok) ++hard_fails;
  };

  // obstacle bands; the lower/time bands apply left of the terminal kink,
  // where the initial row sits strictly below the cap
  const double xstar = li.inst.eff.xstar;
  double low = 0.0, high = 0.0, mono_x = 0.0, mono_t = 0.0, tail = 0.0;
  for (int j = 0; j < grid.Nt; ++j) {
    const double cap = li.inst.c(grid.T - grid.t(j));
    for (int i = 0; i < grid.Nx; ++i) {
      const double x = grid.x(i);
      const double vv = sol.v.at(i, j);
      if (x <= xstar - 2.0 * grid.dx()) {
        low = std::min(low, vv - li.inst.eff.d1(x));
        if (j > 0) mono_t = std::min(mono_t, vv - sol.v.at(i, j - 1));
      }
      high = std::max(high, vv - cap);
      if (i > 0) mono_x = std::min(mono_x, vv - sol.v.at(i - 1, j));
      if (x <= -1.0) {
        const double C = std::max(li.inst.bound_M, li.inst.c(0.0));
        tail = std::max(tail, vv - C * li.inst.kappa(x, grid.T - grid.t(j)));
      }
    }
  }
  check("v >= Ftilde' (left of kink)", low >= -1e-8, low);
  check("v <= cap + 10*eps*Cn", high <= 10.0 * eps * Cn + 1e-12, high);
  check("v nondecreasing in x", mono_x >= -1e-8, mono_x);
  check("v nondecreasing in reversed t (left of kink)", mono_t >= -1e-8, mono_t);
  check("left tail v <= C*kappa", tail <= 1e-10, tail);

  const double comp_budget = std::max(1e-2, 5.0 * baseline);
  check("complementarity residual stable", res.comp_sup <= comp_budget, res.comp_sup);
  check("both factors above -tol", std::min(res.r1_min, res.r2_min) >= -comp_budget,
        std::min(res.r1_min, res.r2_min));
  check("terminal V anchor", res.terminal_V_sup <= 1e-9, res.terminal_V_sup);
  check("terminal family anchor", res.terminal_f_sup <= 1e-9, res.terminal_f_sup);

  // value-family affinity on the purchasing side (slice s = 0)
  FreeBoundary gfwd = sol.gamma_forward();
  double paff = 0.0;
  for (int j = 0; j < grid.Nt; ++j)
    for (int i = 1; i + 1 < grid.Nx; ++i)
      if (gfwd.g[j] < grid.x(i - 1))
        paff = std::max(paff, std::abs(sol.f.at(i + 1, j, 0) - 2.0 * sol.f.at(i, j, 0) +
                                       sol.f.at(i - 1, j, 0)));
  check("family affine on purchasing side", paff <= 1e-10, paff);

  std::printf("boundary clamped rows: %s\n", sol.gamma.any_clamped() ? "yes" : "no");
  if (hard_fails) {
    std::cout << hard_fails << " hard invariant(s) failed\n";
    return kNumerical;
  }
  std::cout << "verify ok\n";
  return kOk;
}

int cmd_oracle(const CommonArgs& a, double gamma, bool refine) {
  CommonArgs b = a;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "exponential:gamma=%.17g", gamma);
  b.discount_override = buf;
  LoadedInstance li = load(b);
  FixedPointOptions fp;
  fp.threads = a.threads;
  OracleReport rep = exponential_oracle(li.inst, li.grid, fp);
  nlohmann::json j = oracle_json(rep);
  std::printf("E1 = %.6e   E1_diag = %.6e   E2 = %.6e\n", rep.E1, rep.E1_diag, rep.E2);
  std::printf("mode gaps: family dx vs gamma*v %.3e | literal w vs gamma*v %.3e | "
              "literal vs family %.3e\n",
              rep.gap_family_dx, rep.gap_literal_w, rep.gap_modes);
  if (refine) {
    SpaceTimeGrid g2(li.grid.x_min, li.grid.x_max, 2 * (li.grid.Nx - 1) + 1, li.grid.T,
                     2 * (li.grid.Nt - 1) + 1, 2 * (li.grid.Ns - 1) + 1);
    OracleReport fine = exponential_oracle(li.inst, g2, fp);
    j["refined"] = oracle_json(fine);
    j["E1_shrink_factor"] = rep.E1 / fine.E1;
    std::printf("refined E1 = %.6e (shrink factor %.2f)\n", fine.E1, rep.E1 / fine.E1);
  }
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  fs::create_directories(dir);
  write_json(dir + "/oracle.json", j);
  return rep.sol.converged ? kOk : kNumerical;
}

struct SolvedLaw {
  FreeBoundary gamma_fwd;
  ScalarField V;
  FamilyField f;
};

SolvedLaw law_for_simulation(const CommonArgs& a, LoadedInstance& li,
                             const std::string& artifacts, bool need_family) {
  SolvedLaw out;
  if (!artifacts.empty()) {
    for (const char* f : {"gamma.csv", "V.csv"})
      if (!fs::exists(fs::path(artifacts) / f))
        throw std::runtime_error("missing artifact: " +
                                 (fs::path(artifacts) / f).string());
    out.gamma_fwd =
        read_boundary_csv((fs::path(artifacts) / "gamma.csv").string(), li.grid);
    out.V = read_field_csv((fs::path(artifacts) / "V.csv").string(), li.grid);
    if (need_family)
      out.f = read_family_csv((fs::path(artifacts) / "f_family.csv").string(), li.grid);
  } else {
    FixedPointOptions fp;
    fp.threads = a.threads;
    EquilibriumSolution sol = solve_equilibrium(li.inst, li.grid, fp);
    if (!sol.converged) throw std::runtime_error("equilibrium solve did not converge");
    out.gamma_fwd = sol.gamma_forward();
    out.V = sol.V;
    if (need_family) out.f = std::move(sol.f);
  }
  return out;
}

int cmd_mc(const CommonArgs& a, PathConfig cfg, double s_point, bool has_s,
           const std::string& artifacts) {
  LoadedInstance li = load(a);
  SolvedLaw law = law_for_simulation(a, li, artifacts, has_s);
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  MCReport rep = has_s ? simulate_family_point(li.inst, law.gamma_fwd, cfg, s_point)
                       : simulate_objective(li.inst, law.gamma_fwd, cfg);
  if (has_s) {
    const int k = static_cast<int>(std::lround(s_point / li.grid.ds()));
    if (k < 0 || k >= li.grid.Ns || std::abs(li.grid.s(k) - s_point) > 1e-9)
      throw std::runtime_error("--s must lie on the family grid");
    ScalarField slice(li.grid, TimeAxis::forward);
    for (int j = 0; j < li.grid.Nt; ++j)
      for (int i = 0; i < li.grid.Nx; ++i)
        slice.at(i, j) = law.f.present(j, k) ? law.f.at(i, j, k) : 0.0;
    rep.compare_value = interp2(slice, cfg.x0, cfg.t0);
  } else {
    rep.compare_value = interp2(law.V, cfg.x0, cfg.t0);
  }
  rep.z_score = (rep.estimate - rep.compare_value) / std::max(rep.std_error, 1e-300);
  std::printf("J_hat = %.8f  se = %.2e  vs %s = %.8f  z = %.2f\n", rep.estimate,
              rep.std_error, has_s ? "f^s(x0,t0)" : "V(x0,t0)", rep.compare_value,
              rep.z_score);
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  fs::create_directories(dir);
  write_json(dir + (has_s ? "/mc_family.json" : "/mc.json"), to_json(rep));
  if (cfg.trace_paths > 0 && !rep.traces.empty()) {
    std::ofstream tr(dir + "/paths.csv");
    tr << "path,t,x,xi\n";
    for (size_t p = 0; p < rep.traces.size(); ++p)
      for (size_t m = 0; m < rep.traces[p].t.size(); ++m)
        tr << p << ',' << rep.traces[p].t[m] << ',' << rep.traces[p].x[m] << ','
           << rep.traces[p].xi[m] << "\n";
  }
  return kOk;
}

int cmd_perturb(const CommonArgs& a, PathConfig cfg, double h, const std::string& mode,
                double delta, const std::string& artifacts) {
  LoadedInstance li = load(a);
  SolvedLaw law = law_for_simulation(a, li, artifacts, false);
  cfg.seed = a.seed;
  cfg.threads = a.threads;
  const PerturbMode pm =
      mode == "extra-jump" ? PerturbMode::extra_jump : PerturbMode::no_purchase;
  PerturbReport rep = perturbation_test(li.inst, law.gamma_fwd, cfg, h, pm, delta);
  std::printf("delta_hat = %.6e  paired_se = %.3e  h = %.5f  (mode %s)\n", rep.delta_hat,
              rep.paired_se, rep.h_used, mode.c_str());
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  fs::create_directories(dir);
  write_json(dir + "/perturb.json", to_json(rep));
  return kOk;
}

int cmd_check(const CommonArgs& a, int probe_nx, int probe_nt) {
  LoadedInstance li = load(a);
  AssumptionReport rem = check_remark_example(li.inst);
  AssumptionReport grd = check_assumption_grid(
      li.inst, ProbeGrid{li.grid.x_min, li.grid.x_max, probe_nx, probe_nt});
  int fails = 0;
  auto show = [&](const char* title, const AssumptionReport& r) {
    std::printf("-- %s\n", title);
    for (const auto& it : r.items) {
      std::printf("%-76s %s  margin %.4e %s\n", it.name.c_str(),
                  it.pass ? "pass" : "FAIL", it.margin, it.where.c_str());
      if (!it.pass) ++fails;
    }
    for (const auto& n : r.notes) std::printf("note: %s\n", n.c_str());
  };
  show("parameter inequality chains", rem);
  show("grid operator inequalities", grd);
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  fs::create_directories(dir);
  write_json(dir + "/check.json",
             {{"parameter_chains", to_json(rem)}, {"grid_inequalities", to_json(grd)}});
  std::printf("%s (%d failing)\n", fails == 0 ? "all pass" : "FAILURES", fails);
  return fails == 0 ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"equilibrium singular control laws under non-exponential discounting"};
  app.require_subcommand(1);

  CommonArgs a;
  FixedPointOptions fp;
  std::string init_mode = "zero";

  auto* solve = app.add_subcommand("solve", "solve the coupled system, write artifacts");
  add_common(solve, a);
  solve->add_option("--theta", fp.theta, "coupling damping in (0,1]");
  solve->add_option("--tol-fp", fp.tol_fp, "fixed-point tolerance on ||dv||_inf");
  solve->add_option("--max-iters", fp.max_iters, "fixed-point iteration cap");
  solve->add_option("--init", init_mode, "coupling start: zero | proxy");

  auto* verify = app.add_subcommand("verify", "re-check residuals/invariants of artifacts");
  std::string vdir;
  verify->add_option("dir", vdir, "artifact directory")->required();

  auto* oracle = app.add_subcommand("oracle", "exponential-discount reduction check");
  CommonArgs ao;
  double gamma = 0.3;
  bool refine = false;
  add_common(oracle, ao);
  oracle->add_option("--gamma", gamma, "exponential rate");
  oracle->add_flag("--refine", refine, "re-run on the halved grid and report the shrink");

  auto* mc = app.add_subcommand("mc", "Monte-Carlo estimate of the generated control");
  CommonArgs am;
  PathConfig pc;
  double s_point = 0.0;
  std::string artifacts;
  add_common(mc, am);
  mc->add_option("--x0", pc.x0, "start state")->required();
  mc->add_option("--t0", pc.t0, "start time");
  mc->add_option("--n", pc.n_paths, "path count");
  mc->add_option("--dt", pc.dt, "Euler step");
  mc->add_flag("--antithetic", pc.antithetic, "antithetic pairing");
  mc->add_option("--trace-paths", pc.trace_paths, "record this many paths to paths.csv");
  auto* sopt = mc->add_option("--s", s_point, "compare against the family slice at s");
  mc->add_option("--artifacts", artifacts, "read gamma/V/f from a solved directory");

  auto* pert = app.add_subcommand("perturb", "first-order perturbation test");
  CommonArgs ap;
  PathConfig pp;
  double h = 0.01, delta = 0.1;
  std::string pmode = "no-purchase";
  std::string partifacts;
  add_common(pert, ap);
  pert->add_option("--x0", pp.x0, "start state")->required();
  pert->add_option("--t0", pp.t0, "start time");
  pert->add_option("--n", pp.n_paths, "path count");
  pert->add_option("--dt", pp.dt, "Euler step");
  pert->add_option("--hwin", h, "perturbation window length");
  pert->add_option("--mode", pmode, "no-purchase | extra-jump");
  pert->add_option("--delta", delta, "extra jump size");
  pert->add_option("--artifacts", partifacts, "read gamma/V from a solved directory");

  auto* check = app.add_subcommand("check", "parameter and grid inequality report");
  CommonArgs ac;
  int probe_nx = 201, probe_nt = 41;
  add_common(check, ac);
  check->add_option("--probe-nx", probe_nx, "probe nodes in x");
  check->add_option("--probe-nt", probe_nt, "probe nodes in t");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      fp.init = init_mode == "proxy" ? FixedPointOptions::Init::exponential_proxy
                                     : FixedPointOptions::Init::zero_coupling;
      fp.threads = a.threads;
      return cmd_solve(a, fp);
    }
    if (verify->parsed()) return cmd_verify(vdir);
    if (oracle->parsed()) return cmd_oracle(ao, gamma, refine);
    if (mc->parsed()) return cmd_mc(am, pc, s_point, sopt->count() > 0, artifacts);
    if (pert->parsed()) return cmd_perturb(ap, pp, h, pmode, delta, partifacts);
    if (check->parsed()) return cmd_check(ac, probe_nx, probe_nt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    std::cerr << "error: " << msg << "\n";
    if (msg.find("missing artifact") != std::string::npos) return kMissing;
    return kNumerical;
  }
  return kOk;
}
