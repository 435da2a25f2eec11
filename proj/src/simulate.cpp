#include "eqsing/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eqsing {

// ---------------------------------------------------------------------------
// Counter RNG
// ---------------------------------------------------------------------------

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double CounterRng::uniform(std::uint64_t path, std::uint64_t step) const {
  std::uint64_t h = mix(seed ^ 0xd1b54a32d192ed03ull);
  h = mix(h ^ (path * 0x2545f4914f6cdd1dull));
  h = mix(h ^ (step * 0x9e3779b97f4a7c15ull));
  // strictly inside (0,1)
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double inv_normal_cdf(double u) {
  // Acklam's rational approximation with one Halley refinement
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= phigh) {
    const double q = u - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - u;
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
  const double un = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(0.5 * x * x);
  (void)pdf;
  return x - un / (1.0 + 0.5 * x * un);
}

double CounterRng::normal(std::uint64_t path, std::uint64_t step) const {
  return inv_normal_cdf(uniform(path, step));
}

double pairwise_sum(const double* v, size_t n) {
  if (n < 16) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

// ---------------------------------------------------------------------------
// Path engine
// ---------------------------------------------------------------------------

namespace {

struct PathSpec {
  double anchor = 0.0;      // discount argument base s
  int law_start_step = 0;   // steps before this follow the perturbation arm
  double forced_jump = 0.0; // immediate extra jump at t0 (perturbed arm)
  bool law = true;          // false: no projection before law_start_step
};

struct PathResult {
  double total = 0.0, running = 0.0, cost = 0.0, terminal = 0.0;
};

PathResult run_path(const ProblemInstance& inst, const FreeBoundary& gf,
                    const PathConfig& cfg, const PathSpec& ps, double dt, long nsteps,
                    const CounterRng& rng, std::uint64_t key, bool flip,
                    PathTrace* trace) {
  PathResult out;
  double X = cfg.x0;
  double xi = 0.0;
  const double T = inst.horizon;

  auto charge = [&](double t, double dxi) {
    xi += dxi;
    out.cost += inst.beta(t - ps.anchor) * inst.c(t) * dxi;
  };

  // time t0: law projection or forced perturbation jump
  if (ps.law || ps.law_start_step == 0) {
    const double gb = gf.eval(cfg.t0);
    if (X > gb) {
      charge(cfg.t0, X - gb);
      X = gb;
    }
  } else if (ps.forced_jump > 0.0) {
    charge(cfg.t0, ps.forced_jump);
    X -= ps.forced_jump;
  }

  if (trace) {
    trace->t.push_back(cfg.t0);
    trace->x.push_back(X);
    trace->xi.push_back(xi);
  }

  for (long m = 0; m < nsteps; ++m) {
    const double t = cfg.t0 + m * dt;
    out.running += inst.beta(t - ps.anchor) * inst.H(X, t) * dt;
    double z = rng.normal(key, static_cast<std::uint64_t>(m));
    if (flip) z = -z;
    const double tn = cfg.t0 + (m + 1) * dt;
    X += inst.mu(X, t) * dt + inst.sigma(X, t) * std::sqrt(dt) * z;
    const bool engaged = ps.law || (m + 1 >= ps.law_start_step);
    if (engaged && tn < T - 1e-15) {
      const double gb = gf.eval(tn);
      if (X > gb) {
        charge(tn, X - gb);
        X = gb;
      }
    }
    if (trace) {
      trace->t.push_back(tn);
      trace->x.push_back(X);
      trace->xi.push_back(xi);
    }
  }

  // optimal terminal purchase, split into its loss and cost parts
  const double a = inst.eff.minimizer(X);
  const double wT = inst.beta(T - ps.anchor);
  out.terminal += wT * inst.F(X - a);
  if (a > 0.0) {
    xi += a;
    out.cost += wT * inst.c(T) * a;
  }
  out.total = out.running + out.cost + out.terminal;
  return out;
}

struct Accum {
  std::vector<double> totals, running, cost, terminal;
};

void run_ensemble(const ProblemInstance& inst, const FreeBoundary& gf,
                  const PathConfig& cfg, const PathSpec& ps, double dt, long nsteps,
                  Accum& acc, std::vector<PathTrace>* traces) {
  const CounterRng rng{cfg.seed};
  const long n = cfg.n_paths;
  acc.totals.resize(n);
  acc.running.resize(n);
  acc.cost.resize(n);
  acc.terminal.resize(n);

  auto body = [&](long p) {
    const std::uint64_t key = cfg.antithetic ? static_cast<std::uint64_t>(p / 2)
                                             : static_cast<std::uint64_t>(p);
    const bool flip = cfg.antithetic && (p % 2 == 1);
    PathTrace* tr = (traces && p < static_cast<long>(traces->size()))
                        ? &(*traces)[p]
                        : nullptr;
    const PathResult r = run_path(inst, gf, cfg, ps, dt, nsteps, rng, key, flip, tr);
    acc.totals[p] = r.total;
    acc.running[p] = r.running;
    acc.cost[p] = r.cost;
    acc.terminal[p] = r.terminal;
  };

  if (cfg.threads > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(cfg.threads)
#endif
    for (long p = 0; p < n; ++p) body(p);
  } else {
    for (long p = 0; p < n; ++p) body(p);
  }
}

MCReport reduce(const Accum& acc, double dt) {
  MCReport rep;
  const long n = static_cast<long>(acc.totals.size());
  rep.n_paths = n;
  rep.dt_used = dt;
  rep.estimate = pairwise_sum(acc.totals.data(), n) / n;
  rep.running_mean = pairwise_sum(acc.running.data(), n) / n;
  rep.cost_mean = pairwise_sum(acc.cost.data(), n) / n;
  rep.terminal_mean = pairwise_sum(acc.terminal.data(), n) / n;
  std::vector<double> sq(n);
  for (long p = 0; p < n; ++p) {
    const double d = acc.totals[p] - rep.estimate;
    sq[p] = d * d;
  }
  const double var = n > 1 ? pairwise_sum(sq.data(), n) / (n - 1) : 0.0;
  rep.std_error = std::sqrt(var / n);
  return rep;
}

void validate(const ProblemInstance& inst, const PathConfig& cfg) {
  if (cfg.n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (cfg.t0 < 0.0 || cfg.t0 > inst.horizon)
    throw std::invalid_argument("simulate: t0 outside [0, T]");
}

std::pair<double, long> effective_step(const ProblemInstance& inst,
                                       const PathConfig& cfg) {
  const double span = inst.horizon - cfg.t0;
  const long nsteps = std::max(1L, static_cast<long>(std::ceil(span / cfg.dt - 1e-12)));
  return {span / nsteps, nsteps};
}

}  // namespace

MCReport simulate_objective(const ProblemInstance& inst, const FreeBoundary& gamma_fwd,
                            const PathConfig& cfg) {
  if (gamma_fwd.axis != TimeAxis::forward)
    throw std::invalid_argument("simulate: boundary must be on the forward axis");
  validate(inst, cfg);
  auto [dt, nsteps] = effective_step(inst, cfg);
  PathSpec ps;
  ps.anchor = cfg.t0;
  Accum acc;
  std::vector<PathTrace> traces(std::min<long>(cfg.trace_paths, cfg.n_paths));
  run_ensemble(inst, gamma_fwd, cfg, ps, dt, nsteps, acc,
               traces.empty() ? nullptr : &traces);
  MCReport rep = reduce(acc, dt);
  rep.traces = std::move(traces);
  return rep;
}

MCReport simulate_family_point(const ProblemInstance& inst, const FreeBoundary& gamma_fwd,
                               const PathConfig& cfg, double s) {
  if (s > cfg.t0 + 1e-15)
    throw std::invalid_argument("simulate_family_point: needs s <= t0");
  validate(inst, cfg);
  auto [dt, nsteps] = effective_step(inst, cfg);
  PathSpec ps;
  ps.anchor = s;
  Accum acc;
  run_ensemble(inst, gamma_fwd, cfg, ps, dt, nsteps, acc, nullptr);
  return reduce(acc, dt);
}

PerturbReport perturbation_test(const ProblemInstance& inst, const FreeBoundary& gamma_fwd,
                                const PathConfig& cfg, double h, PerturbMode mode,
                                double jump_size) {
  validate(inst, cfg);
  auto [dt, nsteps] = effective_step(inst, cfg);
  if (h < dt - 1e-15)
    throw std::invalid_argument("perturbation_test: h must be at least one Euler step");
  if (cfg.t0 + h >= inst.horizon)
    throw std::invalid_argument("perturbation_test: t0 + h must stay below T");
  const long mh = std::max(1L, std::lround(h / dt));

  PathSpec law;
  law.anchor = cfg.t0;
  PathSpec pert;
  pert.anchor = cfg.t0;
  pert.law = false;
  pert.law_start_step = static_cast<int>(mh);
  pert.forced_jump = (mode == PerturbMode::extra_jump) ? jump_size : 0.0;

  Accum a, b;
  run_ensemble(inst, gamma_fwd, cfg, law, dt, nsteps, a, nullptr);
  run_ensemble(inst, gamma_fwd, cfg, pert, dt, nsteps, b, nullptr);

  PerturbReport rep;
  rep.h_used = mh * dt;
  const long n = cfg.n_paths;
  std::vector<double> diff(n);
  for (long p = 0; p < n; ++p) diff[p] = b.totals[p] - a.totals[p];
  const double mean_diff = pairwise_sum(diff.data(), n) / n;
  std::vector<double> sq(n);
  for (long p = 0; p < n; ++p) {
    const double d = diff[p] - mean_diff;
    sq[p] = d * d;
  }
  const double var = n > 1 ? pairwise_sum(sq.data(), n) / (n - 1) : 0.0;
  rep.delta_hat = mean_diff / rep.h_used;
  rep.paired_se = std::sqrt(var / n) / rep.h_used;
  rep.mean_law = pairwise_sum(a.totals.data(), n) / n;
  rep.mean_perturbed = pairwise_sum(b.totals.data(), n) / n;
  return rep;
}

}  // namespace eqsing
