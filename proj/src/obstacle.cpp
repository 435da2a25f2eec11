#include "eqsing/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace eqsing {

namespace detail {

ObstacleData make_obstacle_data(const ProblemInstance& inst,
                                const SpaceTimeGrid& grid,
                                const ScalarField& dx_rev) {
  if (dx_rev.axis != TimeAxis::reversed)
    throw std::invalid_argument("make_obstacle_data: d_x must be on the reversed axis");
  ObstacleData d;
  d.grid = grid;
  d.initial.resize(grid.Nx);
  d.obstacle.resize(grid.Nt);
  d.obstacle_d.resize(grid.Nt);
  d.bcl.resize(grid.Nt);
  d.bcr.resize(grid.Nt);
  d.source = ScalarField(grid, TimeAxis::reversed);
  d.diff = ScalarField(grid, TimeAxis::reversed);
  d.adv = ScalarField(grid, TimeAxis::reversed);
  d.zer = ScalarField(grid, TimeAxis::reversed);

  const double cT = inst.c(inst.horizon);
  for (int i = 0; i < grid.Nx; ++i)
    d.initial[i] = std::min(inst.eff.d1(grid.x(i)), cT);  // terminal rows at the cap

  for (int j = 0; j < grid.Nt; ++j) {
    const double r = grid.T - grid.t(j);  // physical time
    d.obstacle[j] = inst.c(r);
    d.obstacle_d[j] = inst.c_p(r);
    d.bcl[j] = d.initial[0];
    d.bcr[j] = inst.c(r);
    for (int i = 0; i < grid.Nx; ++i) {
      const double x = grid.x(i);
      const double s = inst.sigma(x, r);
      d.diff.at(i, j) = 0.5 * s * s;
      d.adv.at(i, j) = s * inst.sigma_x(x, r) + inst.mu(x, r);
      d.zer.at(i, j) = inst.mu_x(x, r);
      d.source.at(i, j) = inst.H_x(x, r) - dx_rev.at(i, j);
    }
  }
  return d;
}

double penalty_scale(const ObstacleData& d, bool* contact_empty) {
  double m_contact = std::numeric_limits<double>::infinity();
  double m_global = std::numeric_limits<double>::infinity();
  for (int j = 0; j < d.grid.Nt; ++j)
    for (int i = 0; i < d.grid.Nx; ++i) {
      const double s = d.source.at(i, j);
      m_global = std::min(m_global, s);
      const double lcap = d.obstacle_d[j] + d.zer.at(i, j) * d.obstacle[j];
      if (lcap + s >= 0.0) m_contact = std::min(m_contact, s);
    }
  const bool empty = !std::isfinite(m_contact);
  if (contact_empty) *contact_empty = empty;
  if (empty) {
    // obstacle inactive after the initial row: any positive scale works
    return 0.9 * std::max(m_global, 1e-12);
  }
  if (!(m_contact > 0.0))
    throw std::runtime_error("obstacle: penalty scale not positive on the contact set");
  return 0.9 * m_contact;
}

namespace {

struct StepMatrices {
  TriDiag M;
  std::vector<double> rhs;  // prev + dt*src, Dirichlet rows folded
};

StepMatrices assemble_step(const ObstacleData& d, int j,
                           const std::vector<double>& prev) {
  const int n = d.grid.Nx;
  RowCoeffs rc;
  rc.diff.assign(d.diff.row(j), d.diff.row(j) + n);
  rc.adv.assign(d.adv.row(j), d.adv.row(j) + n);
  rc.zer.assign(d.zer.row(j), d.zer.row(j) + n);
  rc.src.assign(n, 0.0);
  OperatorStencil st = assemble_implicit(rc, d.grid.dx(), d.grid.dt(),
                                         BcKind::dirichlet, BcKind::dirichlet);
  StepMatrices out;
  out.M = std::move(st.M);
  out.rhs.resize(n);
  const double dt = d.grid.dt();
  for (int i = 0; i < n; ++i) out.rhs[i] = prev[i] + dt * d.source.at(i, j);
  out.M.di[0] = 1.0;
  out.M.up[0] = 0.0;
  out.rhs[0] = d.bcl[j];
  out.M.di[n - 1] = 1.0;
  out.M.lo[n - 1] = 0.0;
  out.rhs[n - 1] = d.bcr[j];
  return out;
}

double newton_residual(const StepMatrices& sm, const std::vector<double>& w,
                       double cap, double dt, const PenaltyParams& pp,
                       std::vector<double>& F) {
  const size_t n = w.size();
  double nrm = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double s = sm.M.di[i] * w[i];
    if (i > 0) s += sm.M.lo[i] * w[i - 1];
    if (i + 1 < n) s += sm.M.up[i] * w[i + 1];
    double f = s - sm.rhs[i];
    if (i > 0 && i + 1 < n) f -= dt * penalty(cap - w[i], pp).value;
    F[i] = f;
    nrm = std::max(nrm, std::abs(f));
  }
  return nrm;
}

}  // namespace

ObstacleSolution march_penalized(const ObstacleData& d, const ObstacleSolveOptions& o) {
  const int n = d.grid.Nx, nt = d.grid.Nt;
  const double dt = d.grid.dt();
  ObstacleSolution sol;
  sol.meta.eps_schedule = o.eps_schedule;
  sol.meta.Cn = penalty_scale(d, &sol.meta.contact_set_empty);

  ScalarField warm;  // previous eps level
  for (double eps : o.eps_schedule) {
    PenaltyParams pp{eps, sol.meta.Cn};
    ScalarField v(d.grid, TimeAxis::reversed);
    for (int i = 0; i < n; ++i) v.at(i, 0) = d.initial[i];
    std::vector<double> prev(n), w(n), F(n), delta(n);
    const bool last_level = (eps == o.eps_schedule.back());
    for (int j = 1; j < nt; ++j) {
      prev.assign(v.row(j - 1), v.row(j - 1) + n);
      StepMatrices sm = assemble_step(d, j, prev);
      if (!warm.v.empty())
        w.assign(warm.row(j), warm.row(j) + n);
      else
        w = prev;
      w[0] = d.bcl[j];
      w[n - 1] = d.bcr[j];

      double scale = 1.0;
      for (double r : sm.rhs) scale = std::max(scale, std::abs(r));
      double fn = newton_residual(sm, w, d.obstacle[j], dt, pp, F);
      int it = 0;
      while (fn > o.newton_tol * scale) {
        if (++it > o.newton_max) {
          char buf[128];
          std::snprintf(buf, sizeof(buf),
                        "obstacle: Newton stalled at step %d (residual %.3e, eps %.1e)",
                        j, fn, eps);
          throw std::runtime_error(buf);
        }
        TriDiag J = sm.M;
        for (int i = 1; i + 1 < n; ++i)
          J.di[i] += dt * penalty(d.obstacle[j] - w[i], pp).slope;
        std::vector<double> negF(n);
        for (int i = 0; i < n; ++i) negF[i] = -F[i];
        negF[0] = 0.0;
        negF[n - 1] = 0.0;
        delta = solve_tridiagonal(J, negF);
        double lam = 1.0;
        std::vector<double> trial(n);
        while (true) {
          for (int i = 0; i < n; ++i) trial[i] = w[i] + lam * delta[i];
          const double fn2 = newton_residual(sm, trial, d.obstacle[j], dt, pp, F);
          if (fn2 <= fn * (1.0 - 1e-4 * lam) || fn2 <= o.newton_tol * scale) {
            w = trial;
            fn = fn2;
            break;
          }
          lam *= 0.5;
          if (lam < 1e-6)
            throw std::runtime_error("obstacle: Newton line search failed");
        }
      }
      sol.meta.newton_total += it;
      sol.meta.newton_worst_step = std::max(sol.meta.newton_worst_step, it);
      sol.meta.worst_newton_residual = std::max(sol.meta.worst_newton_residual, fn / scale);
      std::copy(w.begin(), w.end(), v.row(j));

      if (last_level) {
        // discrete complementarity of the unconstrained step residual
        for (int i = 1; i + 1 < n; ++i) {
          double s = sm.M.di[i] * w[i] + sm.M.lo[i] * w[i - 1] + sm.M.up[i] * w[i + 1];
          const double r1 = (s - sm.rhs[i]) / dt;
          const double z = d.obstacle[j] - w[i];
          sol.meta.complementarity_tol =
              std::max(sol.meta.complementarity_tol, std::abs(std::min(r1, z)));
        }
      }
    }
    warm = v;
    sol.v = std::move(v);
    sol.meta.eps_final = eps;
  }
  return sol;
}

ObstacleSolution march_direct(const ObstacleData& d, const ObstacleSolveOptions& o) {
  const int n = d.grid.Nx, nt = d.grid.Nt;
  const double dt = d.grid.dt();
  ObstacleSolution sol;
  sol.meta.Cn = penalty_scale(d, &sol.meta.contact_set_empty);
  sol.meta.eps_final = o.eps_schedule.empty() ? 0.0 : o.eps_schedule.back();

  ScalarField v(d.grid, TimeAxis::reversed);
  for (int i = 0; i < n; ++i) v.at(i, 0) = std::min(d.initial[i], d.obstacle[0]);

  std::vector<double> prev(n), w(n);
  for (int j = 1; j < nt; ++j) {
    prev.assign(v.row(j - 1), v.row(j - 1) + n);
    StepMatrices sm = assemble_step(d, j, prev);
    const double cap = d.obstacle[j];
    w = prev;
    for (double& wi : w) wi = std::min(wi, cap);
    w[0] = std::min(d.bcl[j], cap);
    w[n - 1] = d.bcr[j];

    double scale = 1.0;
    for (double r : sm.rhs) scale = std::max(scale, std::abs(r));
    double res = std::numeric_limits<double>::infinity();
    double res_old = res;
    long it = 0, last_progress = 0;
    while (true) {
      // projected SOR sweep (projection from above onto the cap)
      for (int i = 1; i + 1 < n; ++i) {
        const double gs =
            (sm.rhs[i] - sm.M.lo[i] * w[i - 1] - sm.M.up[i] * w[i + 1]) / sm.M.di[i];
        const double cand = w[i] + o.psor_omega * (gs - w[i]);
        w[i] = std::min(cand, cap);
      }
      // complementarity residual on the time-step scale
      res = 0.0;
      for (int i = 1; i + 1 < n; ++i) {
        const double s =
            sm.M.di[i] * w[i] + sm.M.lo[i] * w[i - 1] + sm.M.up[i] * w[i + 1];
        res = std::max(res, std::abs(std::min((s - sm.rhs[i]) / dt, cap - w[i])));
      }
      ++it;
      if (res <= o.psor_tol * scale) break;
      if (res < res_old * 0.999) {
        res_old = res;
        last_progress = it;
      }
      if (it - last_progress > 2000 || it > o.psor_max_iters) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "obstacle: projected SOR stagnated at step %d "
                      "(residual %.3e after %ld sweeps)",
                      j, res, it);
        throw std::runtime_error(buf);
      }
    }
    sol.meta.psor_total += it;
    sol.meta.worst_psor_residual = std::max(sol.meta.worst_psor_residual, res / scale);
    sol.meta.complementarity_tol = std::max(sol.meta.complementarity_tol, res);
    std::copy(w.begin(), w.end(), v.row(j));
  }
  sol.v = std::move(v);
  return sol;
}

}  // namespace detail

namespace {

void check_band(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                const ScalarField& dx_rev) {
  double worst = std::numeric_limits<double>::infinity();
  double worst_low = worst;
  int wi = 0, wj = 0, li = 0, lj = 0;
  for (int j = 0; j < grid.Nt; ++j) {
    const double r = grid.T - grid.t(j);
    for (int i = 0; i < grid.Nx; ++i) {
      const double dxv = dx_rev.at(i, j);
      if (dxv < worst_low) {
        worst_low = dxv;
        li = i;
        lj = j;
      }
      const double gap = inst.H_x(grid.x(i), r) - dxv;
      if (gap < worst) {
        worst = gap;
        wi = i;
        wj = j;
      }
    }
  }
  char buf[160];
  if (worst_low < -1e-8) {
    std::snprintf(buf, sizeof(buf),
                  "obstacle: coupling gradient negative (%.3e at x=%.6g, tau=%.6g)",
                  worst_low, grid.x(li), grid.t(lj));
    throw std::runtime_error(buf);
  }
  if (worst < -1e-8) {
    std::snprintf(buf, sizeof(buf),
                  "obstacle: coupling gradient reaches H_x (gap %.3e at x=%.6g, tau=%.6g)",
                  worst, grid.x(wi), grid.t(wj));
    throw std::runtime_error(buf);
  }
}

}  // namespace

ObstacleSolution solve_penalized(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                                 const ScalarField& dx_rev, const ObstacleSolveOptions& o) {
  check_band(inst, grid, dx_rev);
  return detail::march_penalized(detail::make_obstacle_data(inst, grid, dx_rev), o);
}

ObstacleSolution solve_direct(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                              const ScalarField& dx_rev, const ObstacleSolveOptions& o) {
  check_band(inst, grid, dx_rev);
  return detail::march_direct(detail::make_obstacle_data(inst, grid, dx_rev), o);
}

FreeBoundary extract_boundary(const ScalarField& v_rev, const ProblemInstance& inst,
                              double tol) {
  if (v_rev.axis != TimeAxis::reversed)
    throw std::invalid_argument("extract_boundary: field must be on the reversed axis");
  const auto& g = v_rev.grid;
  FreeBoundary b(g, TimeAxis::reversed);
  for (int j = 0; j < g.Nt; ++j) {
    const double cap = inst.c(g.T - g.t(j));
    int hit = -1;
    for (int i = 0; i < g.Nx; ++i) {
      if (cap - v_rev.at(i, j) <= tol) {
        hit = i;
        break;
      }
    }
    if (hit < 0) {
      b.g[j] = g.x_max;
      b.clamped[j] = 1;
    } else if (hit == 0) {
      b.g[j] = g.x_min;
    } else {
      const double z0 = cap - v_rev.at(hit - 1, j);
      const double z1 = cap - v_rev.at(hit, j);
      const double w = (z0 - tol) / std::max(z0 - z1, 1e-300);
      b.g[j] = g.x(hit - 1) + std::clamp(w, 0.0, 1.0) * g.dx();
    }
    // a crossing inside the right Dirichlet band is a truncation artifact,
    // not an interior boundary
    if (!b.clamped[j] && b.g[j] > g.x_max - 10.0 * g.dx() && j > 0) {
      b.g[j] = g.x_max;
      b.clamped[j] = 1;
    }
  }
  return b;
}

ScalarField integrate_to_value(const ScalarField& v_rev, const SpaceTimeGrid& grid) {
  if (v_rev.axis != TimeAxis::reversed)
    throw std::invalid_argument("integrate_to_value: field must be on the reversed axis");
  for (int j = 0; j < grid.Nt; ++j)
    if (std::abs(v_rev.at(0, j)) > 1e-8)
      throw std::runtime_error(
          "integrate_to_value: left-truncation check failed, widen the window");
  ScalarField grev(grid, TimeAxis::reversed);
  const double dx = grid.dx();
  for (int j = 0; j < grid.Nt; ++j) {
    double acc = 0.0;
    grev.at(0, j) = 0.0;
    for (int i = 1; i < grid.Nx; ++i) {
      acc += 0.5 * dx * (v_rev.at(i - 1, j) + v_rev.at(i, j));
      grev.at(i, j) = acc;
    }
  }
  return grev.flipped_time();  // V(x,t) = g(x, T-t)
}

}  // namespace eqsing
