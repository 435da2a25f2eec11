#include "eqsing/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "eqsing/operators.hpp"

namespace eqsing {

namespace {

double sup_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

IterationStats band_margins(const ProblemInstance& inst, const SpaceTimeGrid& g,
                            const ScalarField& d, const ScalarField& dx,
                            const FreeBoundary& gamma_fwd) {
  IterationStats st;
  st.dx_min = std::numeric_limits<double>::infinity();
  st.hx_gap_min = st.dx_min;
  st.dxx_min = st.dx_min;
  st.hxx_gap_min = st.dx_min;
  const double h2 = g.dx() * g.dx();
  for (int j = 0; j < g.Nt; ++j) {
    const double gb = gamma_fwd.g[j], t = g.t(j);
    for (int i = 0; i < g.Nx; ++i) {
      const double x = g.x(i);
      if (x >= gb) break;  // waiting side only
      st.dx_min = std::min(st.dx_min, dx.at(i, j));
      st.hx_gap_min = std::min(st.hx_gap_min, inst.H_x(x, t) - dx.at(i, j));
      if (i > 0 && i + 1 < g.Nx && g.x(i + 1) < gb) {
        const double dxx = (d.at(i + 1, j) - 2.0 * d.at(i, j) + d.at(i - 1, j)) / h2;
        st.dxx_min = std::min(st.dxx_min, dxx);
        st.hxx_gap_min = std::min(st.hxx_gap_min, inst.H_xx(x, t) - dxx);
      }
    }
  }
  return st;
}

}  // namespace

EquilibriumSolution solve_equilibrium(const ProblemInstance& inst,
                                      const SpaceTimeGrid& grid,
                                      const FixedPointOptions& opts) {
  if (!(opts.theta > 0.0 && opts.theta <= 1.0))
    throw std::invalid_argument("solve_equilibrium: theta must lie in (0, 1]");
  if (!(opts.tol_fp > 0.0))
    throw std::invalid_argument("solve_equilibrium: tol_fp must be positive");

  EquilibriumSolution out;
  out.options = opts;

  ScalarField d(grid, TimeAxis::forward, 0.0);
  ScalarField d_x(grid, TimeAxis::forward, 0.0);

  if (opts.init == FixedPointOptions::Init::exponential_proxy) {
    ScalarField zero(grid, TimeAxis::reversed, 0.0);
    ObstacleSolution warm = solve_penalized(inst, grid, zero, opts.obstacle);
    const double mb0 = -inst.beta_p(0.0);
    ScalarField V0 = integrate_to_value(warm.v, grid);
    ScalarField v0f = warm.v.flipped_time();
    for (size_t i = 0; i < d.v.size(); ++i) {
      d.v[i] = mb0 * V0.v[i];
      d_x.v[i] = mb0 * v0f.v[i];
    }
  }

  ScalarField v_prev;
  FreeBoundary gamma_prev;
  ObstacleSolution ob;
  FreeBoundary gamma;
  bool converged = false;
  int k = 0;

  for (k = 0; k < opts.max_iters; ++k) {
    ScalarField dx_rev = d_x.flipped_time();
    ob = solve_penalized(inst, grid, dx_rev, opts.obstacle);
    gamma = extract_boundary(ob.v, inst, boundary_tol(ob.meta));

    IterationStats st;
    st.iteration = k;
    st.Cn = ob.meta.Cn;
    st.newton_total = ob.meta.newton_total;
    st.dv_sup = v_prev.v.empty() ? std::numeric_limits<double>::infinity()
                                 : sup_diff(ob.v, v_prev);
    st.gamma_move = 0.0;
    if (!gamma_prev.g.empty())
      for (int j = 0; j < grid.Nt; ++j)
        st.gamma_move = std::max(st.gamma_move, std::abs(gamma.g[j] - gamma_prev.g[j]));
    v_prev = ob.v;
    gamma_prev = gamma;

    if (st.dv_sup < opts.tol_fp) {
      const auto bm = band_margins(inst, grid, d, d_x, gamma.flipped_time());
      st.dx_min = bm.dx_min;
      st.hx_gap_min = bm.hx_gap_min;
      st.dxx_min = bm.dxx_min;
      st.hxx_gap_min = bm.hxx_gap_min;
      out.trace.push_back(st);
      converged = true;
      break;
    }

    FamilyField q = solve_sensitivity_family(inst, grid, gamma, opts.threads);
    FreeBoundary gfwd = gamma.flipped_time();
    auto [dn, dn_x] = coupling_term(q, &gfwd);
    for (size_t i = 0; i < d.v.size(); ++i) {
      d.v[i] = (1.0 - opts.theta) * d.v[i] + opts.theta * dn.v[i];
      d_x.v[i] = (1.0 - opts.theta) * d_x.v[i] + opts.theta * dn_x.v[i];
    }

    const auto bm = band_margins(inst, grid, d, d_x, gfwd);
    st.dx_min = bm.dx_min;
    st.hx_gap_min = bm.hx_gap_min;
    st.dxx_min = bm.dxx_min;
    st.hxx_gap_min = bm.hxx_gap_min;
    out.trace.push_back(st);

    // period-2 stall in the contraction history
    const auto& tr = out.trace;
    if (tr.size() >= 4) {
      const double d0 = tr[tr.size() - 1].dv_sup, d1 = tr[tr.size() - 2].dv_sup;
      const double d2 = tr[tr.size() - 3].dv_sup, d3 = tr[tr.size() - 4].dv_sup;
      if (std::isfinite(d3) && d0 > 0.95 * d2 && d1 > 0.95 * d3 && d0 >= d1) {
        out.oscillation_suspected = true;
        out.notes.push_back("contraction history looks period-2; retry with smaller theta");
      }
    }
  }

  out.converged = converged;
  out.coupling_iterations = converged ? std::max(0, k) : opts.max_iters;
  if (!converged)
    out.notes.push_back("fixed point did not reach tol_fp within max_iters");

  out.v = ob.v;
  out.gamma = gamma;
  out.d = std::move(d);
  out.d_x = std::move(d_x);
  out.obstacle_meta = ob.meta;
  // integrate the deviation from the initial row and add its primitive in
  // closed form, so the terminal row of V is anchored exactly
  {
    ScalarField vdiff = out.v;
    for (int j = 0; j < grid.Nt; ++j)
      for (int i = 0; i < grid.Nx; ++i) vdiff.at(i, j) -= inst.eff.d1(grid.x(i));
    out.V = integrate_to_value(vdiff, grid);
    const double base = inst.eff.value(grid.x_min);
    for (int j = 0; j < grid.Nt; ++j)
      for (int i = 0; i < grid.Nx; ++i)
        out.V.at(i, j) += inst.eff.value(grid.x(i)) - base;
  }
  out.f = solve_value_family(inst, grid, out.gamma, opts.threads);
  if (out.gamma.any_clamped())
    out.notes.push_back("boundary clamped at x_max on some rows (no crossing in window)");
  return out;
}

ResidualReport verify_residuals(const EquilibriumSolution& sol,
                                const ProblemInstance& inst) {
  const SpaceTimeGrid& g = sol.V.grid;
  ResidualReport rep;
  rep.r1_min = std::numeric_limits<double>::infinity();
  rep.r2_min = rep.r1_min;
  const FreeBoundary gfwd = sol.gamma_forward();
  const double dx = g.dx();
  char buf[96];

  // V is C^2 away from the interface and away from the terminal kink of
  // Ftilde, whose curvature jump stays sub-grid for the first few rows; the
  // second-derivative residual is only meaningful outside those bands
  const double xstar = inst.eff.xstar;
  auto smooth_node = [&](double x, double t) {
    const double sg = inst.sigma(x, t);
    const double band = 2.0 * dx + 3.0 * sg * std::sqrt(std::max(g.T - t, 0.0));
    if (std::isfinite(xstar) && std::abs(x - xstar) <= band) return false;
    return std::abs(x - gfwd.eval(t)) > 2.0 * dx;
  };

  for (int j = 1; j + 1 < g.Nt; ++j) {
    const double t = g.t(j);
    for (int i = 1; i + 1 < g.Nx; ++i) {
      const double x = g.x(i);
      const double vx = (sol.V.at(i + 1, j) - sol.V.at(i - 1, j)) / (2.0 * dx);
      const double r2 = inst.c(t) - vx;
      rep.r2_min = std::min(rep.r2_min, r2);
      if (!smooth_node(x, t)) continue;
      const double r1 = apply_A(sol.V, inst, i, j) + inst.H(x, t) - sol.d.at(i, j);
      rep.r1_min = std::min(rep.r1_min, r1);
      const double m = std::abs(std::min(r1, r2));
      if (m > rep.comp_sup) {
        rep.comp_sup = m;
        std::snprintf(buf, sizeof(buf), "(x=%.6g, t=%.6g)", x, t);
        rep.comp_where = buf;
      }
    }
  }

  // family equations per slice, away from the interface
  const int stride = g.s_stride();
  for (int k = 0; k < g.Ns; ++k) {
    const double s = g.s(k);
    const int m0 = k * stride;
    // one scalar-field view per slice for the interior operator
    ScalarField slice(g, TimeAxis::forward);
    for (int j = 0; j < g.Nt; ++j)
      for (int i = 0; i < g.Nx; ++i)
        slice.at(i, j) = sol.f.present(j, k) ? sol.f.at(i, j, k) : 0.0;
    for (int j = std::max(1, m0 + 1); j + 1 < g.Nt; ++j) {
      const double t = g.t(j), gb = gfwd.g[j];
      const double w = inst.beta(t - s);
      for (int i = 1; i + 1 < g.Nx; ++i) {
        const double x = g.x(i);
        if (x < gb - 2.0 * dx) {
          if (!smooth_node(x, t)) continue;
          const double r = apply_A(slice, inst, i, j) + w * inst.H(x, t);
          if (std::abs(r) > rep.family_W_sup) {
            rep.family_W_sup = std::abs(r);
            std::snprintf(buf, sizeof(buf), "(x=%.6g, t=%.6g, s=%.6g)", x, t, s);
            rep.family_W_where = buf;
          }
        } else if (x > gb + dx && g.x(i - 1) > gb) {
          const double fx = (slice.at(i + 1, j) - slice.at(i - 1, j)) / (2.0 * dx);
          rep.family_P_sup = std::max(rep.family_P_sup, std::abs(w * inst.c(t) - fx));
        }
      }
    }
    for (int i = 0; i < g.Nx; ++i) {
      const double anchor = inst.beta(g.T - s) * inst.eff.value(g.x(i));
      rep.terminal_f_sup = std::max(rep.terminal_f_sup,
                                    std::abs(sol.f.at(i, g.Nt - 1, k) - anchor));
    }
  }
  for (int i = 0; i < g.Nx; ++i)
    rep.terminal_V_sup =
        std::max(rep.terminal_V_sup,
                 std::abs(sol.V.at(i, g.Nt - 1) - inst.eff.value(g.x(i))));
  return rep;
}

OracleReport exponential_oracle(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                                const FixedPointOptions& opts) {
  if (inst.discount.family != DiscountSpec::Family::exponential)
    throw std::invalid_argument("exponential_oracle: discount family must be exponential");
  OracleReport rep;
  rep.gamma = inst.discount.gamma;
  rep.sol = solve_equilibrium(inst, grid, opts);
  const auto& g = grid;
  const auto& sol = rep.sol;
  const double gam = rep.gamma;

  ScalarField fdiag = diag_extract(sol.f);
  for (int k = 0; k < g.Ns; ++k) {
    const double s = g.s(k);
    for (int j = 0; j < g.Nt; ++j) {
      if (!sol.f.present(j, k)) continue;
      const double w = std::exp(-gam * (g.t(j) - s));
      for (int i = 0; i < g.Nx; ++i) {
        const double V = sol.V.at(i, j);
        rep.E1 = std::max(rep.E1,
                          std::abs(sol.f.at(i, j, k) - w * V) / (1.0 + std::abs(V)));
        const double Vd = fdiag.at(i, j);
        rep.E1_diag = std::max(
            rep.E1_diag, std::abs(sol.f.at(i, j, k) - w * Vd) / (1.0 + std::abs(Vd)));
      }
    }
  }
  for (int j = 0; j < g.Nt; ++j)
    for (int i = 0; i < g.Nx; ++i) {
      const double V = sol.V.at(i, j);
      rep.E2 = std::max(rep.E2,
                        std::abs(sol.d.at(i, j) - gam * V) / (1.0 + std::abs(V)));
    }

  // mode comparison against the frozen-s diagonal equation
  ScalarField wlit = paper_literal_w(inst, grid, sol.gamma);
  ScalarField dxrev = sol.d_x.flipped_time();
  for (int j = 0; j < g.Nt; ++j)
    for (int i = 0; i < g.Nx; ++i) {
      const double gv = gam * sol.v.at(i, j);
      rep.gap_family_dx = std::max(rep.gap_family_dx, std::abs(dxrev.at(i, j) - gv));
      rep.gap_literal_w = std::max(rep.gap_literal_w, std::abs(wlit.at(i, j) - gv));
      rep.gap_modes = std::max(rep.gap_modes, std::abs(wlit.at(i, j) - dxrev.at(i, j)));
    }
  return rep;
}

}  // namespace eqsing
