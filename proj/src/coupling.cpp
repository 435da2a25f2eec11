#include "eqsing/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "eqsing/operators.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace eqsing {

// ---------------------------------------------------------------------------
// Boundary smoothing (Fritsch-Carlson shape-preserving Hermite)
// ---------------------------------------------------------------------------

double SmoothedBoundary::eval(double tau) const {
  if (constant || t.size() == 1) return y.front();
  if (tau <= t.front()) return y.front();
  if (tau >= t.back()) return y.back();
  const double h = t[1] - t[0];
  const size_t j = std::min(static_cast<size_t>((tau - t.front()) / h),
                            t.size() - 2);
  const double u = (tau - t[j]) / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
  const double h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u);
  const double h11 = u * u * (u - 1);
  return h00 * y[j] + h * h10 * slope[j] + h01 * y[j + 1] + h * h11 * slope[j + 1];
}

double SmoothedBoundary::deriv(double tau) const {
  if (constant || t.size() == 1) return 0.0;
  if (tau <= t.front()) return slope.front();
  if (tau >= t.back()) return slope.back();
  const double h = t[1] - t[0];
  const size_t j = std::min(static_cast<size_t>((tau - t.front()) / h),
                            t.size() - 2);
  const double u = (tau - t[j]) / h;
  const double d00 = 6 * u * (u - 1) / h;
  const double d10 = (1 - u) * (1 - 3 * u);
  const double d01 = -d00;
  const double d11 = u * (3 * u - 2);
  return d00 * y[j] + d10 * slope[j] + d01 * y[j + 1] + d11 * slope[j + 1];
}

double SmoothedBoundary::max_value() const {
  return *std::max_element(y.begin(), y.end());
}

double SmoothedBoundary::max_abs_slope() const {
  double m = 0.0;
  for (double s : slope) m = std::max(m, std::abs(s));
  return m;
}

SmoothedBoundary smooth_boundary(const FreeBoundary& gamma_rev, double max_slope) {
  if (gamma_rev.axis != TimeAxis::reversed)
    throw std::invalid_argument("smooth_boundary: boundary must be on the reversed axis");
  const int nt = gamma_rev.grid.Nt;
  SmoothedBoundary sb;

  bool tail_clamped = true;
  for (int j = 1; j < nt; ++j)
    if (!gamma_rev.clamped[j]) tail_clamped = false;
  if (tail_clamped) {
    // purchasing region empty after the initial row: constant frame
    sb.constant = true;
    sb.t = {0.0, gamma_rev.grid.T};
    sb.y = {gamma_rev.grid.x_max, gamma_rev.grid.x_max};
    sb.slope = {0.0, 0.0};
    return sb;
  }

  sb.t.resize(nt);
  sb.y.resize(nt);
  sb.slope.assign(nt, 0.0);
  for (int j = 0; j < nt; ++j) {
    sb.t[j] = gamma_rev.grid.t(j);
    sb.y[j] = gamma_rev.g[j];
  }
  const double h = gamma_rev.grid.dt();
  std::vector<double> d(nt - 1);
  for (int j = 0; j + 1 < nt; ++j) d[j] = (sb.y[j + 1] - sb.y[j]) / h;
  for (int j = 1; j + 1 < nt; ++j) {
    if (d[j - 1] * d[j] <= 0.0)
      sb.slope[j] = 0.0;
    else
      sb.slope[j] = 2.0 * d[j - 1] * d[j] / (d[j - 1] + d[j]);
  }
  // one-sided endpoint slopes, clipped to preserve shape
  auto endpoint = [&](double d0, double d1) {
    double m = ((2.0 * h + h) * d0 - h * d1) / (2.0 * h);
    if (m * d0 <= 0.0) m = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(m) > 3.0 * std::abs(d0)) m = 3.0 * d0;
    return m;
  };
  sb.slope[0] = nt > 2 ? endpoint(d[0], d[1]) : d[0];
  sb.slope[nt - 1] = nt > 2 ? endpoint(d[nt - 2], d[nt - 3]) : d[nt - 2];

  if (sb.max_abs_slope() > max_slope) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "coupling: boundary slope %.3g exceeds the stability bound %.3g; "
                  "refine the time grid or widen the window before re-solving",
                  sb.max_abs_slope(), max_slope);
    throw std::runtime_error(buf);
  }
  return sb;
}

// ---------------------------------------------------------------------------
// Family solves in the boundary frame
// ---------------------------------------------------------------------------

namespace detail {

namespace {

struct ZetaGrid {
  double zmin = 0.0, dz = 1.0;
  int n = 2;
  double z(int i) const { return zmin + i * dz; }
  double interp(const std::vector<double>& row, double zq) const {
    const double f = std::clamp((zq - zmin) / dz, 0.0, double(n - 1));
    const int i = std::min(static_cast<int>(f), n - 2);
    const double w = f - i;
    return (1.0 - w) * row[i] + w * row[i + 1];
  }
};

}  // namespace

FamilyField solve_family(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                         const FreeBoundary& gamma_rev, const FamilyWeights& w,
                         int threads) {
  const SmoothedBoundary sb =
      smooth_boundary(gamma_rev, 20.0 * grid.dx() / grid.dt());
  const double T = grid.T, dt = grid.dt();
  const int stride = grid.s_stride();

  ZetaGrid zg;
  zg.dz = grid.dx();
  zg.n = static_cast<int>(std::ceil((sb.max_value() - grid.x_min) / zg.dz - 1e-9)) + 1;
  zg.n = std::max(zg.n, 3);
  zg.zmin = -(zg.n - 1) * zg.dz;

  FamilyField fam(grid);
  std::string error;

  auto solve_slice = [&](int k) {
    const double s = grid.s(k);
    const int m0 = k * stride;        // forward index of t = s
    const int steps = grid.Nt - 1 - m0;

    // terminal anchor, exact by definition
    for (int i = 0; i < grid.Nx; ++i)
      fam.at(i, grid.Nt - 1, k) = w(T - s) * inst.eff.value(grid.x(i));
    if (steps == 0) return;

    std::vector<double> h(zg.n), hn;
    const double g0 = sb.eval(0.0);
    for (int i = 0; i < zg.n; ++i)
      h[i] = w(T - s) * inst.eff.value(zg.z(i) + g0);

    RowCoeffs rc;
    rc.diff.assign(zg.n, 0.0);
    rc.adv.assign(zg.n, 0.0);
    rc.zer.assign(zg.n, 0.0);
    rc.src.assign(zg.n, 0.0);

    for (int j = 1; j <= steps; ++j) {
      const double tau = j * dt;
      const double gb = sb.eval(tau), gb_p = sb.deriv(tau);
      const double r = T - tau;  // physical time
      for (int i = 0; i < zg.n; ++i) {
        const double x = zg.z(i) + gb;
        const double sg = inst.sigma(x, r);
        rc.diff[i] = 0.5 * sg * sg;
        rc.adv[i] = gb_p + inst.mu(x, r);
        rc.src[i] = w(T - s - tau) * inst.H(x, r);
      }
      OperatorStencil st =
          assemble_implicit(rc, zg.dz, dt, BcKind::dirichlet, BcKind::neumann);
      hn = implicit_step(st, h, 0.0, w(T - tau - s) * inst.c(r));
      h.swap(hn);

      // map back onto the x grid at the forward node t = T - tau
      const int jf = grid.Nt - 1 - j;
      const double slope_p = w(T - s - tau) * inst.c(r);
      for (int i = 0; i < grid.Nx; ++i) {
        const double x = grid.x(i);
        fam.at(i, jf, k) = x <= gb ? zg.interp(h, x - gb)
                                   : h[zg.n - 1] + slope_p * (x - gb);
      }
    }
  };

  if (threads > 1) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int k = 0; k < grid.Ns; ++k) {
      try {
        solve_slice(k);
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw std::runtime_error(error);
#else
    for (int k = 0; k < grid.Ns; ++k) solve_slice(k);
#endif
  } else {
    for (int k = 0; k < grid.Ns; ++k) solve_slice(k);
  }
  return fam;
}

}  // namespace detail

FamilyField solve_value_family(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                               const FreeBoundary& gamma_rev, int threads) {
  return detail::solve_family(inst, grid, gamma_rev, {&inst, false}, threads);
}

FamilyField solve_sensitivity_family(const ProblemInstance& inst,
                                     const SpaceTimeGrid& grid,
                                     const FreeBoundary& gamma_rev, int threads) {
  return detail::solve_family(inst, grid, gamma_rev, {&inst, true}, threads);
}

// ---------------------------------------------------------------------------
// Diagonal coupling term
// ---------------------------------------------------------------------------

std::pair<ScalarField, ScalarField> coupling_term(const FamilyField& q,
                                                  const FreeBoundary* gamma_fwd) {
  ScalarField d = diag_extract(q);
  const auto& g = d.grid;
  ScalarField dx(g, TimeAxis::forward);
  const double h = g.dx();

  for (int j = 0; j < g.Nt; ++j) {
    const double gb = gamma_fwd ? gamma_fwd->g[j] : g.x_max + 1.0;
    auto in_P = [&](int i) { return g.x(i) >= gb; };
    for (int i = 0; i < g.Nx; ++i) {
      const bool p = in_P(i);
      const bool left_ok = i > 0 && in_P(i - 1) == p;
      const bool right_ok = i + 1 < g.Nx && in_P(i + 1) == p;
      if (left_ok && right_ok) {
        dx.at(i, j) = (d.at(i + 1, j) - d.at(i - 1, j)) / (2.0 * h);
      } else if (right_ok && i + 2 < g.Nx && in_P(i + 2) == p) {
        dx.at(i, j) =
            (-3.0 * d.at(i, j) + 4.0 * d.at(i + 1, j) - d.at(i + 2, j)) / (2.0 * h);
      } else if (left_ok && i >= 2 && in_P(i - 2) == p) {
        dx.at(i, j) =
            (3.0 * d.at(i, j) - 4.0 * d.at(i - 1, j) + d.at(i - 2, j)) / (2.0 * h);
      } else if (right_ok) {
        dx.at(i, j) = (d.at(i + 1, j) - d.at(i, j)) / h;
      } else if (left_ok) {
        dx.at(i, j) = (d.at(i, j) - d.at(i - 1, j)) / h;
      } else {
        dx.at(i, j) = 0.0;  // isolated node, no admissible stencil
      }
    }
  }
  return {std::move(d), std::move(dx)};
}

// ---------------------------------------------------------------------------
// Frozen-s diagonal equation, kept for comparison only
// ---------------------------------------------------------------------------

ScalarField paper_literal_w(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                            const FreeBoundary& gamma_rev) {
  const SmoothedBoundary sb =
      smooth_boundary(gamma_rev, 20.0 * grid.dx() / grid.dt());
  const double mb0 = -inst.beta_p(0.0);
  ScalarField wfield(grid, TimeAxis::reversed);
  const int n = grid.Nx;
  for (int i = 0; i < n; ++i) wfield.at(i, 0) = mb0 * inst.eff.d1(grid.x(i));

  RowCoeffs rc;
  rc.diff.assign(n, 0.0);
  rc.adv.assign(n, 0.0);
  rc.zer.assign(n, 0.0);
  rc.src.assign(n, 0.0);
  std::vector<double> prev(n), row(n);

  for (int j = 1; j < grid.Nt; ++j) {
    const double tau = grid.t(j), r = grid.T - tau;
    const double gb = sb.eval(tau);
    const double pval = mb0 * inst.c(r);
    for (int i = 0; i < n; ++i) {
      const double x = grid.x(i);
      const double sg = inst.sigma(x, r);
      rc.diff[i] = 0.5 * sg * sg;
      rc.adv[i] = sg * inst.sigma_x(x, r) + inst.mu(x, r);
      rc.zer[i] = inst.mu_x(x, r);
      rc.src[i] = mb0 * inst.H_x(x, r);
    }
    OperatorStencil st =
        assemble_implicit(rc, grid.dx(), grid.dt(), BcKind::dirichlet, BcKind::dirichlet);
    prev.assign(wfield.row(j - 1), wfield.row(j - 1) + n);
    TriDiag M = st.M;
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = prev[i] + st.dt * st.src[i];
    M.di[0] = 1.0;
    M.up[0] = 0.0;
    rhs[0] = mb0 * inst.eff.d1(grid.x_min);
    M.di[n - 1] = 1.0;
    M.lo[n - 1] = 0.0;
    rhs[n - 1] = pval;
    // purchasing-side nodes carry the printed boundary value
    for (int i = 1; i + 1 < n; ++i) {
      if (grid.x(i) >= gb) {
        M.lo[i] = 0.0;
        M.di[i] = 1.0;
        M.up[i] = 0.0;
        rhs[i] = pval;
      }
    }
    row = solve_tridiagonal(M, rhs);
    std::copy(row.begin(), row.end(), wfield.row(j));
  }
  return wfield;
}

}  // namespace eqsing
