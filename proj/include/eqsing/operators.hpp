#pragma once

#include <vector>

#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"

namespace eqsing {

/// Penalty scaling: value C_n * alpha_eps(z) with alpha_eps(z) = -exp(-z/eps).
/// The exponent is capped so the evaluation stays finite far on the wrong
/// side of the obstacle (the truncated-penalty device).
struct PenaltyParams {
  double eps = 1e-2;
  double Cn = 1.0;
};

struct PenaltyEval {
  double value;  // C_n * alpha_eps(z)  (<= 0)
  double slope;  // d(value)/dz         (>= 0)
};

PenaltyEval penalty(double z, const PenaltyParams& p);

/// Tridiagonal system; lo[0] and up[n-1] are unused.
struct TriDiag {
  std::vector<double> lo, di, up;
  size_t size() const { return di.size(); }
};

/// Thomas elimination.  Throws std::runtime_error on a vanishing pivot.
std::vector<double> solve_tridiagonal(const TriDiag& m, const std::vector<double>& rhs);

double tridiag_residual_inf(const TriDiag& m, const std::vector<double>& x,
                            const std::vector<double>& rhs);

enum class BcKind : int { dirichlet, neumann };

/// Per-node coefficients of one parabolic row: the operator reads
///   diff * u_xx + adv * u_x + zer * u + src.
struct RowCoeffs {
  std::vector<double> diff, adv, zer, src;
};

/// One implicit-Euler step of u_t = diff u_xx + adv u_x + zer u + src,
/// assembled as (I - dt A) u_new = u_prev + dt src.  Central advection with
/// first-order upwind fallback at nodes where the centered row loses
/// diagonal dominance.
struct OperatorStencil {
  TriDiag M;
  std::vector<double> src;
  double dt = 0.0, dx = 1.0;
  BcKind left = BcKind::dirichlet, right = BcKind::dirichlet;
};

/// Throws std::logic_error when a diffusion coefficient is non-positive at an
/// interior node.
OperatorStencil assemble_implicit(const RowCoeffs& c, double dx, double dt,
                                  BcKind left, BcKind right);

/// Advances one row.  For a Dirichlet side, bc is the boundary value; for a
/// Neumann side, bc is the outward-axis gradient, closed with a second-order
/// ghost node.
std::vector<double> implicit_step(const OperatorStencil& st,
                                  const std::vector<double>& prev,
                                  double bc_left, double bc_right);

/// Pointwise central-difference evaluation of the reversed-time operator
///   L v = -v_t + sigma^2/2 v_xx + (sigma sigma_x + mu) v_x + mu_x v,
/// coefficients at (x, T - t).  Interior nodes only (throws std::logic_error).
double apply_L(const ScalarField& v, const ProblemInstance& inst, int i, int j);

/// Pointwise central-difference evaluation of the forward generator
///   A phi = phi_t + mu phi_x + sigma^2/2 phi_xx.
double apply_A(const ScalarField& phi, const ProblemInstance& inst, int i, int j);

}  // namespace eqsing
