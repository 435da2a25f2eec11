#pragma once

#include <string>
#include <vector>

#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"
#include "eqsing/operators.hpp"

namespace eqsing {

enum class SolverPath : int { penalty, direct_complementarity };

struct ObstacleSolveOptions {
  std::vector<double> eps_schedule{1e-1, 1e-2, 1e-3, 1e-4};
  double newton_tol = 1e-12;
  int newton_max = 60;
  SolverPath path = SolverPath::penalty;
  double psor_omega = 1.5;
  double psor_tol = 1e-10;
  long psor_max_iters = 200000;
};

struct ObstacleSolveMeta {
  double Cn = 0.0;
  double eps_final = 0.0;
  std::vector<double> eps_schedule;
  long newton_total = 0;
  int newton_worst_step = 0;
  double worst_newton_residual = 0.0;
  long psor_total = 0;
  double worst_psor_residual = 0.0;
  double complementarity_tol = 0.0;  // measured max |min(residual, c - v)|
  bool contact_set_empty = false;
};

struct ObstacleSolution {
  ScalarField v;  // reversed time
  ObstacleSolveMeta meta;
};

namespace detail {

/// Row data of one reversed-time obstacle march, decoupled from the
/// coefficient registry so kernels can be exercised on synthetic data.
struct ObstacleData {
  SpaceTimeGrid grid;
  std::vector<double> initial;     // Nx
  std::vector<double> obstacle;    // Nt, the cap c(T - tau_j)
  std::vector<double> obstacle_d;  // Nt, d/d(phys t) of the cost at T - tau_j
  std::vector<double> bcl, bcr;    // Nt Dirichlet values
  ScalarField source;              // reversed axis
  ScalarField diff, adv, zer;      // reversed axis operator coefficients
};

ObstacleData make_obstacle_data(const ProblemInstance& inst,
                                const SpaceTimeGrid& grid,
                                const ScalarField& dx_rev);

/// Scale of the penalty: 0.9 * min of the source over the predicted contact
/// set { L(cap) + source >= 0 }; falls back to the global minimum when that
/// set is empty (then the obstacle cannot bind after the initial row).
double penalty_scale(const ObstacleData& d, bool* contact_empty);

ObstacleSolution march_penalized(const ObstacleData& d, const ObstacleSolveOptions& o);
ObstacleSolution march_direct(const ObstacleData& d, const ObstacleSolveOptions& o);

}  // namespace detail

/// Penalized march for v = g_x given the coupling gradient d_x (reversed
/// time).  Continues down the eps schedule with warm starts and returns the
/// finest-eps field.  Throws on Newton failure or when d_x leaves the
/// admissible band 0 <= d_x < H_x.
ObstacleSolution solve_penalized(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                                 const ScalarField& dx_rev, const ObstacleSolveOptions& o);

/// Independent cross-check: per-step linear complementarity by projected SOR.
ObstacleSolution solve_direct(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                              const ScalarField& dx_rev, const ObstacleSolveOptions& o);

/// Boundary location per time row: smallest x with c(T-t) - v <= tol,
/// linearly interpolated between the bracketing nodes.  Rows without a
/// crossing are clamped to x_max and flagged.
FreeBoundary extract_boundary(const ScalarField& v_rev, const ProblemInstance& inst,
                              double tol);

/// Default extraction tolerance, tied to the contact smear of the penalty.
inline double boundary_tol(const ObstacleSolveMeta& m) {
  return 10.0 * m.eps_final * m.Cn;
}

/// Trapezoid integral per row with g(x_min) = 0, re-indexed to forward time.
/// Throws when the left-truncation check v(x_min, .) < 1e-8 fails.
ScalarField integrate_to_value(const ScalarField& v_rev, const SpaceTimeGrid& grid);

}  // namespace eqsing
