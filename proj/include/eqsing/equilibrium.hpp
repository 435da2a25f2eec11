#pragma once

#include <string>
#include <vector>

#include "eqsing/coupling.hpp"
#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"
#include "eqsing/obstacle.hpp"

namespace eqsing {

struct FixedPointOptions {
  double theta = 0.5;         // damping of the coupling update, in (0, 1]
  double tol_fp = 1e-6;       // on ||v_k - v_{k-1}||_inf
  int max_iters = 100;
  enum class Init { zero_coupling, exponential_proxy };
  Init init = Init::zero_coupling;
  int threads = 1;
  ObstacleSolveOptions obstacle;
};

/// Per-iteration record: contraction of v, boundary movement, and the
/// admissible-band margins of the updated coupling term on the waiting side.
struct IterationStats {
  int iteration = 0;
  double dv_sup = 0.0;
  double gamma_move = 0.0;
  double dx_min = 0.0;        // min d_x                (>= 0 expected)
  double hx_gap_min = 0.0;    // min H_x - d_x          (>  0 expected)
  double dxx_min = 0.0;       // min d_xx               (>= 0 expected)
  double hxx_gap_min = 0.0;   // min H_xx - d_xx        (>= 0 expected)
  double Cn = 0.0;
  long newton_total = 0;
};

struct EquilibriumSolution {
  ScalarField v;        // reversed time
  ScalarField V;        // forward time
  FreeBoundary gamma;   // reversed time
  ScalarField d, d_x;   // forward time
  FamilyField f;        // value family, forward time
  std::vector<IterationStats> trace;
  bool converged = false;
  bool oscillation_suspected = false;
  int coupling_iterations = 0;
  ObstacleSolveMeta obstacle_meta;
  FixedPointOptions options;
  std::vector<std::string> notes;

  FreeBoundary gamma_forward() const { return gamma.flipped_time(); }
};

/// Damped Picard iteration between the obstacle solve and the sensitivity
/// family.  Non-convergence is reported in the returned trace, not thrown.
EquilibriumSolution solve_equilibrium(const ProblemInstance& inst,
                                      const SpaceTimeGrid& grid,
                                      const FixedPointOptions& opts);

struct ResidualReport {
  double r1_min = 0.0;            // min of A V + H - d over interior nodes
  double r2_min = 0.0;            // min of c - V_x
  double comp_sup = 0.0;          // sup |min(r1, r2)|
  std::string comp_where;
  double family_W_sup = 0.0;      // |A f^s + beta(t-s) H| on the waiting side
  std::string family_W_where;
  double family_P_sup = 0.0;      // |beta(t-s) c - f^s_x| on the purchasing side
  double terminal_V_sup = 0.0;    // |V(x,T) - Ftilde|
  double terminal_f_sup = 0.0;    // |f^s(x,T) - beta(T-s) Ftilde|
};

ResidualReport verify_residuals(const EquilibriumSolution& sol,
                                const ProblemInstance& inst);

struct OracleReport {
  double gamma = 0.0;
  double E1 = 0.0;        // against the integrated value field
  double E1_diag = 0.0;   // against the family diagonal f(x,t,t)
  double E2 = 0.0;        // coupling term against gamma * V
  double gap_family_dx = 0.0;    // ||d_x - gamma v||
  double gap_literal_w = 0.0;    // ||w_literal - gamma v||
  double gap_modes = 0.0;        // ||w_literal - d_x||
  EquilibriumSolution sol;
};

/// Exponential-discount reduction check.  Throws std::invalid_argument when
/// the instance's discount family is not exponential.
OracleReport exponential_oracle(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                                const FixedPointOptions& opts);

}  // namespace eqsing
