#pragma once

#include <utility>
#include <vector>

#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"

namespace eqsing {

enum class CouplingMode : int { family, paper_literal };

/// Shape-preserving cubic Hermite fit of the raw boundary, used for the
/// frame-velocity term; the raw grid boundary stays in charge of region
/// classification.
struct SmoothedBoundary {
  std::vector<double> t, y, slope;  // reversed-time nodes
  bool constant = false;

  double eval(double tau) const;
  double deriv(double tau) const;
  double max_value() const;
  double max_abs_slope() const;
};

/// Fits the boundary rows.  When every row after the initial one carries the
/// no-crossing flag the boundary is treated as constant at x_max (empty
/// purchasing region).  Throws std::runtime_error with smoothing advice when
/// the fitted slope exceeds max_slope.
SmoothedBoundary smooth_boundary(const FreeBoundary& gamma_rev, double max_slope);

/// Family of value slices f^s(x,t), one linear parabolic solve per s-node in
/// the frame attached to the boundary, extended affinely into the purchasing
/// region.  Slices are independent; threads > 1 fans them out.
FamilyField solve_value_family(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                               const FreeBoundary& gamma_rev, int threads = 1);

/// Same machinery for the s-sensitivity family q^s = d/ds f^s: the discount
/// weight beta(.) is replaced by -beta'(.) in the source, the gradient datum
/// and the terminal anchor.
FamilyField solve_sensitivity_family(const ProblemInstance& inst,
                                     const SpaceTimeGrid& grid,
                                     const FreeBoundary& gamma_rev, int threads = 1);

/// Coupling term d(x,t) = q(x,t,s=t) and its x-gradient.  The gradient never
/// differences across the boundary: one-sided stencils are used at the
/// interface and the window edges.
std::pair<ScalarField, ScalarField> coupling_term(const FamilyField& q,
                                                  const FreeBoundary* gamma_fwd = nullptr);

/// Diagnostic: the standalone equation for w = d_x solved exactly as printed
/// (frozen-s reading of the diagonal), for comparison against the family
/// route.  Never fed into the fixed point by default.
ScalarField paper_literal_w(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                            const FreeBoundary& gamma_rev);

namespace detail {

/// Discount-weight indirection shared by the value and sensitivity solves.
struct FamilyWeights {
  const ProblemInstance* inst;
  bool sensitivity;
  double operator()(double tau) const {
    return sensitivity ? -inst->beta_p(tau) : inst->beta(tau);
  }
};

FamilyField solve_family(const ProblemInstance& inst, const SpaceTimeGrid& grid,
                         const FreeBoundary& gamma_rev, const FamilyWeights& w,
                         int threads);

}  // namespace detail

}  // namespace eqsing
