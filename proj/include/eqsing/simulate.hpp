#pragma once

#include <cstdint>
#include <vector>

#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"

namespace eqsing {

/// Counter-based normal stream keyed by (seed, path, step): identical keys
/// give identical draws regardless of evaluation order or thread count, so
/// paired estimators share noise exactly.
struct CounterRng {
  std::uint64_t seed = 0;

  static std::uint64_t mix(std::uint64_t z);
  double uniform(std::uint64_t path, std::uint64_t step) const;
  double normal(std::uint64_t path, std::uint64_t step) const;
};

/// Inverse of the standard normal CDF (rational approximation, |err| < 1.2e-9).
double inv_normal_cdf(double u);

struct PathConfig {
  double x0 = 0.0;
  double t0 = 0.0;
  long n_paths = 1000;
  double dt = 1e-3;       // requested Euler step; rounded to divide T - t0
  std::uint64_t seed = 1;
  bool antithetic = false;
  int threads = 1;
  int trace_paths = 0;    // capped count of recorded paths
};

struct PathTrace {
  std::vector<double> t, x, xi;
};

struct MCReport {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  double running_mean = 0.0;
  double cost_mean = 0.0;
  double terminal_mean = 0.0;
  double dt_used = 0.0;
  double compare_value = 0.0;  // filled by callers that hold a solved field
  double z_score = 0.0;
  std::vector<PathTrace> traces;
};

/// Estimate of the objective of the control generated by the boundary law
/// from (x0, t0): initial jump to the boundary when started inside the
/// purchasing region, Euler steps with projection (overshoot becomes control
/// increment), left-endpoint running quadrature, optimal terminal purchase.
MCReport simulate_objective(const ProblemInstance& inst, const FreeBoundary& gamma_fwd,
                            const PathConfig& cfg);

/// Same path law with discounts anchored at s <= t0; compares against the
/// auxiliary family rather than the value function.
MCReport simulate_family_point(const ProblemInstance& inst, const FreeBoundary& gamma_fwd,
                               const PathConfig& cfg, double s);

enum class PerturbMode : int { no_purchase, extra_jump };

struct PerturbReport {
  double delta_hat = 0.0;   // (J_perturbed - J_law) / h
  double paired_se = 0.0;   // on the same scale as delta_hat
  double h_used = 0.0;
  double mean_law = 0.0;
  double mean_perturbed = 0.0;
};

/// First-order perturbation test with common random numbers: the perturbed
/// arm replaces the law on [t0, t0 + h) (flat, or flat after an immediate
/// extra jump) and re-engages the law at t0 + h.
PerturbReport perturbation_test(const ProblemInstance& inst, const FreeBoundary& gamma_fwd,
                                const PathConfig& cfg, double h, PerturbMode mode,
                                double jump_size = 0.0);

/// Numerically stable order-insensitive mean/variance reduction.
double pairwise_sum(const double* v, size_t n);

}  // namespace eqsing
