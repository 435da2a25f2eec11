#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace eqsing {

// ---------------------------------------------------------------------------
// Coefficient registry.
//
// Every coefficient is a member of a small closed family of parametric forms.
// Each family exposes its value together with the analytic partial
// derivatives the solvers and the parameter checker need; anything more
// exotic (mixed or third derivatives of composite expressions) is obtained by
// finite differences on these analytic evaluations.
// ---------------------------------------------------------------------------

/// Drift mu(x,t) = b - a*x (mean reverting; a = 0 gives a constant drift).
struct DriftSpec {
  double b = 0.0;
  double a = 0.0;

  double value(double x, double /*t*/) const { return b - a * x; }
  double dx(double, double) const { return -a; }
  double dxx(double, double) const { return 0.0; }
  double dxxx(double, double) const { return 0.0; }
  double dt(double, double) const { return 0.0; }
  double dxt(double, double) const { return 0.0; }
};

/// Volatility sigma(x,t) = sigma0 > 0.
struct VolatilitySpec {
  double sigma0 = 1.0;

  double value(double, double) const { return sigma0; }
  double dx(double, double) const { return 0.0; }
  double dxx(double, double) const { return 0.0; }
  double dt(double, double) const { return 0.0; }
  double dxt(double, double) const { return 0.0; }
};

/// Time profile of the running-loss exponent.
struct PsiSpec {
  enum class Family { constant, linear, exponential };
  Family family = Family::constant;
  double p0 = 1.0;  // constant / intercept / prefactor
  double p1 = 0.0;  // slope / rate

  double value(double t) const {
    switch (family) {
      case Family::constant: return p0;
      case Family::linear: return p0 + p1 * t;
      case Family::exponential: return p0 * std::exp(p1 * t);
    }
    return p0;
  }
  double deriv(double t) const {
    switch (family) {
      case Family::constant: return 0.0;
      case Family::linear: return p1;
      case Family::exponential: return p0 * p1 * std::exp(p1 * t);
    }
    return 0.0;
  }
};

/// Running loss H(x,t) = C_H * exp(Psi(t) * x) for x <= x0, continued
/// linearly (value and slope matched at x0) above x0.  C_H = 0 gives H = 0.
struct RunningLossSpec {
  double CH = 1.0;
  double x0 = 0.0;
  PsiSpec psi;

  double value(double x, double t) const {
    const double p = psi.value(t);
    if (x <= x0) return CH * std::exp(p * x);
    const double base = CH * std::exp(p * x0);
    return base * (1.0 + p * (x - x0));
  }
  double dx(double x, double t) const {
    const double p = psi.value(t);
    const double xe = std::min(x, x0);
    return CH * p * std::exp(p * xe);
  }
  double dxx(double x, double t) const {
    if (x > x0) return 0.0;
    const double p = psi.value(t);
    return CH * p * p * std::exp(p * x);
  }
};

/// Terminal loss F(x) = C_F * exp(PsiF * x).
struct TerminalLossSpec {
  double CF = 1.0;
  double psiF = 1.0;

  double value(double x) const { return CF * std::exp(psiF * x); }
  double d1(double x) const { return CF * psiF * std::exp(psiF * x); }
  double d2(double x) const { return CF * psiF * psiF * std::exp(psiF * x); }
};

/// Purchase cost c(t) = c0 > 0 (constant).
struct CostSpec {
  double c0 = 1.0;

  double value(double) const { return c0; }
  double deriv(double) const { return 0.0; }
};

/// Left-tail dominating weight kappa(x,t) = exp(C_k * x * exp(kbar * t)),
/// defined on x <= -1.
struct KappaSpec {
  double Ck = 1.0;
  double kbar = 0.0;

  double value(double x, double t) const {
    return std::exp(Ck * x * std::exp(kbar * t));
  }
};

/// Discount function beta(t), beta(0) = 1, non-increasing, C^1.
struct DiscountSpec {
  enum class Family { exponential, hyperbolic, mixture };
  Family family = Family::exponential;
  double gamma = 0.0;              // exponential: exp(-gamma t)
  double k = 0.0;                  // hyperbolic: 1/(1 + k t)
  double lambda = 1.0;             // mixture: lambda e^{-g1 t} + (1-lambda) e^{-g2 t}
  double g1 = 0.0, g2 = 0.0;

  double value(double t) const {
    switch (family) {
      case Family::exponential: return std::exp(-gamma * t);
      case Family::hyperbolic: return 1.0 / (1.0 + k * t);
      case Family::mixture:
        return lambda * std::exp(-g1 * t) + (1.0 - lambda) * std::exp(-g2 * t);
    }
    return 1.0;
  }
  double deriv(double t) const {
    switch (family) {
      case Family::exponential: return -gamma * std::exp(-gamma * t);
      case Family::hyperbolic: {
        const double d = 1.0 + k * t;
        return -k / (d * d);
      }
      case Family::mixture:
        return -lambda * g1 * std::exp(-g1 * t) -
               (1.0 - lambda) * g2 * std::exp(-g2 * t);
    }
    return 0.0;
  }
  bool is_constant_one() const;
};

// ---------------------------------------------------------------------------
// Effective terminal loss and problem instance
// ---------------------------------------------------------------------------

/// Terminal loss after the optimal terminal purchase:
///   Ftilde(x) = min_{a >= 0} { F(x - a) + cT * a }.
/// For the exponential family the kink xstar solves F'(xstar) = cT and the
/// continuation above it is affine with slope cT.
struct EffectiveTerminal {
  double xstar = 0.0;   // +inf when the purchase is never optimal
  double cT = 0.0;      // cost at the horizon
  TerminalLossSpec F;

  double value(double x) const {
    if (x <= xstar) return F.value(x);
    return F.value(xstar) + cT * (x - xstar);
  }
  double d1(double x) const { return x <= xstar ? F.d1(x) : cT; }
  double d2(double x) const { return x <= xstar ? F.d2(x) : 0.0; }
  /// Optimal terminal purchase a*(x).
  double minimizer(double x) const { return x <= xstar ? 0.0 : x - xstar; }
};

/// One fully specified control problem.  Immutable after construction; all
/// evaluations are pure.
struct ProblemInstance {
  DriftSpec drift;
  VolatilitySpec vol;
  RunningLossSpec running;
  TerminalLossSpec terminal;
  CostSpec cost;
  DiscountSpec discount;
  KappaSpec kappa_spec;
  double horizon = 1.0;
  double bound_M = 1.0;

  EffectiveTerminal eff;  // filled by finalize()

  /// Validates invariants and computes the effective terminal loss.
  /// Throws std::invalid_argument on violated invariants.
  void finalize();

  double T() const { return horizon; }

  double mu(double x, double t) const { return drift.value(x, t); }
  double mu_x(double x, double t) const { return drift.dx(x, t); }
  double mu_xx(double x, double t) const { return drift.dxx(x, t); }
  double mu_xxx(double x, double t) const { return drift.dxxx(x, t); }
  double mu_t(double x, double t) const { return drift.dt(x, t); }
  double mu_xt(double x, double t) const { return drift.dxt(x, t); }

  double sigma(double x, double t) const { return vol.value(x, t); }
  double sigma_x(double x, double t) const { return vol.dx(x, t); }
  double sigma_xx(double x, double t) const { return vol.dxx(x, t); }
  double sigma_t(double x, double t) const { return vol.dt(x, t); }
  double sigma_xt(double x, double t) const { return vol.dxt(x, t); }

  double H(double x, double t) const { return running.value(x, t); }
  double H_x(double x, double t) const { return running.dx(x, t); }
  double H_xx(double x, double t) const { return running.dxx(x, t); }

  double F(double x) const { return terminal.value(x); }
  double F_p(double x) const { return terminal.d1(x); }
  double F_pp(double x) const { return terminal.d2(x); }

  double c(double t) const { return cost.value(t); }
  double c_p(double t) const { return cost.deriv(t); }

  double beta(double t) const { return discount.value(t); }
  double beta_p(double t) const { return discount.deriv(t); }

  double kappa(double x, double t) const { return kappa_spec.value(x, t); }

  /// max over tau in [0, h] of -beta'(tau)/beta(tau).
  double max_discount_rate(double h) const;
};

/// (beta(t), beta'(t)); throws std::out_of_range for t outside [0, T].
std::pair<double, double> discount_eval(const ProblemInstance& inst, double t);

/// Effective terminal loss of an instance.  Uses the closed-form first-order
/// condition for the exponential family; the numeric fallback scans a
/// brute-force purchase grid.  Throws std::runtime_error("ill-posed terminal
/// problem") when the probe range contains no finite minimizer.
EffectiveTerminal effective_terminal(const ProblemInstance& inst);

/// Brute-force oracle for Ftilde: min over a in [0, a_max] with step da of
/// F(x - a) + cT * a.  Test/diagnostic path, independent of the closed form.
double effective_terminal_bruteforce(const TerminalLossSpec& F, double cT,
                                     double x, double a_max = 20.0,
                                     double da = 1e-4);

// ---------------------------------------------------------------------------
// Parameter checks
// ---------------------------------------------------------------------------

struct AssumptionItem {
  std::string name;    // the inequality, written out
  double margin = 0.0; // >= 0 means satisfied
  bool pass = false;
  std::string where;   // worst location, if grid-based
};

struct AssumptionReport {
  std::vector<AssumptionItem> items;
  std::vector<std::string> notes;
  bool all_pass() const {
    for (const auto& it : items)
      if (!it.pass) return false;
    return true;
  }
  const AssumptionItem* find(const std::string& name) const {
    for (const auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
};

/// Checks the closed-form inequality chains of the mean-reverting /
/// exponential-loss example family, block by block, in order.  Requires the
/// instance to use exactly that family (mean-reverting drift, constant
/// volatility and cost, exponential terminal loss, exp-linear running loss).
/// Throws std::invalid_argument on non-finite parameters or family mismatch.
AssumptionReport check_remark_example(const ProblemInstance& inst);

struct ProbeGrid {
  double x_min = -1.0, x_max = 1.0;
  int nx = 101, nt = 21;
};

/// Numerically evaluates the operator inequalities and asymptotic-decay
/// checks on a probe grid; reports the worst margin per inequality.
/// Report-only: never throws on violations.
AssumptionReport check_assumption_grid(const ProblemInstance& inst,
                                       const ProbeGrid& probe);

}  // namespace eqsing
