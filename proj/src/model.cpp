#include "eqsing/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace eqsing {

namespace {

bool finite(double v) { return std::isfinite(v); }

std::string loc(double x, double t) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "(x=%.6g, t=%.6g)", x, t);
  return buf;
}

void push(AssumptionReport& r, const std::string& name, double margin,
          bool strict = false, const std::string& where = {}) {
  AssumptionItem it;
  it.name = name;
  it.margin = margin;
  it.pass = strict ? (margin > 0.0) : (margin >= 0.0);
  it.where = where;
  r.items.push_back(it);
}

}  // namespace

bool DiscountSpec::is_constant_one() const {
  switch (family) {
    case Family::exponential: return gamma == 0.0;
    case Family::hyperbolic: return k == 0.0;
    case Family::mixture:
      return (lambda * g1 == 0.0) && ((1.0 - lambda) * g2 == 0.0);
  }
  return false;
}

void ProblemInstance::finalize() {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(vol.sigma0 > 0.0)) throw std::invalid_argument("volatility must be positive");
  if (running.CH < 0.0) throw std::invalid_argument("running loss must be nonnegative");
  if (terminal.CF < 0.0) throw std::invalid_argument("terminal loss must be nonnegative");
  if (!(cost.c0 > 0.0)) throw std::invalid_argument("cost must be positive");
  if (bound_M <= 0.0) throw std::invalid_argument("bound_M must be positive");

  switch (discount.family) {
    case DiscountSpec::Family::exponential:
      if (discount.gamma < 0.0) throw std::invalid_argument("exponential discount needs gamma >= 0");
      break;
    case DiscountSpec::Family::hyperbolic:
      if (discount.k < 0.0) throw std::invalid_argument("hyperbolic discount needs k >= 0");
      break;
    case DiscountSpec::Family::mixture:
      if (discount.lambda < 0.0 || discount.lambda > 1.0 || discount.g1 < 0.0 ||
          discount.g2 < 0.0)
        throw std::invalid_argument("mixture discount needs lambda in [0,1], rates >= 0");
      break;
  }

  // beta non-increasing with beta(0) = 1 on a sample grid
  if (std::abs(beta(0.0) - 1.0) > 1e-14)
    throw std::invalid_argument("discount must satisfy beta(0) = 1");
  for (int j = 0; j <= 64; ++j) {
    const double t = horizon * j / 64.0;
    if (beta_p(t) > 1e-14) throw std::invalid_argument("discount must be non-increasing");
    if (!(beta(t) > 0.0)) throw std::invalid_argument("discount must stay positive");
  }

  // terminal problem convexity probe: a -> F(x-a) + c(T) a strictly convex
  if (terminal.CF > 0.0) {
    for (int i = 0; i <= 32; ++i) {
      const double x = -10.0 + 20.0 * i / 32.0;
      if (!(F_pp(x) > 0.0))
        throw std::invalid_argument("terminal purchase problem is not strictly convex");
    }
  }

  eff = effective_terminal(*this);
}

std::pair<double, double> discount_eval(const ProblemInstance& inst, double t) {
  if (t < 0.0 || t > inst.horizon)
    throw std::out_of_range("discount_eval: t outside [0, T]");
  return {inst.beta(t), inst.beta_p(t)};
}

double ProblemInstance::max_discount_rate(double h) const {
  h = std::max(0.0, h);
  switch (discount.family) {
    case DiscountSpec::Family::exponential: return discount.gamma;
    case DiscountSpec::Family::hyperbolic: return discount.k;  // rate decreasing in t
    case DiscountSpec::Family::mixture: {
      double m = 0.0;
      for (int j = 0; j <= 100; ++j) {
        const double tau = h * j / 100.0;
        m = std::max(m, -beta_p(tau) / beta(tau));
      }
      return m;
    }
  }
  return 0.0;
}

double effective_terminal_bruteforce(const TerminalLossSpec& F, double cT,
                                     double x, double a_max, double da) {
  double best = std::numeric_limits<double>::infinity();
  double best_a = 0.0;
  const long n = std::lround(a_max / da);
  for (long m = 0; m <= n; ++m) {
    const double a = m * da;
    const double val = F.value(x - a) + cT * a;
    if (val < best) {
      best = val;
      best_a = a;
    }
  }
  if (best_a >= a_max - da) throw std::runtime_error("ill-posed terminal problem");
  return best;
}

EffectiveTerminal effective_terminal(const ProblemInstance& inst) {
  EffectiveTerminal e;
  e.F = inst.terminal;
  e.cT = inst.c(inst.horizon);
  if (!(e.cT > 0.0)) throw std::runtime_error("ill-posed terminal problem");
  if (inst.terminal.CF <= 0.0 || inst.terminal.psiF <= 0.0) {
    e.xstar = std::numeric_limits<double>::infinity();  // zero-minimizer family
    return e;
  }
  // first-order condition F'(xstar) = c(T)
  e.xstar = std::log(e.cT / (inst.terminal.CF * inst.terminal.psiF)) /
            inst.terminal.psiF;
  return e;
}

// ---------------------------------------------------------------------------
// Closed-form inequality chains of the example family
// ---------------------------------------------------------------------------

AssumptionReport check_remark_example(const ProblemInstance& inst) {
  const double b = inst.drift.b, a = inst.drift.a, sg = inst.vol.sigma0;
  const double CF = inst.terminal.CF, PF = inst.terminal.psiF;
  const double CH = inst.running.CH, x0 = inst.running.x0;
  const double c = inst.cost.c0, kbar = inst.kappa_spec.kbar,
               Ck = inst.kappa_spec.Ck, T = inst.horizon;

  for (double v : {b, a, sg, CF, PF, CH, x0, c, kbar, Ck, T, inst.bound_M,
                   inst.running.psi.p0, inst.running.psi.p1})
    if (!finite(v)) throw std::invalid_argument("non-finite parameter");

  AssumptionReport r;

  // profile extrema of Psi_H and Psi_H'/Psi_H over [0, T]
  const int n = 1000;
  double psi_min = std::numeric_limits<double>::infinity(), psi_max = -psi_min;
  double ratio_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= n; ++j) {
    const double t = T * j / n;
    const double p = inst.running.psi.value(t);
    const double dp = inst.running.psi.deriv(t);
    psi_min = std::min(psi_min, p);
    psi_max = std::max(psi_max, p);
    if (p > 0.0) ratio_min = std::min(ratio_min, dp / p);
  }

  // first block
  push(r, "b > 0", b, true);
  push(r, "sigma > 0", sg, true);
  push(r, "C_F > 0", CF, true);
  push(r, "C_H > 0", CH, true);
  push(r, "psiF > max(1, 1/b)", PF - std::max(1.0, 1.0 / b), true);
  push(r, "a > max(b + sigma^2/2, 1)", a - std::max(b + 0.5 * sg * sg, 1.0), true);
  push(r, "a < b*psiF + sigma^2*psiF^2/2", b * PF + 0.5 * sg * sg * PF * PF - a, true);
  push(r, "kbar > a", kbar - a, true);
  push(r, "C_kappa > 0", Ck, true);
  push(r, "C_kappa < psiF*exp(-(kbar+a)*T)", PF * std::exp(-(kbar + a) * T) - Ck, true);

  // second block: Psi_H profile
  push(r, "min Psi_H > C_kappa*exp(kbar*T)", psi_min - Ck * std::exp(kbar * T), true);
  push(r, "max Psi_H < psiF", PF - psi_max, true);
  push(r, "min Psi_H'/Psi_H > a", ratio_min - a, true);

  // third block: kbar bracket and the cost bound through K
  push(r, "kbar > max Psi_H", kbar - psi_max, true);
  push(r, "kbar < psiF", PF - kbar, true);
  double K = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= n; ++j) {
    const double t = T * j / n;
    const double p = inst.running.psi.value(t);
    const double dp = inst.running.psi.deriv(t);
    const double den = dp - a * p;
    if (den <= 0.0) continue;  // flagged by the Psi_H ratio check
    const double num = -2.0 * dp / p - 0.5 * sg * sg * p * p - b * p + 2.0 * a;
    K = std::min(K, num / den);
  }
  push(r, "c > 0", c, true);
  push(r, "c < C_F*psiF*exp(psiF*K)", CF * PF * std::exp(PF * K) - c, true);

  // fourth block: x0 bracket
  push(r, "x0 > ln(c/(C_F*psiF))/psiF", x0 - std::log(c / (CF * PF)) / PF, true);
  push(r, "x0 < ln(a*c/(C_F*psiF))/psiF", std::log(a * c / (CF * PF)) / PF - x0, true);
  push(r, "x0 < K", K - x0, true);

  // fifth block: the three discount conditions
  double bnd1 = std::numeric_limits<double>::infinity();
  double bnd2 = std::numeric_limits<double>::infinity();
  double hx0_max = -std::numeric_limits<double>::infinity();
  for (int j = 0; j <= n; ++j) {
    const double t = T * j / n;
    const double p = inst.running.psi.value(t);
    const double dp = inst.running.psi.deriv(t);
    bnd1 = std::min(bnd1, CH * p * p / (c * PF) * std::pow(c / (CF * PF), p / PF));
    bnd2 = std::min(bnd2, -2.0 * dp / p - (dp - a * p) * x0 -
                              0.5 * sg * sg * p * p - b * p + 2.0 * a);
    hx0_max = std::max(hx0_max, CH * p / c * std::exp(p * x0));
  }
  const double mb0 = -inst.beta_p(0.0);
  double rate_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= n; ++j) {
    const double t = T * j / n;
    rate_min = std::min(rate_min, inst.beta_p(t) / inst.beta(t));
  }
  push(r, "-beta'(0) <= min_t{C_H*Psi_H^2/(c*psiF)*(c/(C_F*psiF))^(Psi_H/psiF)}",
       bnd1 - mb0);
  push(r, "-beta'(0) <= min_t{-2*Psi_H'/Psi_H - (Psi_H'-a*Psi_H)*x0 - sigma^2*Psi_H^2/2 - b*Psi_H + 2*a}",
       bnd2 - mb0);
  push(r, "min beta'/beta >= max_t{(C_H*Psi_H/c)*exp(Psi_H*x0)} - a",
       rate_min - (hx0_max - a));

  // the exponent kbar is constrained twice; report when the two windows conflict
  const double lo = std::max(a, psi_max);
  if (lo >= PF) {
    r.notes.push_back("kbar window empty: max(a, max Psi_H) >= psiF; the two "
                      "constraints on kbar cannot hold together");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Grid-based operator inequalities
// ---------------------------------------------------------------------------

namespace {

// Physical-time form of the reversed-time operator applied to a coefficient
// field phi(x, r): phi_t + sigma^2/2 phi_xx + (sigma sigma_x + mu) phi_x
// + mu_x phi, all evaluated at physical (x, r).
struct FieldEvals {
  double v, t, x, xx;
};

double L_phys(const ProblemInstance& in, double x, double r, const FieldEvals& f) {
  const double s = in.sigma(x, r);
  return f.t + 0.5 * s * s * f.xx + (s * in.sigma_x(x, r) + in.mu(x, r)) * f.x +
         in.mu_x(x, r) * f.v;
}

struct Worst {
  double margin = std::numeric_limits<double>::infinity();
  double x = 0, t = 0;
  void update(double m, double xx, double tt) {
    if (m < margin) {
      margin = m;
      x = xx;
      t = tt;
    }
  }
  bool seen() const { return std::isfinite(margin); }
};

}  // namespace

AssumptionReport check_assumption_grid(const ProblemInstance& in,
                                       const ProbeGrid& probe) {
  AssumptionReport rep;
  const double T = in.horizon;
  const double hx = 1e-5 * std::max(1.0, probe.x_max - probe.x_min);
  const double ht = 1e-6 * T;
  const double xstar = in.eff.xstar;
  const double x0 = in.running.x0;
  const double b0p = in.beta_p(0.0);

  Worst c134a, c134b, c134c, c134d, c2a, c2b, t1a, t1b, t1c, t2, c5;
  Worst c6a, c6b, c6c, c6d, c7, c8, c9, c10;

  for (int j = 0; j < probe.nt; ++j) {
    const double r = T * j / std::max(1, probe.nt - 1);  // physical time
    const double rate = in.max_discount_rate(r);
    for (int i = 0; i < probe.nx; ++i) {
      const double x = probe.x_min + (probe.x_max - probe.x_min) * i /
                                         std::max(1, probe.nx - 1);
      const double sg = in.sigma(x, r);

      c134a.update(sg, x, r);
      c134b.update(-in.mu_x(x, r), x, r);
      c134c.update(in.mu_xx(x, r), x, r);
      c134d.update(in.mu_xxx(x, r), x, r);

      c2a.update(-b0p * in.eff.d2(x), x, r);
      c2b.update(in.H_xx(x, r) + b0p * in.eff.d2(x), x, r);

      t1a.update(-in.c_p(r), x, r);
      t1b.update(-in.sigma_t(x, r), x, r);
      t1c.update(-in.mu_xt(x, r), x, r);
      t2.update(-(sg * in.sigma_xt(x, r) + in.sigma_t(x, r) * in.sigma_x(x, r) +
                  in.mu_t(x, r)),
                x, r);
      c5.update(-(sg * in.sigma_xx(x, r) + in.sigma_x(x, r) * in.sigma_x(x, r) +
                  2.0 * in.mu_x(x, r)),
                x, r);

      const double Hx = in.H_x(x, r);
      c6a.update(-Hx - (rate * in.c(r) + in.c_p(r) + in.mu_x(x, r) * in.c(r)), x, r);
      c6b.update(Hx + b0p * in.eff.d1(x), x, r);
      c6c.update(-b0p * in.eff.d1(x), x, r);

      // L(Ftilde') on the exponential branch of the effective terminal loss;
      // the continuation above the kink is affine and excluded (a.e. data)
      if (x < xstar - 2.0 * hx) {
        FieldEvals f;
        f.v = in.eff.d1(x);
        f.t = 0.0;
        f.x = in.eff.d2(x);
        f.xx = (in.eff.d2(x + hx) - in.eff.d2(x - hx)) / (2.0 * hx);
        c6d.update(L_phys(in, x, r, f), x, r);
      }

      // L(H_x) and its x-derivative, skipping the kink at x0
      if (std::abs(x - x0) > 2.0 * hx) {
        auto LHx = [&](double xx) {
          FieldEvals f;
          f.v = in.H_x(xx, r);
          f.t = (in.H_x(xx, r + ht) - in.H_x(xx, std::max(0.0, r - ht))) /
                (r - ht >= 0.0 ? 2.0 * ht : ht);
          f.x = in.H_xx(xx, r);
          f.xx = (in.H_xx(xx + hx, r) - in.H_xx(xx - hx, r)) / (2.0 * hx);
          return L_phys(in, xx, r, f);
        };
        c7.update(b0p * Hx - LHx(x), x, r);
        if (std::abs(x - x0) > 4.0 * hx) {
          const double dLHx = (LHx(x + hx) - LHx(x - hx)) / (2.0 * hx);
          c8.update(b0p * in.H_xx(x, r) - dLHx, x, r);
        }
      }

      if (x <= -1.0) {
        // analytic partials of kappa(x, r) = exp(E x), E = C_k e^{kbar r}
        const double E = in.kappa_spec.Ck * std::exp(in.kappa_spec.kbar * r);
        const double kap = std::exp(E * x);
        FieldEvals f;
        f.v = kap;
        f.t = in.kappa_spec.kbar * E * x * kap;
        f.x = E * kap;
        f.xx = E * E * kap;
        c9.update(-Hx - in.bound_M * L_phys(in, x, r, f), x, r);
        c10.update(in.bound_M * kap - in.eff.d1(x), x, r);
      }
    }
  }

  auto add = [&](const char* name, const Worst& w, bool strict = false) {
    if (!w.seen()) return;
    push(rep, name, w.margin, strict, loc(w.x, w.t));
  };
  add("sigma > 0", c134a, true);
  add("mu_x <= 0", c134b);
  add("mu_xx >= 0", c134c);
  add("mu_xxx >= 0", c134d);
  add("-beta'(0)*Ftilde'' >= 0", c2a);
  add("H_xx + beta'(0)*Ftilde'' >= 0", c2b);
  add("c' <= 0", t1a);
  add("sigma_t <= 0", t1b);
  add("mu_xt <= 0", t1c);
  add("sigma*sigma_xt + sigma_t*sigma_x + mu_t <= 0", t2);
  add("sigma*sigma_xx + sigma_x^2 + 2*mu_x <= 0", c5);
  add("max(-beta'/beta)*c + c' + mu_x*c + H_x <= 0", c6a);
  add("H_x + beta'(0)*Ftilde' > 0", c6b, true);
  add("beta'(0)*Ftilde' <= 0", c6c);
  add("L(Ftilde') >= 0 (x <= xstar)", c6d);
  add("L(H_x) <= beta'(0)*H_x", c7);
  add("d/dx L(H_x) <= beta'(0)*H_xx", c8);
  add("M*L(kappa) <= -H_x (x <= -1)", c9);
  add("Ftilde' <= M*kappa (x <= -1)", c10);

  // asymptotic decay of the data at the left edge
  const double tail = 1e-6;
  double h_edge = 0, hxx_edge = 0;
  for (int j = 0; j < probe.nt; ++j) {
    const double r = T * j / std::max(1, probe.nt - 1);
    h_edge = std::max(h_edge, in.H(probe.x_min, r));
    hxx_edge = std::max(hxx_edge, in.H_xx(probe.x_min, r));
  }
  push(rep, "H(x_min, .) decays", tail - h_edge);
  push(rep, "H_xx(x_min, .) decays", tail - hxx_edge);
  push(rep, "F(x_min) decays", tail - in.F(probe.x_min));

  if (std::isfinite(xstar) && xstar < probe.x_max)
    rep.notes.push_back("L(Ftilde') evaluated left of the terminal kink only: "
                        "the continuation above it is affine with slope c(T), "
                        "where L(Ftilde') = mu_x*c(T) < 0 for any mean-reverting drift");
  return rep;
}

}  // namespace eqsing
