// Compares the serial reference kernels with their OpenMP versions on the
// two designated parallel axes: family slices and Monte-Carlo paths.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "eqsing/config.hpp"
#include "eqsing/coupling.hpp"
#include "eqsing/equilibrium.hpp"
#include "eqsing/simulate.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace eqsing;
using clk = std::chrono::steady_clock;

namespace {

double seconds(clk::time_point a, clk::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

double sup_gap(const FamilyField& a, const FamilyField& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double x = a.v[i], y = b.v[i];
    if (std::isnan(x) && std::isnan(y)) continue;
    m = std::max(m, std::abs(x - y));
  }
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cfg_path = argc > 1 ? argv[1] : "instances/remark52_active.cfg";
  int threads = 2;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  if (argc > 2) threads = std::stoi(argv[2]);

  LoadedInstance li = load_instance(cfg_path);
  std::printf("instance %s, grid %dx%d (ns %d), %d threads\n", cfg_path.c_str(),
              li.grid.Nx, li.grid.Nt, li.grid.Ns, threads);

  FixedPointOptions fp;
  EquilibriumSolution sol = solve_equilibrium(li.inst, li.grid, fp);
  std::printf("equilibrium solved in %d coupling iterations (converged: %s)\n",
              sol.coupling_iterations, sol.converged ? "yes" : "no");

  // family axis
  auto t0 = clk::now();
  FamilyField serial = solve_sensitivity_family(li.inst, li.grid, sol.gamma, 1);
  auto t1 = clk::now();
  FamilyField parallel = solve_sensitivity_family(li.inst, li.grid, sol.gamma, threads);
  auto t2 = clk::now();
  const double ts = seconds(t0, t1), tp = seconds(t1, t2);
  std::printf("family slices : serial %.3fs | omp %.3fs | speedup %.2fx | gap %.1e\n",
              ts, tp, ts / tp, sup_gap(serial, parallel));

  // path axis
  PathConfig pc;
  pc.x0 = sol.gamma_forward().g.front() - 2.0;
  pc.t0 = 0.0;
  pc.n_paths = 200000;
  pc.dt = li.inst.horizon / 500;
  pc.seed = 7;
  FreeBoundary gf = sol.gamma_forward();
  pc.threads = 1;
  t0 = clk::now();
  MCReport ra = simulate_objective(li.inst, gf, pc);
  t1 = clk::now();
  pc.threads = threads;
  MCReport rb = simulate_objective(li.inst, gf, pc);
  t2 = clk::now();
  const double ms = seconds(t0, t1), mp = seconds(t1, t2);
  std::printf("mc paths      : serial %.3fs | omp %.3fs | speedup %.2fx | gap %.1e\n",
              ms, mp, ms / mp, std::abs(ra.estimate - rb.estimate));
  return 0;
}
