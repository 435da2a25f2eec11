#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eqsing {

/// Uniform truncation of the space-time slab and of the s-indexed family
/// axis.  The s-grid is a restriction of the t-grid: (Nt-1) must be a
/// multiple of (Ns-1), so family diagonals land on stored slices.
struct SpaceTimeGrid {
  double x_min = -1.0, x_max = 1.0;
  int Nx = 2;
  double T = 1.0;
  int Nt = 2;
  int Ns = 2;

  SpaceTimeGrid() = default;
  SpaceTimeGrid(double xmin, double xmax, int nx, double horizon, int nt, int ns);

  double dx() const { return (x_max - x_min) / (Nx - 1); }
  double dt() const { return T / (Nt - 1); }
  double ds() const { return T / (Ns - 1); }
  double x(int i) const { return x_min + i * dx(); }
  double t(int j) const { return j * dt(); }
  double s(int k) const { return k * ds(); }
  int s_stride() const { return (Nt - 1) / (Ns - 1); }
};

enum class TimeAxis : std::uint8_t { forward, reversed };

/// Node values on the (x, t) grid.  The time axis records whether index j
/// means physical time t_j or reversed time tau_j = T - t.
struct ScalarField {
  SpaceTimeGrid grid;
  TimeAxis axis = TimeAxis::forward;
  std::vector<double> v;

  ScalarField() = default;
  ScalarField(const SpaceTimeGrid& g, TimeAxis ax, double fill = 0.0)
      : grid(g), axis(ax), v(static_cast<size_t>(g.Nx) * g.Nt, fill) {}

  double& at(int i, int j) { return v[static_cast<size_t>(j) * grid.Nx + i]; }
  double at(int i, int j) const { return v[static_cast<size_t>(j) * grid.Nx + i]; }
  double* row(int j) { return v.data() + static_cast<size_t>(j) * grid.Nx; }
  const double* row(int j) const { return v.data() + static_cast<size_t>(j) * grid.Nx; }

  /// Same values re-indexed onto the opposite time axis.
  ScalarField flipped_time() const;
};

/// s-indexed family values f^s(x,t) in forward time, defined for t >= s.
/// Nodes with t < s are absent (stored as NaN).
struct FamilyField {
  SpaceTimeGrid grid;
  std::vector<double> v;

  FamilyField() = default;
  explicit FamilyField(const SpaceTimeGrid& g);

  bool present(int j, int k) const { return grid.t(j) >= grid.s(k) - 1e-12; }
  double& at(int i, int j, int k) {
    return v[(static_cast<size_t>(k) * grid.Nt + j) * grid.Nx + i];
  }
  double at(int i, int j, int k) const {
    return v[(static_cast<size_t>(k) * grid.Nt + j) * grid.Nx + i];
  }
  double* slice_row(int j, int k) {
    return v.data() + (static_cast<size_t>(k) * grid.Nt + j) * grid.Nx;
  }
};

/// Waiting/purchasing boundary, one location per time node.
struct FreeBoundary {
  SpaceTimeGrid grid;
  TimeAxis axis = TimeAxis::reversed;
  std::vector<double> g;
  std::vector<std::uint8_t> clamped;  // 1 where no crossing was found in-window

  FreeBoundary() = default;
  FreeBoundary(const SpaceTimeGrid& gr, TimeAxis ax)
      : grid(gr), axis(ax), g(gr.Nt, gr.x_max), clamped(gr.Nt, 0) {}

  FreeBoundary flipped_time() const;
  bool any_clamped() const;
  /// Piecewise-linear evaluation in the field's own time variable.
  double eval(double t) const;
};

/// Bilinear interpolation; exact at nodes.  Throws std::out_of_range when
/// (x,t) lies outside the grid.
double interp2(const ScalarField& f, double x, double t);

/// Diagonal d(x,t) = q(x, t, s = t).  Uses the stored slice when an s-node
/// matches t exactly, otherwise linear interpolation in s on the two largest
/// present slices.  Throws std::runtime_error when fewer than two slices
/// bracket some t.
ScalarField diag_extract(const FamilyField& q);

// CSV, one "x,t[,s],value" row per node, row-major by t, forward time.
void write_field_csv(const std::string& path, const ScalarField& f);
ScalarField read_field_csv(const std::string& path, const SpaceTimeGrid& g);
void write_family_csv(const std::string& path, const FamilyField& f);
FamilyField read_family_csv(const std::string& path, const SpaceTimeGrid& g);
void write_boundary_csv(const std::string& path, const FreeBoundary& b);
FreeBoundary read_boundary_csv(const std::string& path, const SpaceTimeGrid& g);

}  // namespace eqsing
