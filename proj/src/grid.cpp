#include "eqsing/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace eqsing {

SpaceTimeGrid::SpaceTimeGrid(double xmin, double xmax, int nx, double horizon,
                             int nt, int ns)
    : x_min(xmin), x_max(xmax), Nx(nx), T(horizon), Nt(nt), Ns(ns) {
  if (!(x_min < x_max)) throw std::invalid_argument("grid: x_min must be < x_max");
  if (Nx < 2 || Nt < 2 || Ns < 2) throw std::invalid_argument("grid: Nx, Nt, Ns >= 2");
  if (!(T > 0.0)) throw std::invalid_argument("grid: T must be positive");
  if ((Nt - 1) % (Ns - 1) != 0)
    throw std::invalid_argument("grid: (Nt-1) must be a multiple of (Ns-1)");
}

ScalarField ScalarField::flipped_time() const {
  ScalarField out(grid, axis == TimeAxis::forward ? TimeAxis::reversed
                                                  : TimeAxis::forward);
  for (int j = 0; j < grid.Nt; ++j)
    std::copy(row(j), row(j) + grid.Nx, out.row(grid.Nt - 1 - j));
  return out;
}

FamilyField::FamilyField(const SpaceTimeGrid& g)
    : grid(g),
      v(static_cast<size_t>(g.Nx) * g.Nt * g.Ns,
        std::numeric_limits<double>::quiet_NaN()) {}

FreeBoundary FreeBoundary::flipped_time() const {
  FreeBoundary out(grid, axis == TimeAxis::forward ? TimeAxis::reversed
                                                   : TimeAxis::forward);
  for (int j = 0; j < grid.Nt; ++j) {
    out.g[grid.Nt - 1 - j] = g[j];
    out.clamped[grid.Nt - 1 - j] = clamped[j];
  }
  return out;
}

bool FreeBoundary::any_clamped() const {
  return std::any_of(clamped.begin(), clamped.end(),
                     [](std::uint8_t c) { return c != 0; });
}

double FreeBoundary::eval(double t) const {
  const double dt = grid.dt();
  if (t <= 0.0) return g.front();
  if (t >= grid.T) return g.back();
  const int j = std::min(static_cast<int>(t / dt), grid.Nt - 2);
  const double w = (t - j * dt) / dt;
  return (1.0 - w) * g[j] + w * g[j + 1];
}

double interp2(const ScalarField& f, double x, double t) {
  const auto& g = f.grid;
  const double eps = 1e-12 * std::max(1.0, std::abs(g.x_max));
  if (x < g.x_min - eps || x > g.x_max + eps || t < -eps || t > g.T + eps)
    throw std::out_of_range("interp2: query outside grid");
  const double fx = std::clamp((x - g.x_min) / g.dx(), 0.0, double(g.Nx - 1));
  const double ft = std::clamp(t / g.dt(), 0.0, double(g.Nt - 1));
  const int i = std::min(static_cast<int>(fx), g.Nx - 2);
  const int j = std::min(static_cast<int>(ft), g.Nt - 2);
  const double wx = fx - i, wt = ft - j;
  return (1.0 - wt) * ((1.0 - wx) * f.at(i, j) + wx * f.at(i + 1, j)) +
         wt * ((1.0 - wx) * f.at(i, j + 1) + wx * f.at(i + 1, j + 1));
}

ScalarField diag_extract(const FamilyField& q) {
  const auto& g = q.grid;
  ScalarField d(g, TimeAxis::forward);
  const double ds = g.ds();
  for (int j = 0; j < g.Nt; ++j) {
    const double t = g.t(j);
    // largest s-node not above t
    int k = std::min(static_cast<int>(std::floor(t / ds + 1e-12)), g.Ns - 1);
    const bool exact = std::abs(g.s(k) - t) <= 1e-12 * std::max(1.0, g.T);
    if (exact) {
      for (int i = 0; i < g.Nx; ++i) d.at(i, j) = q.at(i, j, k);
      continue;
    }
    // interpolate in s on the two largest present slices (one-sided near the
    // diagonal, second-order for smooth families)
    if (k < 1) throw std::runtime_error("diag_extract: s-grid too coarse to bracket t");
    const double s1 = g.s(k), s0 = g.s(k - 1);
    const double w = (t - s0) / (s1 - s0);
    for (int i = 0; i < g.Nx; ++i)
      d.at(i, j) = (1.0 - w) * q.at(i, j, k - 1) + w * q.at(i, j, k);
  }
  return d;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

}  // namespace

void write_field_csv(const std::string& path, const ScalarField& f) {
  const ScalarField fw = f.axis == TimeAxis::forward ? f : f.flipped_time();
  auto out = open_out(path);
  out << "x,t,value\n";
  std::string line;
  for (int j = 0; j < fw.grid.Nt; ++j)
    for (int i = 0; i < fw.grid.Nx; ++i) {
      line.clear();
      put(line, fw.grid.x(i));
      line += ',';
      put(line, fw.grid.t(j));
      line += ',';
      put(line, fw.at(i, j));
      line += '\n';
      out << line;
    }
}

ScalarField read_field_csv(const std::string& path, const SpaceTimeGrid& g) {
  auto in = open_in(path);
  std::string header;
  std::getline(in, header);
  ScalarField f(g, TimeAxis::forward);
  double x, t, val;
  char comma;
  size_t count = 0;
  while (in >> x >> comma >> t >> comma >> val) {
    const int i = static_cast<int>(std::lround((x - g.x_min) / g.dx()));
    const int j = static_cast<int>(std::lround(t / g.dt()));
    if (i < 0 || i >= g.Nx || j < 0 || j >= g.Nt)
      throw std::runtime_error("field csv node outside grid: " + path);
    f.at(i, j) = val;
    ++count;
  }
  if (count != static_cast<size_t>(g.Nx) * g.Nt)
    throw std::runtime_error("field csv has wrong node count: " + path);
  return f;
}

void write_family_csv(const std::string& path, const FamilyField& f) {
  auto out = open_out(path);
  out << "x,t,s,value\n";
  std::string line;
  for (int j = 0; j < f.grid.Nt; ++j)
    for (int k = 0; k < f.grid.Ns; ++k) {
      if (!f.present(j, k)) continue;
      for (int i = 0; i < f.grid.Nx; ++i) {
        line.clear();
        put(line, f.grid.x(i));
        line += ',';
        put(line, f.grid.t(j));
        line += ',';
        put(line, f.grid.s(k));
        line += ',';
        put(line, f.at(i, j, k));
        line += '\n';
        out << line;
      }
    }
}

FamilyField read_family_csv(const std::string& path, const SpaceTimeGrid& g) {
  auto in = open_in(path);
  std::string header;
  std::getline(in, header);
  FamilyField f(g);
  double x, t, s, val;
  char comma;
  while (in >> x >> comma >> t >> comma >> s >> comma >> val) {
    const int i = static_cast<int>(std::lround((x - g.x_min) / g.dx()));
    const int j = static_cast<int>(std::lround(t / g.dt()));
    const int k = static_cast<int>(std::lround(s / g.ds()));
    if (i < 0 || i >= g.Nx || j < 0 || j >= g.Nt || k < 0 || k >= g.Ns)
      throw std::runtime_error("family csv node outside grid: " + path);
    f.at(i, j, k) = val;
  }
  return f;
}

void write_boundary_csv(const std::string& path, const FreeBoundary& b) {
  const FreeBoundary fw = b.axis == TimeAxis::forward ? b : b.flipped_time();
  auto out = open_out(path);
  out << "t,value\n";
  std::string line;
  for (int j = 0; j < fw.grid.Nt; ++j) {
    line.clear();
    put(line, fw.grid.t(j));
    line += ',';
    put(line, fw.g[j]);
    line += '\n';
    out << line;
  }
}

FreeBoundary read_boundary_csv(const std::string& path, const SpaceTimeGrid& g) {
  auto in = open_in(path);
  std::string header;
  std::getline(in, header);
  FreeBoundary b(g, TimeAxis::forward);
  double t, val;
  char comma;
  while (in >> t >> comma >> val) {
    const int j = static_cast<int>(std::lround(t / g.dt()));
    if (j < 0 || j >= g.Nt) throw std::runtime_error("boundary csv node outside grid");
    b.g[j] = val;
  }
  return b;
}

}  // namespace eqsing
