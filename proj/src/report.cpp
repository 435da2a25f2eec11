#include "eqsing/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace eqsing {

std::string fnv1a_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json manifest_json(const std::string& instance_file,
                             const SpaceTimeGrid& grid, std::uint64_t seed,
                             const std::string& out_dir,
                             const nlohmann::json& options) {
  return {
      {"instance_file", instance_file},
      {"instance_hash", fnv1a_file_hex(instance_file)},
      {"grid",
       {{"x_min", grid.x_min},
        {"x_max", grid.x_max},
        {"nx", grid.Nx},
        {"T", grid.T},
        {"nt", grid.Nt},
        {"ns", grid.Ns}}},
      {"seed", seed},
      {"out_dir", out_dir},
      {"options", options},
  };
}

nlohmann::json to_json(const IterationStats& st) {
  return {{"iteration", st.iteration},
          {"dv_sup", st.dv_sup},
          {"gamma_move", st.gamma_move},
          {"dx_min", st.dx_min},
          {"hx_gap_min", st.hx_gap_min},
          {"dxx_min", st.dxx_min},
          {"hxx_gap_min", st.hxx_gap_min},
          {"Cn", st.Cn},
          {"newton_total", st.newton_total}};
}

nlohmann::json trace_json(const EquilibriumSolution& sol) {
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& st : sol.trace) tr.push_back(to_json(st));
  return {{"converged", sol.converged},
          {"coupling_iterations", sol.coupling_iterations},
          {"oscillation_suspected", sol.oscillation_suspected},
          {"iterations", tr},
          {"notes", sol.notes},
          {"penalty",
           {{"Cn", sol.obstacle_meta.Cn},
            {"eps_final", sol.obstacle_meta.eps_final},
            {"eps_schedule", sol.obstacle_meta.eps_schedule},
            {"newton_total", sol.obstacle_meta.newton_total},
            {"newton_worst_step", sol.obstacle_meta.newton_worst_step},
            {"worst_newton_residual", sol.obstacle_meta.worst_newton_residual},
            {"complementarity_tol", sol.obstacle_meta.complementarity_tol},
            {"contact_set_empty", sol.obstacle_meta.contact_set_empty}}}};
}

nlohmann::json to_json(const ResidualReport& r) {
  return {{"r1_min", r.r1_min},
          {"r2_min", r.r2_min},
          {"comp_sup", r.comp_sup},
          {"comp_where", r.comp_where},
          {"family_W_sup", r.family_W_sup},
          {"family_W_where", r.family_W_where},
          {"family_P_sup", r.family_P_sup},
          {"terminal_V_sup", r.terminal_V_sup},
          {"terminal_f_sup", r.terminal_f_sup}};
}

nlohmann::json to_json(const MCReport& r) {
  return {{"estimate", r.estimate},
          {"std_error", r.std_error},
          {"n_paths", r.n_paths},
          {"running_mean", r.running_mean},
          {"cost_mean", r.cost_mean},
          {"terminal_mean", r.terminal_mean},
          {"dt_used", r.dt_used},
          {"compare_value", r.compare_value},
          {"z_score", r.z_score}};
}

nlohmann::json to_json(const PerturbReport& r) {
  return {{"delta_hat", r.delta_hat},
          {"paired_se", r.paired_se},
          {"h_used", r.h_used},
          {"mean_law", r.mean_law},
          {"mean_perturbed", r.mean_perturbed}};
}

nlohmann::json to_json(const AssumptionReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items)
    items.push_back({{"name", it.name},
                     {"margin", it.margin},
                     {"pass", it.pass},
                     {"where", it.where}});
  return {{"all_pass", r.all_pass()}, {"items", items}, {"notes", r.notes}};
}

nlohmann::json oracle_json(const OracleReport& r) {
  return {{"gamma", r.gamma},
          {"E1", r.E1},
          {"E1_diag", r.E1_diag},
          {"E2", r.E2},
          {"gap_family_dx", r.gap_family_dx},
          {"gap_literal_w", r.gap_literal_w},
          {"gap_modes", r.gap_modes}};
}

bool validate_report(const nlohmann::json& rep, std::string* error) {
  auto fail = [&](const std::string& msg) {
    if (error) *error = msg;
    return false;
  };
  if (!rep.is_object()) return fail("report must be an object");
  if (!rep.contains("tool") || !rep["tool"].is_object() ||
      !rep["tool"].contains("name") || !rep["tool"].contains("version"))
    return fail("missing tool {name, version}");
  if (!rep.contains("manifest") || !rep["manifest"].is_object())
    return fail("missing manifest object");
  const auto& m = rep["manifest"];
  for (const char* k : {"instance_file", "instance_hash", "grid", "seed", "out_dir"})
    if (!m.contains(k)) return fail(std::string("manifest missing ") + k);
  const auto& g = m["grid"];
  for (const char* k : {"x_min", "x_max", "nx", "T", "nt", "ns"})
    if (!g.contains(k) || !g[k].is_number())
      return fail(std::string("manifest grid missing numeric ") + k);
  if (!rep.contains("solve") || !rep["solve"].is_object())
    return fail("missing solve object");
  if (!rep["solve"].contains("converged") || !rep["solve"]["converged"].is_boolean())
    return fail("solve.converged must be boolean");
  if (!rep.contains("residuals") || !rep["residuals"].is_object())
    return fail("missing residuals object");
  return true;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace eqsing
