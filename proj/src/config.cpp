#include "eqsing/config.hpp"

#include <fstream>
#include <sstream>

namespace eqsing {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Kv {
  std::map<std::string, std::string> m;
  const std::string* find(const std::string& k) const {
    auto it = m.find(k);
    return it == m.end() ? nullptr : &it->second;
  }
  std::string str(const std::string& k) const {
    const auto* v = find(k);
    if (!v) throw ConfigError("missing config key: " + k);
    return *v;
  }
  double num(const std::string& k) const {
    const std::string v = str(k);
    try {
      size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("malformed numeric value for key " + k + ": '" + v + "'");
    }
  }
  double num_or(const std::string& k, double dflt) const {
    return find(k) ? num(k) : dflt;
  }
  int integer(const std::string& k) const {
    const double d = num(k);
    const int i = static_cast<int>(d);
    if (i != d) throw ConfigError("key " + k + " must be an integer");
    return i;
  }
};

Kv parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instance file: " + path);
  Kv kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv.m[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

PsiSpec::Family psi_family(const std::string& s) {
  if (s == "constant") return PsiSpec::Family::constant;
  if (s == "linear") return PsiSpec::Family::linear;
  if (s == "exponential") return PsiSpec::Family::exponential;
  throw ConfigError("unknown running.psi.family: " + s);
}

}  // namespace

DiscountSpec parse_discount(const std::string& text) {
  DiscountSpec d;
  const auto colon = text.find(':');
  const std::string fam = text.substr(0, colon);
  std::map<std::string, double> args;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string part;
    while (std::getline(ss, part, ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos)
        throw ConfigError("malformed discount spec: " + text);
      try {
        args[trim(part.substr(0, eq))] = std::stod(part.substr(eq + 1));
      } catch (const std::exception&) {
        throw ConfigError("malformed discount spec: " + text);
      }
    }
  }
  auto arg = [&](const char* k, double dflt) {
    auto it = args.find(k);
    return it == args.end() ? dflt : it->second;
  };
  if (fam == "exponential" || fam == "none") {
    d.family = DiscountSpec::Family::exponential;
    d.gamma = arg("gamma", 0.0);
  } else if (fam == "hyperbolic") {
    d.family = DiscountSpec::Family::hyperbolic;
    d.k = arg("k", 0.0);
  } else if (fam == "mixture") {
    d.family = DiscountSpec::Family::mixture;
    d.lambda = arg("lambda", 1.0);
    d.g1 = arg("g1", 0.0);
    d.g2 = arg("g2", 0.0);
  } else {
    throw ConfigError("unknown discount family: " + fam);
  }
  return d;
}

LoadedInstance load_instance(const std::string& path) {
  const Kv kv = parse_file(path);
  LoadedInstance out;
  out.raw = kv.m;
  ProblemInstance& in = out.inst;

  in.horizon = kv.num("horizon");

  if (kv.str("drift.family") != "mean-reverting")
    throw ConfigError("unknown drift.family: " + kv.str("drift.family"));
  in.drift.b = kv.num("drift.b");
  in.drift.a = kv.num("drift.a");

  if (kv.str("vol.family") != "constant")
    throw ConfigError("unknown vol.family: " + kv.str("vol.family"));
  in.vol.sigma0 = kv.num("vol.sigma0");

  if (kv.str("running.family") != "exp-linear")
    throw ConfigError("unknown running.family: " + kv.str("running.family"));
  in.running.CH = kv.num("running.CH");
  in.running.x0 = kv.num("running.x0");
  in.running.psi.family = psi_family(kv.str("running.psi.family"));
  in.running.psi.p0 = kv.num("running.psi.p0");
  in.running.psi.p1 = kv.num_or("running.psi.p1", 0.0);

  if (kv.str("terminal.family") != "exponential")
    throw ConfigError("unknown terminal.family: " + kv.str("terminal.family"));
  in.terminal.CF = kv.num("terminal.CF");
  in.terminal.psiF = kv.num("terminal.psiF");

  if (kv.str("cost.family") != "constant")
    throw ConfigError("unknown cost.family: " + kv.str("cost.family"));
  in.cost.c0 = kv.num("cost.c0");

  in.discount = parse_discount(kv.str("discount.family") +
                               (kv.find("discount.args") ? ":" + kv.str("discount.args")
                                                         : std::string()));

  in.kappa_spec.Ck = kv.num("kappa.Ck");
  in.kappa_spec.kbar = kv.num("kappa.kbar");
  in.bound_M = kv.num("bound_M");

  try {
    in.finalize();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid instance: ") + e.what());
  }

  out.grid = SpaceTimeGrid(kv.num("grid.x_min"), kv.num("grid.x_max"),
                           kv.integer("grid.nx"), in.horizon, kv.integer("grid.nt"),
                           kv.integer("grid.ns"));
  return out;
}

}  // namespace eqsing
