#pragma once

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tpsmag/eddy.hpp"
#include "tpsmag/fields.hpp"
#include "tpsmag/mesh.hpp"
#include "tpsmag/tps.hpp"

namespace tpsmag {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using FlatConfig = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline void flatten_json(const nlohmann::json& j, const std::string& prefix, FlatConfig& out) {
  if (j.is_object()) {
    for (const auto& [key, val] : j.items())
      flatten_json(val, prefix.empty() ? key : prefix + "." + key, out);
  } else if (j.is_array()) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) ss << " ";
      if (j[i].is_number())
        ss << j[i].dump();
      else
        ss << j[i].get<std::string>();
    }
    out[prefix] = ss.str();
  } else if (j.is_string()) {
    out[prefix] = j.get<std::string>();
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace detail

/// Flat sectioned key-value text: `[section]` headers and/or dotted keys,
/// `#`/`;` comments. Later keys override earlier ones.
inline FlatConfig parse_config_text(const std::string& text) {
  FlatConfig out;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out[key] = val;
  }
  return out;
}

inline FlatConfig parse_config_json(const std::string& text) {
  FlatConfig out;
  nlohmann::json j = nlohmann::json::parse(text);
  detail::flatten_json(j, "", out);
  return out;
}

inline FlatConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return parse_config_json(text);
  return parse_config_text(text);
}

// ---------------------------------------------------------------------------
// Typed accessors with key-named diagnostics.

class ConfigReader {
 public:
  explicit ConfigReader(FlatConfig cfg) : cfg_(std::move(cfg)) {}

  bool has(const std::string& key) const { return cfg_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& def) {
    used_.insert(key);
    auto it = cfg_.find(key);
    return it == cfg_.end() ? def : it->second;
  }

  double num(const std::string& key, double def) {
    used_.insert(key);
    auto it = cfg_.find(key);
    if (it == cfg_.end()) return def;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError("config key '" + key + "': not a number: " + it->second);
    }
  }

  int integer(const std::string& key, int def) {
    const double v = num(key, def);
    const int i = static_cast<int>(v);
    if (i != v) throw ConfigError("config key '" + key + "': not an integer");
    return i;
  }

  bool boolean(const std::string& key, bool def) {
    used_.insert(key);
    auto it = cfg_.find(key);
    if (it == cfg_.end()) return def;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("config key '" + key + "': not a boolean: " + s);
  }

  Vec3 vec3(const std::string& key, const Vec3& def) {
    used_.insert(key);
    auto it = cfg_.find(key);
    if (it == cfg_.end()) return def;
    std::istringstream ss(it->second);
    Vec3 v;
    if (!(ss >> v.x >> v.y >> v.z))
      throw ConfigError("config key '" + key + "': expected three numbers");
    std::string rest;
    if (ss >> rest) throw ConfigError("config key '" + key + "': expected three numbers");
    return v;
  }

  /// Throws on keys that were never consumed (parse-validate-reject).
  void reject_unknown() const {
    for (const auto& [key, val] : cfg_)
      if (!used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

 private:
  FlatConfig cfg_;
  mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Run configuration.

struct RunConfig {
  Vec3 mesh_lo{0, 0, 0}, mesh_hi{1, 1, 1};
  int mesh_n = 2;
  bool has_inner = false;
  Vec3 inner_lo{}, inner_hi{};

  SchemeConfig scheme;
  LowerOrderOp pi;
  DissipativeOp Pi;
  AppliedField f = AppliedField::constant({0, 0, 0});

  bool ellg = false;
  double mu0 = 1.0, sigma_inner = 1.0, sigma_outer = 1.0;
  Coupling coupling = Coupling::DC2;

  enum class MInit { Uniform, Smooth, Random };
  MInit m_init = MInit::Uniform;
  Vec3 m_value{1, 0, 0};
  unsigned seed = 1;
  enum class HInit { Zero, MinusMInside };
  HInit h_init = HInit::Zero;

  std::string out_dir = "out";
  int sample_every = 1;
  bool write_vtk = false;

  EllgConfig ellg_config() const {
    EllgConfig c;
    c.scheme = scheme;
    c.mu0 = mu0;
    c.sigma_inner = sigma_inner;
    c.sigma_outer = sigma_outer;
    c.coupling = coupling;
    return c;
  }
};

inline RunConfig build_run_config(const FlatConfig& flat) {
  ConfigReader r(flat);
  RunConfig c;

  c.mesh_lo = r.vec3("mesh.lo", c.mesh_lo);
  c.mesh_hi = r.vec3("mesh.hi", c.mesh_hi);
  c.mesh_n = r.integer("mesh.n", c.mesh_n);
  c.has_inner = r.has("mesh.inner_lo") || r.has("mesh.inner_hi");
  c.inner_lo = r.vec3("mesh.inner_lo", {});
  c.inner_hi = r.vec3("mesh.inner_hi", {});

  c.scheme.alpha = r.num("scheme.alpha", 1.0);
  c.scheme.lex2 = r.num("scheme.lex2", 1.0);
  c.scheme.k = r.num("scheme.k", 1e-2);
  c.scheme.T = r.num("scheme.T", 1.0);
  const std::string variant = r.str("scheme.variant", "tps2");
  if (variant == "tps1") c.scheme.variant = Variant::TPS1;
  else if (variant == "tps2") c.scheme.variant = Variant::TPS2;
  else throw ConfigError("config key 'scheme.variant': expected tps1|tps2");
  const std::string strategy = r.str("scheme.strategy", "ab");
  if (strategy == "fi") c.scheme.strategy = FieldStrategy::FI;
  else if (strategy == "ab") c.scheme.strategy = FieldStrategy::AB;
  else if (strategy == "ee") c.scheme.strategy = FieldStrategy::EE;
  else throw ConfigError("config key 'scheme.strategy': expected fi|ab|ee");
  const std::string rho = r.str("scheme.rho", "canonical");
  if (rho == "canonical") c.scheme.rho = RhoChoice::canonical();
  else if (rho == "zero") c.scheme.rho = RhoChoice::zero();
  else if (rho == "power") c.scheme.rho = RhoChoice::power(r.num("scheme.rho_delta", 1.0));
  else throw ConfigError("config key 'scheme.rho': expected canonical|power|zero");
  const std::string mchoice = r.str("scheme.m", "canonical");
  if (mchoice == "canonical") c.scheme.M = MChoice::canonical();
  else if (mchoice == "constant") c.scheme.M = MChoice::constant(r.num("scheme.m_const", 1.0));
  else throw ConfigError("config key 'scheme.m': expected canonical|constant");
  c.scheme.fixpoint_tol = r.num("scheme.fixpoint_tol", 1e-10);
  c.scheme.fixpoint_max = r.integer("scheme.fixpoint_max", 200);

  c.scheme.solver.tol = r.num("solver.tol", 1e-12);
  c.scheme.solver.max_iter = r.integer("solver.max_iter", 10000);
  c.scheme.solver.restart = r.integer("solver.restart", 50);
  c.scheme.solver.jacobi = r.boolean("solver.jacobi", false);

  const std::string pi_type = r.str("pi.type", "none");
  if (pi_type == "uniaxial")
    c.pi = LowerOrderOp::uniaxial(r.num("pi.coeff", 1.0), r.vec3("pi.axis", {0, 0, 1}));
  else if (pi_type != "none")
    throw ConfigError("config key 'pi.type': expected none|uniaxial");

  const std::string torque = r.str("torque.type", "none");
  if (torque == "slonczewski") {
    SlonczewskiParams sp;
    sp.P = r.num("torque.P", sp.P);
    sp.Je = r.num("torque.je", sp.Je);
    sp.Ms = r.num("torque.ms", sp.Ms);
    sp.d = r.num("torque.d", sp.d);
    c.Pi = DissipativeOp::slonczewski_physical(r.vec3("torque.p", {1, 0, 0}), sp);
  } else if (torque == "zhangli") {
    c.Pi = DissipativeOp::zhang_li(r.vec3("torque.u", {1, 0, 0}), r.num("torque.beta", 0.05));
  } else if (torque != "none") {
    throw ConfigError("config key 'torque.type': expected none|slonczewski|zhangli");
  }

  const std::string applied = r.str("applied.type", "none");
  if (applied == "none") c.f = AppliedField::constant({0, 0, 0});
  else if (applied == "constant") c.f = AppliedField::constant(r.vec3("applied.value", {}));
  else if (applied == "ramp")
    c.f = AppliedField::ramp(r.num("applied.time_scale", 1.0), r.num("applied.amplitude", 1.0));
  else if (applied == "samples") {
    const std::string s = r.str("applied.samples", "");
    std::vector<double> ts;
    std::vector<Vec3> fs;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) {
      std::istringstream is(item);
      double t;
      Vec3 v;
      if (!(is >> t >> v.x >> v.y >> v.z))
        throw ConfigError("config key 'applied.samples': expected 't x y z; ...'");
      ts.push_back(t);
      fs.push_back(v);
    }
    c.f = AppliedField::samples(std::move(ts), std::move(fs));
  } else {
    throw ConfigError("config key 'applied.type': expected none|constant|ramp|samples");
  }

  c.ellg = r.boolean("ellg.enabled", false);
  c.mu0 = r.num("ellg.mu0", 1.0);
  c.sigma_inner = r.num("ellg.sigma.inner", 1.0);
  c.sigma_outer = r.num("ellg.sigma.outer", 1.0);
  const std::string coupling = r.str("ellg.coupling", "dc2");
  if (coupling == "fc") c.coupling = Coupling::FC;
  else if (coupling == "dc2") c.coupling = Coupling::DC2;
  else if (coupling == "dc1") c.coupling = Coupling::DC1;
  else if (coupling == "sf") c.coupling = Coupling::SF;
  else throw ConfigError("config key 'ellg.coupling': expected fc|dc2|dc1|sf");
  if (c.ellg && !c.has_inner)
    throw ConfigError("ellg.enabled requires mesh.inner_lo and mesh.inner_hi");

  const std::string m_init = r.str("init.m", "uniform");
  if (m_init == "uniform") c.m_init = RunConfig::MInit::Uniform;
  else if (m_init == "smooth") c.m_init = RunConfig::MInit::Smooth;
  else if (m_init == "random") c.m_init = RunConfig::MInit::Random;
  else throw ConfigError("config key 'init.m': expected uniform|smooth|random");
  c.m_value = r.vec3("init.m_value", c.m_value);
  c.seed = static_cast<unsigned>(r.integer("init.seed", 1));
  const std::string h_init = r.str("init.h", "zero");
  if (h_init == "zero") c.h_init = RunConfig::HInit::Zero;
  else if (h_init == "minus_m_inside") c.h_init = RunConfig::HInit::MinusMInside;
  else throw ConfigError("config key 'init.h': expected zero|minus_m_inside");
  if (c.h_init == RunConfig::HInit::MinusMInside && c.m_init != RunConfig::MInit::Uniform)
    throw ConfigError("init.h = minus_m_inside requires init.m = uniform");

  c.out_dir = r.str("output.dir", c.out_dir);
  c.sample_every = r.integer("output.every", 1);
  c.write_vtk = r.boolean("output.vtk", false);

  r.reject_unknown();

  if (c.mesh_n < 1) throw ConfigError("config key 'mesh.n': must be >= 1");
  if (c.sample_every < 1) throw ConfigError("config key 'output.every': must be >= 1");
  try {
    if (c.ellg) c.ellg_config().validate();
    else c.scheme.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config validation: ") + e.what());
  }
  return c;
}

/// Initial magnetization on a mesh per the init.* keys; unit at every node.
inline NodalField initial_magnetization(const RunConfig& cfg, const TetMesh& mesh) {
  switch (cfg.m_init) {
    case RunConfig::MInit::Uniform:
      return NodalField(mesh.n_vertices(), normalized(cfg.m_value));
    case RunConfig::MInit::Smooth: {
      constexpr double pi = 3.14159265358979323846;
      return nodal_interpolate(
          [&](const Vec3& p) {
            return normalized(Vec3{1.0, 0.5 * std::sin(pi * p.x), 0.5 * std::cos(pi * p.y)});
          },
          mesh);
    }
    case RunConfig::MInit::Random: {
      std::mt19937 rng(cfg.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      NodalField m(mesh.n_vertices());
      for (auto& v : m) {
        do {
          v = {gauss(rng), gauss(rng), gauss(rng)};
        } while (norm(v) < 1e-8);
        v = normalized(v);
      }
      return m;
    }
  }
  return {};
}

/// Initial edge field on the conductor mesh per the init.h key.
inline EdgeField initial_h(const RunConfig& cfg, const TetMesh& omega_big,
                           const NodalField& m0_omega) {
  if (cfg.h_init == RunConfig::HInit::Zero) return EdgeField(omega_big.n_edges(), 0.0);
  // -m0 inside omega-bar, 0 outside, interpolated edgewise
  const Vec3 lo = cfg.inner_lo, hi = cfg.inner_hi;
  const Vec3 mval = m0_omega.empty() ? Vec3{0, 0, 0} : m0_omega.front();
  auto fn = [&](const Vec3& p) -> Vec3 {
    const double tol = 1e-12;
    const bool in = p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol &&
                    p.y <= hi.y + tol && p.z >= lo.z - tol && p.z <= hi.z + tol;
    return in ? -mval : Vec3{0, 0, 0};
  };
  return edge_interpolate(fn, omega_big);
}

}  // namespace tpsmag
