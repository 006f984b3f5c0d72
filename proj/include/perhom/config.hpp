// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "perhom/regime.hpp"
#include "perhom/spec_model.hpp"

namespace perhom {

using json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

// Run-level settings stored next to the JumpSpec in a config file.
struct RunSettings {
  std::string regime;  // empty: inferred from the spec
  std::uint64_t seed = 1;
  int paths = 5000;
  double horizon = 1.0;
  double dt = 0.0;     // 0: automatic
  double delta = 0.25;
  double rmax = 0.0;   // 0: automatic from the truncation budget
  std::vector<double> eps_ladder{0.125, 0.03125, 0.0078125};
  int workers = 1;
  int grid = 0;        // corrector grid, 0: automatic
  std::string corrector_method = "grid";
  int ergodic_paths = 200;
  double ergodic_horizon = 200.0;
  double burn_in = -1.0;  // negative: 20% of the horizon
  int histogram_grid = 0;
  double delta_limit = 0.02;
};

struct Config {
  JumpSpec spec;
  RunSettings run;
};

namespace cfg {

// Reader that carries the JSON key path for diagnostics.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key) && !(*j_)[key].is_null(); }
  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(key)) throw ConfigError(path_ + "/" + key, "missing required key");
    return Node((*j_)[key], path_ + "/" + key);
  }
  Node at(std::size_t i) const {
    if (!j_->is_array() || i >= j_->size()) fail("index out of range");
    return Node((*j_)[i], path_ + "/" + std::to_string(i));
  }
  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }
  double num() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  long long integer() const {
    if (!j_->is_number_integer() && !j_->is_number_unsigned()) fail("expected an integer");
    return j_->get<long long>();
  }
  std::uint64_t uinteger() const {
    if (!j_->is_number_unsigned() && !(j_->is_number_integer() && j_->get<long long>() >= 0))
      fail("expected a non-negative integer");
    return j_->get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected a boolean");
    return j_->get<bool>();
  }
  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  double num_or(const std::string& key, double def) const { return has(key) ? at(key).num() : def; }
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_, what); }

 private:
  const json* j_;
  std::string path_;
};

inline Vec read_vec(const Node& n, int d) {
  if (n.size() != static_cast<std::size_t>(d)) n.fail("expected " + std::to_string(d) + " components");
  Vec v;
  for (int i = 0; i < d; ++i) v[i] = n.at(i).num();
  return v;
}
inline Freq read_freq(const Node& n, int d) {
  if (n.size() != static_cast<std::size_t>(d)) n.fail("expected " + std::to_string(d) + " components");
  Freq f{};
  for (int i = 0; i < d; ++i) f[i] = static_cast<int>(n.at(i).integer());
  return f;
}
inline json write_vec(const Vec& v, int d) {
  json a = json::array();
  for (int i = 0; i < d; ++i) a.push_back(v[i]);
  return a;
}
inline json write_freq(const Freq& f, int d) {
  json a = json::array();
  for (int i = 0; i < d; ++i) a.push_back(f[i]);
  return a;
}

inline TrigPoly read_trig(const Node& n, int d) {
  std::vector<TrigTerm> terms;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const Node t = n.at(i);
    TrigTerm u;
    if (t.has("p")) u.p = read_freq(t.at("p"), d);
    if (t.has("q")) u.q = read_freq(t.at("q"), d);
    u.a = t.num_or("cos", 0.0);
    u.b = t.num_or("sin", 0.0);
    terms.push_back(u);
  }
  return TrigPoly(d, terms);
}
inline json write_trig(const TrigPoly& p, int d) {
  json a = json::array();
  for (const auto& t : p.terms()) {
    json j;
    j["p"] = write_freq(t.p, d);
    j["q"] = write_freq(t.q, d);
    j["cos"] = t.a;
    j["sin"] = t.b;
    a.push_back(j);
  }
  return a;
}

inline SphericalMeasure read_measure(const Node& n, int d) {
  const std::string type = n.at("type").str();
  if (type == "uniform") {
    const double m = n.at("mass").num();
    if (!(m > 0.0) || !std::isfinite(m)) n.at("mass").fail("mass must be finite and positive");
    return SphericalMeasure::uniform(m);
  }
  if (type == "atoms") {
    const Node list = n.at("atoms");
    std::vector<AngularNode> atoms;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Node a = list.at(i);
      const Vec th = read_vec(a.at("theta"), d);
      if (std::abs(norm(th) - 1.0) > 1e-12) a.at("theta").fail("atom direction must have unit norm");
      const double w = a.at("weight").num();
      if (!(w > 0.0) || !std::isfinite(w)) a.at("weight").fail("atom weight must be finite and positive");
      atoms.push_back({th, w});
    }
    if (atoms.empty()) list.fail("at least one atom required");
    return SphericalMeasure::atoms(atoms);
  }
  if (type == "density") {
    SphereDensity dn{read_trig(n.at("terms"), d), static_cast<int>(n.has("resolution") ? n.at("resolution").integer() : 64)};
    return SphericalMeasure(dn);
  }
  n.at("type").fail("unknown spherical measure type '" + type + "'");
}
inline json write_measure(const SphericalMeasure& m, int d) {
  json j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, UniformSurface>) {
          j["type"] = "uniform";
          j["mass"] = v.total_mass;
        } else if constexpr (std::is_same_v<T, SphereAtoms>) {
          j["type"] = "atoms";
          j["atoms"] = json::array();
          for (const auto& a : v.atoms) j["atoms"].push_back({{"theta", write_vec(a.theta, d)}, {"weight", a.weight}});
        } else {
          j["type"] = "density";
          j["resolution"] = v.resolution;
          j["terms"] = write_trig(v.density, d);
        }
      },
      m.variant());
  return j;
}

inline ScalingFunction read_phi(const Node& n) {
  const std::string type = n.at("type").str();
  auto positive = [](const Node& x) {
    const double v = x.num();
    if (!(v > 0.0)) x.fail("must be positive");
    return v;
  };
  if (type == "power") return PowerPhi{positive(n.at("alpha"))};
  if (type == "power_log") return PowerLogPhi{positive(n.at("alpha"))};
  if (type == "mixed") {
    MixedPhi m;
    const Node nu = n.at("nu");
    for (std::size_t i = 0; i < nu.size(); ++i)
      m.nu.emplace_back(positive(nu.at(i).at("beta")), nu.at(i).at("weight").num());
    if (m.nu.empty()) nu.fail("mixed scaling needs at least one atom");
    return m;
  }
  n.at("type").fail("unknown scaling function type '" + type + "'");
}
inline json write_phi(const ScalingFunction& f) {
  json j;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PowerPhi>) {
          j["type"] = "power";
          j["alpha"] = v.alpha;
        } else if constexpr (std::is_same_v<T, PowerLogPhi>) {
          j["type"] = "power_log";
          j["alpha"] = v.alpha;
        } else {
          j["type"] = "mixed";
          j["nu"] = json::array();
          for (const auto& [b, w] : v.nu) j["nu"].push_back({{"beta", b}, {"weight", w}});
        }
      },
      f.variant());
  return j;
}

inline JumpSpec read_spec(const Node& root) {
  JumpSpec s;
  const long long d = root.at("dimension").integer();
  if (d < 1 || d > 3) root.at("dimension").fail("dimension must be 1, 2 or 3");
  s.dim = static_cast<int>(d);

  const Node sj = root.at("small_jumps");
  const std::string st = sj.at("type").str();
  if (st == "zero") {
    s.small = SmallZero{};
  } else if (st == "stable") {
    const double a0 = sj.at("alpha0").num();
    if (!(a0 > 0.0 && a0 < 2.0)) sj.at("alpha0").fail("alpha0 must lie in (0,2)");
    s.small = SmallStable{a0};
  } else if (st == "atoms") {
    SmallAtoms at;
    const Node list = sj.at("atoms");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Vec z = read_vec(list.at(i).at("z"), s.dim);
      if (norm(z) > 1.0 + 1e-12) list.at(i).at("z").fail("small-jump atoms must satisfy |z| <= 1");
      const double w = list.at(i).at("weight").num();
      if (!(w >= 0.0)) list.at(i).at("weight").fail("weight must be non-negative");
      at.atoms.push_back({z, w});
    }
    s.small = at;
  } else {
    sj.at("type").fail("unknown small-jump type '" + st + "'");
  }

  if (root.has("large_jumps")) {
    const Node lj = root.at("large_jumps");
    LargeJumps L{read_measure(lj.at("rho0"), s.dim), read_phi(lj.at("phi")), std::nullopt};
    if (lj.has("kappa")) {
      const Node k = lj.at("kappa");
      const Node pr = k.at("profile");
      const std::string pt = pr.at("type").str();
      Kappa kap;
      if (pt == "power_decay") {
        kap.g = PowerDecay{pr.at("c").num(), pr.at("gamma").num()};
        if (!(std::get<PowerDecay>(kap.g).gamma > 0.0)) pr.at("gamma").fail("gamma must be positive");
      } else if (pt == "ratio_power") {
        kap.g = RatioPower{pr.at("c").num(), pr.at("alpha").num(), pr.at("beta").num()};
        const auto& rp = std::get<RatioPower>(kap.g);
        if (!(rp.beta < rp.alpha)) pr.at("beta").fail("beta must be smaller than alpha");
      } else {
        pr.at("type").fail("unknown kappa profile '" + pt + "'");
      }
      const Node base = k.at("base");
      if (base.raw().is_string()) {
        if (base.str() != "rho0") base.fail("base must be \"rho0\" or a spherical measure");
      } else {
        kap.base = read_measure(base, s.dim);
      }
      L.kappa = kap;
    }
    s.large = L;
  }

  const Node kn = root.at("kernel");
  s.kernel.f = read_trig(kn.at("terms"), s.dim);
  s.kernel.kmin = kn.at("kmin").num();
  s.kernel.kmax = kn.at("kmax").num();
  if (!(s.kernel.kmin >= 0.0)) kn.at("kmin").fail("kmin must be non-negative");
  if (!(s.kernel.kmax >= s.kernel.kmin) || !std::isfinite(s.kernel.kmax)) kn.at("kmax").fail("kmax must be finite and >= kmin");
  s.kernel.periodic_in_z = kn.has("periodic_in_z") ? kn.at("periodic_in_z").boolean() : true;

  std::vector<TrigPoly> drift(s.dim, TrigPoly(s.dim));
  if (root.has("drift")) {
    const Node dn = root.at("drift");
    if (dn.size() != static_cast<std::size_t>(s.dim)) dn.fail("drift needs one term list per coordinate");
    for (int i = 0; i < s.dim; ++i) {
      drift[i] = read_trig(dn.at(i), s.dim);
      for (const auto& t : drift[i].terms())
        if (!is_zero(t.q)) dn.at(i).fail("drift terms must not depend on z");
    }
  }
  s.drift.f = drift;
  return s;
}

inline json write_spec(const JumpSpec& s) {
  json j;
  j["dimension"] = s.dim;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SmallZero>) {
          j["small_jumps"] = {{"type", "zero"}};
        } else if constexpr (std::is_same_v<T, SmallStable>) {
          j["small_jumps"] = {{"type", "stable"}, {"alpha0", v.alpha0}};
        } else {
          json a = json::array();
          for (const auto& at : v.atoms) a.push_back({{"z", write_vec(at.theta, s.dim)}, {"weight", at.weight}});
          j["small_jumps"] = {{"type", "atoms"}, {"atoms", a}};
        }
      },
      s.small);
  if (s.large) {
    json L;
    L["rho0"] = write_measure(s.large->rho0, s.dim);
    L["phi"] = write_phi(s.large->phi);
    if (s.large->kappa) {
      json k;
      std::visit(
          [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, PowerDecay>)
              k["profile"] = {{"type", "power_decay"}, {"c", g.c}, {"gamma", g.gamma}};
            else
              k["profile"] = {{"type", "ratio_power"}, {"c", g.c}, {"alpha", g.alpha}, {"beta", g.beta}};
          },
          s.large->kappa->g);
      k["base"] = s.large->kappa->base ? write_measure(*s.large->kappa->base, s.dim) : json("rho0");
      L["kappa"] = k;
    }
    j["large_jumps"] = L;
  } else {
    j["large_jumps"] = nullptr;
  }
  const TrigPoly* kt = s.kernel.trig();
  if (!kt) throw ConfigError("/kernel", "callback kernels cannot be serialized");
  j["kernel"] = {{"kmin", s.kernel.kmin}, {"kmax", s.kernel.kmax}, {"periodic_in_z", s.kernel.periodic_in_z},
                 {"terms", write_trig(*kt, s.dim)}};
  const auto* dt = s.drift.trig();
  if (!dt) throw ConfigError("/drift", "callback drifts cannot be serialized");
  json dr = json::array();
  for (int i = 0; i < s.dim; ++i) dr.push_back(i < static_cast<int>(dt->size()) ? write_trig((*dt)[i], s.dim) : json::array());
  j["drift"] = dr;
  return j;
}

inline RunSettings read_run(const Node& n) {
  RunSettings r;
  if (n.has("regime")) r.regime = n.at("regime").str();
  if (!r.regime.empty()) {
    try {
      (void)regime_from_string(r.regime);
    } catch (const ConfigError&) {
      n.at("regime").fail("unknown regime '" + r.regime + "'");
    }
  }
  if (n.has("seed")) r.seed = n.at("seed").uinteger();
  if (n.has("paths")) r.paths = static_cast<int>(n.at("paths").integer());
  r.horizon = n.num_or("horizon", r.horizon);
  r.dt = n.num_or("dt", r.dt);
  r.delta = n.num_or("delta", r.delta);
  r.rmax = n.num_or("rmax", r.rmax);
  if (n.has("eps_ladder")) {
    r.eps_ladder.clear();
    const Node l = n.at("eps_ladder");
    for (std::size_t i = 0; i < l.size(); ++i) {
      const double e = l.at(i).num();
      if (!(e > 0.0 && e < 1.0)) l.at(i).fail("ε must lie in (0,1)");
      r.eps_ladder.push_back(e);
    }
  }
  if (n.has("workers")) r.workers = static_cast<int>(n.at("workers").integer());
  if (n.has("grid")) r.grid = static_cast<int>(n.at("grid").integer());
  if (n.has("corrector_method")) r.corrector_method = n.at("corrector_method").str();
  if (n.has("ergodic_paths")) r.ergodic_paths = static_cast<int>(n.at("ergodic_paths").integer());
  r.ergodic_horizon = n.num_or("ergodic_horizon", r.ergodic_horizon);
  r.burn_in = n.num_or("burn_in", r.burn_in);
  if (n.has("histogram_grid")) r.histogram_grid = static_cast<int>(n.at("histogram_grid").integer());
  r.delta_limit = n.num_or("delta_limit", r.delta_limit);
  if (r.paths <= 0) n.at("paths").fail("paths must be positive");
  if (!(r.delta > 0.0 && r.delta <= 1.0)) n.at("delta").fail("delta must lie in (0,1]");
  if (r.dt < 0.0) n.at("dt").fail("dt must be non-negative");
  return r;
}

inline json write_run(const RunSettings& r) {
  json j;
  j["regime"] = r.regime;
  j["seed"] = r.seed;
  j["paths"] = r.paths;
  j["horizon"] = r.horizon;
  j["dt"] = r.dt;
  j["delta"] = r.delta;
  j["rmax"] = r.rmax;
  j["eps_ladder"] = r.eps_ladder;
  j["workers"] = r.workers;
  j["grid"] = r.grid;
  j["corrector_method"] = r.corrector_method;
  j["ergodic_paths"] = r.ergodic_paths;
  j["ergodic_horizon"] = r.ergodic_horizon;
  j["burn_in"] = r.burn_in;
  j["histogram_grid"] = r.histogram_grid;
  j["delta_limit"] = r.delta_limit;
  return j;
}

}  // namespace cfg

inline json config_to_json(const Config& c) {
  json j;
  j["format"] = "perhom-config";
  j["version"] = kConfigVersion;
  json s = cfg::write_spec(c.spec);
  for (auto& [k, v] : s.items()) j[k] = v;
  j["run"] = cfg::write_run(c.run);
  return j;
}

inline Config config_from_json(const json& j) {
  cfg::Node root(j, "");
  if (!j.is_object()) root.fail("config must be a JSON object");
  if (root.has("format") && root.at("format").str() != "perhom-config") root.at("format").fail("not a perhom config");
  if (root.has("version") && root.at("version").integer() != kConfigVersion)
    root.at("version").fail("unsupported config version");
  Config c;
  c.spec = cfg::read_spec(root);
  if (root.has("run")) c.run = cfg::read_run(root.at("run"));
  return c;
}

// Parses JSON text; syntax errors are reported with line and column.
inline Config config_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col), e.what());
  }
  return config_from_json(j);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_string(ss.str());
}

inline std::string dump_config(const Config& c) { return config_to_json(c).dump(2); }

// FNV-1a over the canonical dump; identifies a config in run manifests.
inline std::string config_hash(const Config& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace perhom
