#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctkrylov/errors.hpp"
#include "ctkrylov/geometry.hpp"
#include "ctkrylov/phantom.hpp"
#include "ctkrylov/projector.hpp"
#include "ctkrylov/stopping.hpp"

namespace ctkrylov {

/// Back-projector selection: a discretization model, or the thresholded
/// transpose B_tau of the forward matrix.
struct BackModel {
  bool thresholded = false;
  double tau = 0.0;
  ProjModel model = ProjModel::Line;
};

enum class SolverKind { AB, BA, LSQR, LSMR, Landweber };

inline SolverKind solver_from_name(const std::string& name) {
  if (name == "ab") return SolverKind::AB;
  if (name == "ba") return SolverKind::BA;
  if (name == "lsqr") return SolverKind::LSQR;
  if (name == "lsmr") return SolverKind::LSMR;
  if (name == "landweber") return SolverKind::Landweber;
  throw ConfigError("solver: unknown value '" + name +
                    "' (expected ab|ba|lsqr|lsmr|landweber)");
}

/// Flat key=value experiment description ('#' starts a comment). Unknown and
/// duplicate keys are rejected.
class ExperimentConfig {
 public:
  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "geometry",     "n_pixels",      "angles",       "n_det",
        "det_width",    "det_offset",    "model_a",      "model_b",
        "models",       "phantom_kind",  "phantom_seed", "noise_level",
        "noise_seed",   "solver",        "omega",        "max_iter",
        "rule",         "dp_tau",        "noise_norm",   "ncp_patience",
        "output_dir",   "keep_iterates", "reorthogonalize",
        "coeff_iters",  "bound_instances", "bound_seed",
    };
    return keys;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                          ": expected key=value, got '" + trimmed + "'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (!known_keys().count(key))
        throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                          ": unknown key '" + key + "'");
      if (cfg.kv_.count(key))
        throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end())
      throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_real(const std::string& key) const {
    return parse_real(key, get_string(key));
  }
  double get_real(const std::string& key, double dflt) const {
    return has(key) ? get_real(key) : dflt;
  }

  std::uint64_t get_count(const std::string& key) const {
    const std::string v = get_string(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t n = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "': not a count: '" + v + "'");
    }
  }
  std::uint64_t get_count(const std::string& key, std::uint64_t dflt) const {
    return has(key) ? get_count(key) : dflt;
  }

  /// Geometry from either the size-class shorthand or explicit keys.
  ScanGeometry geometry() const {
    ScanGeometry g;
    if (has("geometry")) {
      g = standard_geometry(size_class_from_name(get_string("geometry")));
      // Explicit keys override the shorthand.
      if (has("n_pixels")) g.n_pixels = get_count("n_pixels");
      if (has("n_det")) g.n_det = get_count("n_det");
      if (has("angles")) g.angles_deg = parse_angles(get_string("angles"));
    } else {
      g.n_pixels = get_count("n_pixels");
      g.n_det = get_count("n_det");
      g.angles_deg = parse_angles(get_string("angles"));
    }
    g.det_width = get_real("det_width", 1.0);
    g.det_offset = get_real("det_offset", 0.0);
    g.check();
    return g;
  }

  ProjModel model_a() const { return model_from_name(get_string("model_a")); }

  BackModel model_b() const {
    const std::string v = get_string("model_b");
    BackModel bm;
    if (v.rfind("threshold", 0) == 0) {
      bm.thresholded = true;
      const auto colon = v.find(':');
      bm.tau = colon == std::string::npos
                   ? 0.0
                   : parse_real("model_b", v.substr(colon + 1));
      if (bm.tau < 0.0) throw ConfigError("model_b: threshold tau must be >= 0");
    } else {
      bm.model = model_from_name(v);
    }
    return bm;
  }

  PhantomKind phantom_kind() const {
    return phantom_kind_from_name(get_string("phantom_kind", "threephases"));
  }
  std::uint64_t phantom_seed() const { return get_count("phantom_seed", 42); }
  double noise_level() const { return get_real("noise_level", 0.0); }
  std::uint64_t noise_seed() const { return get_count("noise_seed", 7); }
  SolverKind solver() const { return solver_from_name(get_string("solver")); }
  double omega() const { return get_real("omega", 0.0); }  // 0 = automatic
  std::size_t max_iter() const {
    const std::uint64_t n = get_count("max_iter");
    if (n == 0) throw ConfigError("max_iter: must be >= 1");
    return static_cast<std::size_t>(n);
  }
  std::size_t keep_stride() const {
    return static_cast<std::size_t>(get_count("keep_iterates", 1));
  }
  bool reorthogonalize() const { return get_count("reorthogonalize", 0) != 0; }
  std::string output_dir() const { return get_string("output_dir", "."); }

  StopRule rule() const {
    const std::string v = get_string("rule", "none");
    if (v == "none") return StopRule::None;
    if (v == "dp") return StopRule::DP;
    if (v == "ncp") return StopRule::NCP;
    throw ConfigError("rule: unknown value '" + v + "' (expected none|dp|ncp)");
  }
  double dp_tau() const { return get_real("dp_tau", 1.0); }
  std::optional<double> noise_norm_override() const {
    if (!has("noise_norm")) return std::nullopt;
    return get_real("noise_norm");
  }
  std::size_t ncp_patience() const {
    return static_cast<std::size_t>(get_count("ncp_patience", 3));
  }

  std::vector<ProjModel> models() const {
    std::vector<ProjModel> out;
    for (const std::string& tok :
         split(get_string("models", "line,strip,joseph"), ','))
      out.push_back(model_from_name(trim(tok)));
    if (out.empty()) throw ConfigError("models: empty list");
    return out;
  }

  std::vector<std::size_t> coeff_iters() const {
    std::vector<std::size_t> out;
    for (const std::string& tok : split(get_string("coeff_iters", "1,5,10,30"), ','))
      out.push_back(static_cast<std::size_t>(std::stoull(trim(tok))));
    return out;
  }

  std::size_t bound_instances() const {
    return static_cast<std::size_t>(get_count("bound_instances", 20));
  }
  std::uint64_t bound_seed() const { return get_count("bound_seed", 1); }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    return out;
  }

  /// "start:step:count" or an explicit comma-separated list of degrees.
  static std::vector<double> parse_angles(const std::string& v) {
    if (v.find(':') != std::string::npos) {
      const auto parts = split(v, ':');
      if (parts.size() != 3)
        throw ConfigError("angles: expected start:step:count, got '" + v + "'");
      const double start = parse_real("angles", parts[0]);
      const double step = parse_real("angles", parts[1]);
      const auto count = std::stoull(trim(parts[2]));
      if (count == 0) throw ConfigError("angles: count must be >= 1");
      return angle_range(start, step, count);
    }
    std::vector<double> out;
    for (const std::string& tok : split(v, ','))
      out.push_back(parse_real("angles", tok));
    return out;
  }

 private:
  static double parse_real(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const std::string t = trim(v);
      const double x = std::stod(t, &pos);
      if (pos != t.size()) throw std::invalid_argument(t);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "': not a number: '" + v + "'");
    }
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace ctkrylov
