#pragma once

// Run configuration read from a TOML-style file.
//
// Supported syntax: `[section]` headers, `key = value` lines, `#` comments.
// Values are numbers, booleans, double-quoted strings, or flat arrays of
// numbers / strings. Keys are addressed as "section.key". Unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fqr/error.hpp"
#include "fqr/gibbs.hpp"
#include "fqr/inference.hpp"
#include "fqr/simgen.hpp"

namespace fqr {

struct ConfigValue {
  std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>> value;
  std::string text;  ///< canonical rendering, used for the manifest
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Removes a trailing comment that is not inside a string.
inline std::string_view drop_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

inline bool parse_number(std::string_view s, double& out) {
  std::string cleaned;
  for (char c : s) {
    if (c != '_') cleaned.push_back(c);
  }
  if (!cleaned.empty() && cleaned.front() == '+') cleaned.erase(0, 1);
  const auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), out);
  return ec == std::errc() && ptr == cleaned.data() + cleaned.size() && !cleaned.empty();
}

inline std::string unquote(std::string_view s, const std::string& where) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') throw ConfigError(where + ": expected a quoted string");
  return std::string(s.substr(1, s.size() - 2));
}

inline ConfigValue parse_value(std::string_view raw, const std::string& where) {
  const auto s = strip(raw);
  if (s.empty()) throw ConfigError(where + ": missing value");
  ConfigValue v;
  if (s == "true" || s == "false") {
    v.value = (s == "true");
  } else if (s.front() == '"') {
    v.value = unquote(s, where);
  } else if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError(where + ": unterminated array");
    const auto body = strip(s.substr(1, s.size() - 2));
    std::vector<double> nums;
    std::vector<std::string> strs;
    std::string_view rest = body;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = strip(rest.substr(0, comma));
      if (!item.empty()) {
        double d = 0.0;
        if (item.front() == '"') {
          strs.push_back(unquote(item, where));
        } else if (parse_number(item, d)) {
          nums.push_back(d);
        } else {
          throw ConfigError(where + ": bad array element '" + std::string(item) + "'");
        }
      }
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!nums.empty() && !strs.empty()) throw ConfigError(where + ": mixed array types");
    if (strs.empty()) {
      v.value = nums;
    } else {
      v.value = strs;
    }
  } else {
    double d = 0.0;
    if (!parse_number(s, d)) throw ConfigError(where + ": cannot parse value '" + std::string(s) + "'");
    v.value = d;
  }
  v.text = std::string(s);
  return v;
}

}  // namespace detail

/// Flat key/value view of a config file plus command-line overrides.
class ConfigTable {
 public:
  static ConfigTable from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
  }

  static ConfigTable from_string(const std::string& text, const std::string& origin = "<config>") {
    ConfigTable t;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = detail::strip(detail::drop_comment(line));
      if (body.empty()) continue;
      const std::string where = origin + ":" + std::to_string(line_no);
      if (body.front() == '[') {
        if (body.back() != ']') throw ConfigError(where + ": malformed section header");
        section = std::string(detail::strip(body.substr(1, body.size() - 2)));
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
      const auto key = std::string(detail::strip(body.substr(0, eq)));
      if (key.empty()) throw ConfigError(where + ": empty key");
      const auto full = section.empty() ? key : section + "." + key;
      if (t.values_.count(full)) throw ConfigError(where + ": duplicate key " + full);
      t.values_[full] = detail::parse_value(body.substr(eq + 1), where);
    }
    return t;
  }

  /// Applies a "section.key=value" override.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const auto key = std::string(detail::strip(std::string_view(assignment).substr(0, eq)));
    auto raw = std::string(detail::strip(std::string_view(assignment).substr(eq + 1)));
    double d = 0.0;
    const bool bare_word = !raw.empty() && raw.front() != '"' && raw.front() != '[' && raw != "true" &&
                           raw != "false" && !detail::parse_number(raw, d);
    if (bare_word) raw = "\"" + raw + "\"";
    values_[key] = detail::parse_value(raw, "--set " + key);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  double number(const std::string& key, double fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* d = std::get_if<double>(&v->value)) return *d;
    throw ConfigError(key + " must be a number");
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const double d = number(key, static_cast<double>(fallback));
    if (!(d >= 0.0) || d != std::floor(d) || d > 9.0e15) throw ConfigError(key + " must be a non-negative integer");
    return static_cast<std::size_t>(d);
  }

  bool boolean(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* b = std::get_if<bool>(&v->value)) return *b;
    throw ConfigError(key + " must be true or false");
  }

  std::string string(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* s = std::get_if<std::string>(&v->value)) return *s;
    throw ConfigError(key + " must be a quoted string");
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* d = std::get_if<double>(&v->value)) return {*d};
    if (const auto* a = std::get_if<std::vector<double>>(&v->value)) return *a;
    if (const auto* s = std::get_if<std::vector<std::string>>(&v->value); s && s->empty()) return {};
    throw ConfigError(key + " must be a number or an array of numbers");
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* s = std::get_if<std::string>(&v->value)) return {*s};
    if (const auto* a = std::get_if<std::vector<std::string>>(&v->value)) return *a;
    if (const auto* d = std::get_if<std::vector<double>>(&v->value); d && d->empty()) return {};
    throw ConfigError(key + " must be a string or an array of strings");
  }

 private:
  const ConfigValue* find(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  std::map<std::string, ConfigValue> values_;
};

struct SimulateConfig {
  SettingKind setting = SettingKind::kSymmetricHeavyTailed;
  std::size_t replicates = 2;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"fqr", "bayes_qr"};
  std::vector<double> alphas{0.001, 0.01, 0.05, 0.10};
  double delta = 0.3;
  std::size_t truth_draws = 1000000;
  std::uint64_t truth_seed = 20240517;
  double qr_psi = 1000.0;
  bool write_datasets = true;
};

struct RunConfig {
  std::string curves_path;
  std::string design_path;
  std::string output_dir = "fqreg_out";
  std::vector<double> taus{0.5};
  ModelSpec model{};
  /// 0 picks log2(padded length) - 2, capped at 8: J = 7 for 512 points and
  /// J = 8 for 2048.
  int wavelet_levels = 0;
  InferenceSettings inference{};
  SimulateConfig simulate{};
  bool draws_csv = false;
  std::string canonical;  ///< sorted key = value lines that feed the manifest hash
};

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{
      "data.curves",        "data.design",          "output.dir",          "output.draws_csv",
      "model.taus",         "model.basis",          "model.wavelet_order", "model.levels",
      "model.prior",        "model.global_scale",   "model.scale",         "model.sigma_a0",
      "model.sigma_b0",     "mcmc.n_iter",          "mcmc.burn_in",        "mcmc.thin",
      "mcmc.n_chains",      "mcmc.seed",            "inference.alpha",     "inference.delta",
      "inference.threshold", "inference.min_run",   "inference.plot_alphas", "simulate.setting",
      "simulate.replicates", "simulate.seed",       "simulate.methods",    "simulate.alphas",
      "simulate.delta",     "simulate.truth_draws", "simulate.truth_seed", "simulate.qr_psi",
      "simulate.write_datasets"};
  return keys;
}

inline int auto_wavelet_levels(std::size_t grid_len) {
  const int bits = static_cast<int>(std::bit_width(next_dyadic(grid_len))) - 1;
  return std::clamp(bits - 2, 1, 8);
}

inline PriorFamily parse_prior_family(const std::string& s) {
  if (s == "horseshoe") return PriorFamily::kHorseshoe;
  if (s == "lasso") return PriorFamily::kLasso;
  if (s == "ridge") return PriorFamily::kRidge;
  throw ConfigError("model.prior must be horseshoe, lasso or ridge, got '" + s + "'");
}

inline GlobalScaleMode parse_global_scale(const std::string& s) {
  if (s == "vague") return GlobalScaleMode::kVagueHyperprior;
  if (s == "fixed") return GlobalScaleMode::kFixedScale;
  if (s == "fixed_psi") return GlobalScaleMode::kFixedPsi;
  throw ConfigError("model.global_scale must be vague, fixed or fixed_psi, got '" + s + "'");
}

/// Builds a RunConfig. `require_data` enforces that data paths are set and
/// exist (fit); other commands only check paths that are given.
inline RunConfig load_run_config(const ConfigTable& table, bool require_data) {
  for (const auto& [key, value] : table.values()) {
    const auto& known = known_config_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key " + key);
  }
  RunConfig c;
  c.curves_path = table.string("data.curves", "");
  c.design_path = table.string("data.design", "");
  if (require_data && (c.curves_path.empty() || c.design_path.empty())) {
    throw ConfigError("data.curves and data.design are required");
  }
  for (const auto* p : {&c.curves_path, &c.design_path}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("path does not exist: " + *p);
  }
  c.output_dir = table.string("output.dir", c.output_dir);
  c.draws_csv = table.boolean("output.draws_csv", false);

  c.taus = table.numbers("model.taus", c.taus);
  if (c.taus.empty()) throw ConfigError("model.taus is empty");
  for (double t : c.taus) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("model.taus values must lie in (0, 1)");
  }
  auto& m = c.model;
  const auto basis = table.string("model.basis", "wavelet");
  if (basis == "wavelet") {
    m.basis = BasisKind::kWavelet;
  } else if (basis == "identity") {
    m.basis = BasisKind::kIdentity;
  } else {
    throw ConfigError("model.basis must be wavelet or identity, got '" + basis + "'");
  }
  m.wavelet.order = static_cast<int>(table.count("model.wavelet_order", 4));
  if (m.wavelet.order < 1 || m.wavelet.order > kMaxDaubechiesOrder) {
    throw ConfigError("model.wavelet_order must be in 1.." + std::to_string(kMaxDaubechiesOrder));
  }
  c.wavelet_levels = static_cast<int>(table.count("model.levels", 0));
  m.prior.family = parse_prior_family(table.string("model.prior", "horseshoe"));
  m.prior.global = parse_global_scale(table.string("model.global_scale", "vague"));
  m.prior.scale = table.number("model.scale", 1.0);
  m.sigma_a0 = table.number("model.sigma_a0", 0.01);
  m.sigma_b0 = table.number("model.sigma_b0", 0.01);
  m.mcmc.n_iter = table.count("mcmc.n_iter", 8000);
  m.mcmc.burn_in = table.count("mcmc.burn_in", 2000);
  m.mcmc.thin = table.count("mcmc.thin", 3);
  m.mcmc.n_chains = table.count("mcmc.n_chains", 1);
  m.mcmc.master_seed = table.count("mcmc.seed", 1);
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (m.mcmc.retained_per_chain() < 2) throw ConfigError("mcmc settings retain fewer than 2 draws per chain");

  auto& inf = c.inference;
  inf.alpha = table.number("inference.alpha", 0.05);
  if (!(inf.alpha > 0.0 && inf.alpha < 1.0)) throw ConfigError("inference.alpha must lie in (0, 1)");
  const double delta = table.number("inference.delta", 1.5);
  if (!(delta > 1.0)) throw ConfigError("inference.delta must be a fold change > 1");
  inf.threshold = table.number("inference.threshold", pm1_effect_threshold(delta));
  inf.min_run = table.count("inference.min_run", 3);
  inf.plot_alphas = table.numbers("inference.plot_alphas", inf.plot_alphas);
  for (double a : inf.plot_alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("inference.plot_alphas values must lie in (0, 1)");
  }

  auto& sim = c.simulate;
  sim.setting = parse_setting(table.string("simulate.setting", "symmetric_heavy_tailed"));
  sim.replicates = table.count("simulate.replicates", sim.replicates);
  sim.seed = table.count("simulate.seed", sim.seed);
  sim.methods = table.strings("simulate.methods", sim.methods);
  for (const auto& name : sim.methods) {
    if (name != "fqr" && name != "bayes_qr") throw ConfigError("simulate.methods accepts fqr and bayes_qr, got " + name);
  }
  sim.alphas = table.numbers("simulate.alphas", sim.alphas);
  sim.delta = table.number("simulate.delta", sim.delta);
  sim.truth_draws = table.count("simulate.truth_draws", sim.truth_draws);
  if (sim.truth_draws < 1000) throw ConfigError("simulate.truth_draws must be at least 1000");
  sim.truth_seed = table.count("simulate.truth_seed", sim.truth_seed);
  sim.qr_psi = table.number("simulate.qr_psi", sim.qr_psi);
  sim.write_datasets = table.boolean("simulate.write_datasets", sim.write_datasets);

  std::ostringstream canon;
  for (const auto& [key, value] : table.values()) {
    if (key == "output.dir") continue;
    canon << key << " = " << value.text << '\n';
  }
  c.canonical = canon.str();
  return c;
}

}  // namespace fqr
