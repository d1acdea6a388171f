#pragma once
// config.hpp - run configuration loaded from a small TOML subset:
// [section] headers, bare keys, strings, numbers, booleans, single-line
// arrays, and # comments. That covers every knob the tool exposes without
// pulling in a full TOML implementation.

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "propdiag/ioutil.hpp"
#include "propdiag/synthgen.hpp"

namespace propdiag {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TomlValue {
  enum class Kind { string, number, boolean, array } kind = Kind::string;
  std::string str;
  double num = 0.0;
  bool flag = false;
  std::vector<TomlValue> items;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline TomlValue parse_toml_value(const std::string& raw, int line_no) {
  std::string v = trim(raw);
  if (v.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty value");
  TomlValue out;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
    out.kind = TomlValue::Kind::string;
    std::string s;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        char c = v[++i];
        s += (c == 'n' ? '\n' : c == 't' ? '\t' : c);
      } else {
        s += v[i];
      }
    }
    out.str = s;
    return out;
  }
  if (v == "true" || v == "false") {
    out.kind = TomlValue::Kind::boolean;
    out.flag = v == "true";
    return out;
  }
  if (v.front() == '[') {
    if (v.back() != ']')
      throw ConfigError("config line " + std::to_string(line_no) + ": array must close on the same line");
    out.kind = TomlValue::Kind::array;
    std::string body = v.substr(1, v.size() - 2);
    std::string item;
    int depth = 0;
    bool in_str = false;
    for (char c : body) {
      if (c == '"' ) in_str = !in_str;
      if (!in_str && c == '[') ++depth;
      if (!in_str && c == ']') --depth;
      if (!in_str && depth == 0 && c == ',') {
        if (!trim(item).empty()) out.items.push_back(parse_toml_value(item, line_no));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) out.items.push_back(parse_toml_value(item, line_no));
    return out;
  }
  bool ok = false;
  double d = parse_double(v, ok);
  if (!ok)
    throw ConfigError("config line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
  out.kind = TomlValue::Kind::number;
  out.num = d;
  return out;
}

// Strips a trailing comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

// Keys are flattened to "section.key"; top-level keys keep their bare name.
inline std::map<std::string, TomlValue> parse_toml(const std::string& text) {
  std::map<std::string, TomlValue> out;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = detail::trim(detail::strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(body.substr(1, body.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    std::size_t eq = std::string::npos;
    {
      bool in_str = false;
      for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '"') in_str = !in_str;
        if (body[i] == '=' && !in_str) {
          eq = i;
          break;
        }
      }
    }
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(body.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    out[full] = detail::parse_toml_value(body.substr(eq + 1), line_no);
  }
  return out;
}

// ---------------------------------------------------------------------------
// RunConfig: every knob the CLI honors, with the shipped defaults.
// ---------------------------------------------------------------------------

struct RunConfig {
  // paths
  std::string corpus_dir = "corpus";
  std::string out_dir = "out";

  // features
  int band_width = 5;

  // training
  std::uint64_t seed = 0;
  double svm_c = 1.0;
  double svm_tol = 1e-4;
  int svm_max_epochs = 1000;
  int mlp_epochs = 200;
  double mlp_learning_rate = 0.1;
  std::vector<int> hidden = {32, 8, 4};
  int loc_class_cap = 4000;
  std::string split_mode = "rows";  // "rows" | "flights"

  // synth
  double window_scale = 1.0;
  bool synth_rotations = true;  // also write the three rotated copies
  SynthCoeffs synth;
  NoiseLevels noise;

  // studies
  std::vector<int> study_widths = {2, 3, 4, 5, 6, 7, 8, 10};
  int importance_repeats = 5;
  int importance_top = 15;
  double loo_cut1 = 20.0, loo_cut2 = 20.0;
  double loo_svm_tol = 1e-5;
  int loo_svm_max_epochs = 200;
  int loo_max_rows_per_class = 250;
};

namespace detail {

struct TomlReader {
  const std::map<std::string, TomlValue>& kv;
  mutable std::vector<std::string> unknown;

  const TomlValue* find(const std::string& key) const {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  }
  double number(const std::string& key, double fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::number) throw ConfigError("config: '" + key + "' must be a number");
    return v->num;
  }
  int integer(const std::string& key, int fallback) const {
    double d = number(key, fallback);
    int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) throw ConfigError("config: '" + key + "' must be an integer");
    return i;
  }
  bool boolean(const std::string& key, bool fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::boolean) throw ConfigError("config: '" + key + "' must be a boolean");
    return v->flag;
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::string) throw ConfigError("config: '" + key + "' must be a string");
    return v->str;
  }
  std::vector<int> int_array(const std::string& key, std::vector<int> fallback) const {
    const TomlValue* v = find(key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::array) throw ConfigError("config: '" + key + "' must be an array");
    std::vector<int> out;
    for (const TomlValue& item : v->items) {
      if (item.kind != TomlValue::Kind::number)
        throw ConfigError("config: '" + key + "' must hold numbers");
      out.push_back(static_cast<int>(item.num));
    }
    return out;
  }
};

}  // namespace detail

inline RunConfig run_config_from_toml(const std::map<std::string, TomlValue>& kv) {
  detail::TomlReader r{kv, {}};
  RunConfig c;
  c.corpus_dir = r.text("paths.corpus_dir", c.corpus_dir);
  c.out_dir = r.text("paths.out_dir", c.out_dir);

  c.band_width = r.integer("features.band_width", c.band_width);

  double seed = r.number("train.seed", static_cast<double>(c.seed));
  if (seed < 0) throw ConfigError("config: 'train.seed' must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.svm_c = r.number("train.svm_c", c.svm_c);
  c.svm_tol = r.number("train.svm_tol", c.svm_tol);
  c.svm_max_epochs = r.integer("train.svm_max_epochs", c.svm_max_epochs);
  c.mlp_epochs = r.integer("train.mlp_epochs", c.mlp_epochs);
  c.mlp_learning_rate = r.number("train.mlp_learning_rate", c.mlp_learning_rate);
  c.hidden = r.int_array("train.hidden", c.hidden);
  c.loc_class_cap = r.integer("train.loc_class_cap", c.loc_class_cap);
  c.split_mode = r.text("train.split_mode", c.split_mode);
  if (c.split_mode != "rows" && c.split_mode != "flights")
    throw ConfigError("config: 'train.split_mode' must be \"rows\" or \"flights\"");

  c.window_scale = r.number("synth.window_scale", c.window_scale);
  c.synth_rotations = r.boolean("synth.rotations", c.synth_rotations);
  c.synth.base_rotor_hz = r.number("synth.base_rotor_hz", c.synth.base_rotor_hz);
  c.synth.freq_shift_per_mm = r.number("synth.freq_shift_per_mm", c.synth.freq_shift_per_mm);
  c.synth.imbalance_amp_per_mm = r.number("synth.imbalance_amp_per_mm", c.synth.imbalance_amp_per_mm);
  c.synth.torque_bias_per_mm = r.number("synth.torque_bias_per_mm", c.synth.torque_bias_per_mm);
  c.synth.long_freq_drop_per_mm = r.number("synth.long_freq_drop_per_mm", c.synth.long_freq_drop_per_mm);
  c.synth.long_amp_per_mm = r.number("synth.long_amp_per_mm", c.synth.long_amp_per_mm);
  c.noise.acc = r.number("synth.noise_acc", c.noise.acc);
  c.noise.gyro = r.number("synth.noise_gyro", c.noise.gyro);
  c.noise.torque = r.number("synth.noise_torque", c.noise.torque);
  c.noise.thrust = r.number("synth.noise_thrust", c.noise.thrust);

  c.study_widths = r.int_array("studies.widths", c.study_widths);
  c.importance_repeats = r.integer("studies.importance_repeats", c.importance_repeats);
  c.importance_top = r.integer("studies.importance_top", c.importance_top);
  c.loo_cut1 = r.number("studies.loo_cut1", c.loo_cut1);
  c.loo_cut2 = r.number("studies.loo_cut2", c.loo_cut2);
  c.loo_svm_tol = r.number("studies.loo_svm_tol", c.loo_svm_tol);
  c.loo_svm_max_epochs = r.integer("studies.loo_svm_max_epochs", c.loo_svm_max_epochs);
  c.loo_max_rows_per_class = r.integer("studies.loo_max_rows_per_class", c.loo_max_rows_per_class);

  if (c.band_width <= 0) throw ConfigError("config: 'features.band_width' must be positive");
  if (c.window_scale <= 0) throw ConfigError("config: 'synth.window_scale' must be positive");
  if (c.mlp_epochs < 0 || c.svm_max_epochs <= 0)
    throw ConfigError("config: epoch counts out of range");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_toml(parse_toml(read_file(path)));
}

}  // namespace propdiag
