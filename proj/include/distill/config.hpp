#pragma once

// Flat `key = value` configuration files.
//
//   # comment
//   protocol.theta_rad = pi/6
//   sweep.theta_list_rad = pi/10, pi/8, pi/6
//
// Keys carry their unit in the name. Unknown or repeated keys are errors.
// emit_config writes every key, and load_config of that text reproduces the
// spec exactly.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "distill/errors.hpp"
#include "distill/montecarlo.hpp"

namespace distill {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string key, std::string invariant, const std::string& message)
      : std::runtime_error(compose(source, line, key, message)),
        source_(std::move(source)), line_(line), key_(std::move(key)), invariant_(std::move(invariant)),
        message_(message) {}

  const std::string& source() const noexcept { return source_; }
  int line() const noexcept { return line_; }  // 0 when not tied to a line
  const std::string& key() const noexcept { return key_; }
  const std::string& invariant() const noexcept { return invariant_; }
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string compose(const std::string& source, int line, const std::string& key, const std::string& message) {
    std::string s = source;
    if (line > 0) s += ":" + std::to_string(line);
    if (!key.empty()) s += ": " + key;
    return s + ": " + message;
  }

  std::string source_;
  int line_;
  std::string key_;
  std::string invariant_;
  std::string message_;
};

namespace config_detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline double parse_number(std::string_view s) {
  s = trim(s);
  if (s == "pi") return std::numbers::pi;
  double v = 0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end || s.empty()) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

// A number, or a product/quotient of numbers and `pi` such as 2*pi/5.
inline double parse_real(std::string_view s) {
  s = trim(s);
  if (s.empty()) throw std::invalid_argument("empty value");
  double value = 1.0;
  char op = '*';
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    // Operators only; skip a sign or exponent sign inside a number.
    const bool at_end = i == s.size();
    if (!at_end && !((s[i] == '*' || s[i] == '/') && i > 0)) continue;
    const double term = parse_number(s.substr(start, i - start));
    value = op == '*' ? value * term : value / term;
    if (!at_end) op = s[i];
    start = i + 1;
  }
  if (!std::isfinite(value)) throw std::invalid_argument("value is not finite");
  return value;
}

template <class Int>
Int parse_integer(std::string_view s) {
  s = trim(s);
  Int v{};
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end || s.empty()) throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  return v;
}

inline bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false");
}

// Shortest decimal that parses back to exactly `x`.
inline std::string shortest(double x) {
  char buf[40];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, x == 0.0 ? 0.0 : x);
    double back = 0;
    std::from_chars(buf, buf + std::strlen(buf), back);
    if (back == x) break;
  }
  return buf;
}

// Writes x / scale so that parsing it back and multiplying by `scale`
// recovers x bit for bit whenever some double allows that. Values read from
// config text always do; an arbitrary x may land one ulp away.
inline std::string emit_scaled(double x, double scale) {
  if (scale == 1.0) return shortest(x);
  const double y = x / scale;
  if (y * scale == x) return shortest(y);
  double lo = y, hi = y;
  for (int k = 0; k < 8; ++k) {
    lo = std::nextafter(lo, -HUGE_VAL);
    hi = std::nextafter(hi, HUGE_VAL);
    if (lo * scale == x) return shortest(lo);
    if (hi * scale == x) return shortest(hi);
  }
  return shortest(y);
}

struct Field {
  std::string key;
  std::function<void(ExperimentSpec&, std::string_view)> set;
  std::function<std::string(const ExperimentSpec&)> get;
};

template <class T>
Field real_field(std::string key, T ExperimentSpec::*group, double T::*member, double scale = 1.0) {
  return {std::move(key),
          [=](ExperimentSpec& s, std::string_view v) { (s.*group).*member = parse_real(v) * scale; },
          [=](const ExperimentSpec& s) { return emit_scaled((s.*group).*member, scale); }};
}

inline constexpr double kKhzToRadPerS = 2 * std::numbers::pi * 1e3;
inline constexpr double kMs = 1e-3;
inline constexpr double kUs = 1e-6;

inline void node_fields(std::vector<Field>& f, const std::string& prefix, NodeNoiseParams ProtocolConfig::*node) {
  auto real = [&](const std::string& name, double NodeNoiseParams::*m, double scale) {
    f.push_back({prefix + "." + name,
                 [=](ExperimentSpec& s, std::string_view v) { (s.protocol.*node).*m = parse_real(v) * scale; },
                 [=](const ExperimentSpec& s) { return emit_scaled((s.protocol.*node).*m, scale); }});
  };
  real("delta_omega_khz", &NodeNoiseParams::delta_omega, kKhzToRadPerS);
  real("phi_per_attempt_rad", &NodeNoiseParams::phi_per_attempt, 1.0);
  real("memory_one_over_e_attempts", &NodeNoiseParams::memory_one_over_e_attempts, 1.0);
  real("decay_exponent", &NodeNoiseParams::decay_exponent, 1.0);
  real("t2_star_ms", &NodeNoiseParams::t2_star, kMs);
  real("local_gate_error", &NodeNoiseParams::local_gate_error, 1.0);
  real("readout_fid_0", &NodeNoiseParams::readout_fid_0, 1.0);
  real("readout_fid_1", &NodeNoiseParams::readout_fid_1, 1.0);
}

template <class Int>
Field int_field(std::string key, Int ExperimentSpec::*member) {
  return {std::move(key), [=](ExperimentSpec& s, std::string_view v) { s.*member = parse_integer<Int>(v); },
          [=](const ExperimentSpec& s) { return std::to_string(s.*member); }};
}

inline std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? ", " : "") + parts[i];
  return out;
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(real_field("protocol.theta_rad", &ExperimentSpec::protocol, &ProtocolConfig::theta));
    f.push_back(real_field("protocol.p_det", &ExperimentSpec::protocol, &ProtocolConfig::p_det));
    f.push_back({"protocol.n1_max", [](ExperimentSpec& s, std::string_view v) { s.protocol.n1_max = parse_integer<long long>(v); },
                 [](const ExperimentSpec& s) { return std::to_string(s.protocol.n1_max); }});
    f.push_back({"protocol.n2_max", [](ExperimentSpec& s, std::string_view v) { s.protocol.n2_max = parse_integer<long long>(v); },
                 [](const ExperimentSpec& s) { return std::to_string(s.protocol.n2_max); }});
    f.push_back({"protocol.signature_policy",
                 [](ExperimentSpec& s, std::string_view v) {
                   v = trim(v);
                   if (v == "plus") s.protocol.signature_policy = SignaturePolicy::plus;
                   else if (v == "minus") s.protocol.signature_policy = SignaturePolicy::minus;
                   else if (v == "both") s.protocol.signature_policy = SignaturePolicy::both;
                   else throw std::invalid_argument("expected plus, minus or both");
                 },
                 [](const ExperimentSpec& s) {
                   switch (s.protocol.signature_policy) {
                     case SignaturePolicy::plus: return std::string("plus");
                     case SignaturePolicy::minus: return std::string("minus");
                     default: return std::string("both");
                   }
                 }});
    f.push_back(real_field("protocol.attempt_duration_us", &ExperimentSpec::protocol, &ProtocolConfig::attempt_duration, kUs));
    f.push_back(real_field("protocol.local_ops_duration_us", &ExperimentSpec::protocol, &ProtocolConfig::local_ops_duration, kUs));
    f.push_back({"protocol.feedback", [](ExperimentSpec& s, std::string_view v) { s.protocol.feedback = parse_bool(v); },
                 [](const ExperimentSpec& s) { return std::string(s.protocol.feedback ? "true" : "false"); }});
    f.push_back({"protocol.wall_time_dephasing",
                 [](ExperimentSpec& s, std::string_view v) { s.protocol.wall_time_dephasing = parse_bool(v); },
                 [](const ExperimentSpec& s) { return std::string(s.protocol.wall_time_dephasing ? "true" : "false"); }});

    node_fields(f, "node_a", &ProtocolConfig::node_a);
    node_fields(f, "node_b", &ProtocolConfig::node_b);

    auto photonic = [&](const std::string& key, double PhotonicNoiseParams::*m) {
      f.push_back({key, [=](ExperimentSpec& s, std::string_view v) { s.protocol.photonics.*m = parse_real(v); },
                   [=](const ExperimentSpec& s) { return shortest(s.protocol.photonics.*m); }});
    };
    photonic("photonics.visibility", &PhotonicNoiseParams::visibility);
    photonic("photonics.dark_count_fraction", &PhotonicNoiseParams::dark_count_fraction);
    photonic("photonics.phase_drift_sigma_rad", &PhotonicNoiseParams::phase_drift_sigma);
    f.push_back({"photonics.coherence_scaling",
                 [](ExperimentSpec& s, std::string_view v) {
                   v = trim(v);
                   if (v == "linear") s.protocol.photonics.coherence_scaling = CoherenceScaling::linear;
                   else if (v == "sqrt") s.protocol.photonics.coherence_scaling = CoherenceScaling::sqrt;
                   else throw std::invalid_argument("expected linear or sqrt");
                 },
                 [](const ExperimentSpec& s) {
                   return std::string(s.protocol.photonics.coherence_scaling == CoherenceScaling::linear ? "linear" : "sqrt");
                 }});

    f.push_back(int_field("experiment.trials", &ExperimentSpec::trials));
    f.push_back(int_field("experiment.rate_trials", &ExperimentSpec::rate_trials));
    f.push_back(int_field("experiment.seed", &ExperimentSpec::seed));
    f.push_back({"experiment.output_dir", [](ExperimentSpec& s, std::string_view v) {
                   v = trim(v);
                   if (v.empty()) throw std::invalid_argument("output directory must not be empty");
                   s.output_dir = std::string(v);
                 },
                 [](const ExperimentSpec& s) { return s.output_dir; }});
    f.push_back(int_field("experiment.threads", &ExperimentSpec::threads));
    f.push_back({"experiment.include_states", [](ExperimentSpec& s, std::string_view v) { s.include_states = parse_bool(v); },
                 [](const ExperimentSpec& s) { return std::string(s.include_states ? "true" : "false"); }});

    f.push_back({"sweep.theta_list_rad",
                 [](ExperimentSpec& s, std::string_view v) {
                   s.theta_list.clear();
                   for (auto item : split(v, ',')) s.theta_list.push_back(parse_real(item));
                 },
                 [](const ExperimentSpec& s) {
                   std::vector<std::string> parts;
                   for (double t : s.theta_list) parts.push_back(shortest(t));
                   return join(parts);
                 }});
    f.push_back({"sweep.n2_max_list",
                 [](ExperimentSpec& s, std::string_view v) {
                   s.n2_max_list.clear();
                   for (auto item : split(v, ',')) s.n2_max_list.push_back(parse_integer<long long>(item));
                 },
                 [](const ExperimentSpec& s) {
                   std::vector<std::string> parts;
                   for (long long n : s.n2_max_list) parts.push_back(std::to_string(n));
                   return join(parts);
                 }});
    f.push_back({"sweep.p_det_list",
                 [](ExperimentSpec& s, std::string_view v) {
                   s.p_det_list.clear();
                   for (auto item : split(v, ',')) s.p_det_list.push_back(parse_real(item));
                 },
                 [](const ExperimentSpec& s) {
                   std::vector<std::string> parts;
                   for (double p : s.p_det_list) parts.push_back(shortest(p));
                   return join(parts);
                 }});
    f.push_back(int_field("sweep.memory_attempt_max", &ExperimentSpec::memory_attempt_max));
    f.push_back(int_field("sweep.memory_attempt_step", &ExperimentSpec::memory_attempt_step));
    f.push_back(int_field("sweep.memory_shots", &ExperimentSpec::memory_shots));
    f.push_back(int_field("sweep.feedback_attempt_max", &ExperimentSpec::feedback_attempt_max));
    f.push_back(int_field("sweep.feedback_shots", &ExperimentSpec::feedback_shots));

    f.push_back(int_field("analysis.bin_width", &ExperimentSpec::bin_width));
    f.push_back(int_field("analysis.bootstrap_resamples", &ExperimentSpec::bootstrap_resamples));
    f.push_back(int_field("analysis.raw_reference_attempts", &ExperimentSpec::raw_reference_attempts));

    auto target = [&](const std::string& key, double ExperimentSpec::*m) {
      f.push_back({key, [=](ExperimentSpec& s, std::string_view v) { s.*m = parse_real(v); },
                   [=](const ExperimentSpec& s) { return shortest(s.*m); }});
    };
    target("calibrate.target_fidelity_a", &ExperimentSpec::target_fidelity_a);
    target("calibrate.target_fidelity_b", &ExperimentSpec::target_fidelity_b);
    return f;
  }();
  return table;
}

// Maps an invariant failure back to the key it concerns. Messages name the
// parameter without its unit suffix.
inline std::string key_in_message(const std::string& message) {
  std::string best, best_stem;
  for (const auto& f : fields()) {
    std::string stem = f.key;
    for (std::string_view unit : {"_rad", "_khz", "_ms", "_us"}) {
      if (stem.size() > unit.size() && stem.compare(stem.size() - unit.size(), unit.size(), unit) == 0) {
        stem.resize(stem.size() - unit.size());
        break;
      }
    }
    if (message.find(stem) != std::string::npos && stem.size() > best_stem.size()) {
      best = f.key;
      best_stem = stem;
    }
  }
  return best;
}

}  // namespace config_detail

// Parses configuration text. `source` names the origin in error messages.
inline ExperimentSpec parse_config(std::string_view text, const std::string& source = "<config>") {
  using namespace config_detail;
  ExperimentSpec spec;
  std::map<std::string, int, std::less<>> seen;
  std::map<std::string_view, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(source, line_no, "", "syntax", "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(source, line_no, key, "known_key", "unknown key");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ConfigError(source, line_no, key, "unique_key", "repeated key, first set on line " + std::to_string(prev->second));
    }
    seen.emplace(key, line_no);
    if (value.empty()) throw ConfigError(source, line_no, key, "syntax", "missing value");
    try {
      it->second->set(spec, value);
    } catch (const std::exception& e) {
      throw ConfigError(source, line_no, key, "parse", e.what());
    }
  }
  try {
    spec.validate();
  } catch (const InvariantError& e) {
    const std::string key = key_in_message(e.what());
    const auto at = seen.find(key);
    throw ConfigError(source, at == seen.end() ? 0 : at->second, key, e.invariant(), e.what());
  }
  return spec;
}

inline ExperimentSpec load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, "", "config_readable", "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

// Every key with its value, one per line, in a fixed order.
inline std::string emit_config(const ExperimentSpec& spec) {
  std::string out;
  for (const auto& f : config_detail::fields()) out += f.key + " = " + f.get(spec) + "\n";
  return out;
}

// FNV-1a, used to tag output tables with the configuration that made them.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Covers the keys that can change results; the output directory and the
// thread count do not.
inline std::string config_hash(const ExperimentSpec& spec) {
  ExperimentSpec key = spec;
  key.output_dir.clear();
  key.threads = 0;
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(emit_config(key))));
  return buf;
}

// Comment header followed by the emitted configuration, so a manifest is itself
// a loadable config file.
inline std::string emit_manifest(const ExperimentSpec& spec, const std::vector<std::string>& header = {}) {
  std::string out = std::string("# ") + kVersion + "\n";
  out += "# config_hash = " + config_hash(spec) + "\n";
  for (const auto& h : header) out += "# " + h + "\n";
  return out + emit_config(spec);
}

}  // namespace distill
