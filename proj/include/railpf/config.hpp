#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "railpf/ekf.hpp"
#include "railpf/particle_filter.hpp"
#include "railpf/scenario.hpp"

namespace railpf {

/// Flat `key = value` text, a subset of TOML: `#` comments, bare numbers and
/// booleans, double-quoted strings. No tables or arrays.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& source);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, const char* value) { values_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }
  void set(const std::string& key, std::uint64_t value) { values_[key] = std::to_string(value); }
  void merge(const KeyValues& other, const std::string& prefix = "");

  /// Keys in sorted order, so dumps are stable.
  const std::map<std::string, std::string>& values() const { return values_; }
  std::string dump() const;

  /// Throws Error{InvalidConfig} for keys never read through a getter.
  void reject_unused(const std::string& source) const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

FilterConfig filter_config_from(const KeyValues& kv);
KeyValues to_keyvalues(const FilterConfig& cfg);

EkfConfig ekf_config_from(const KeyValues& kv);
KeyValues to_keyvalues(const EkfConfig& cfg);

/// `prior = "gnss" | "gaussian" | "uniform"` with prior_d, prior_d_sigma,
/// prior_v, prior_v_sigma (uniform uses prior_d_min / prior_d_max). "gnss",
/// the default, draws from the first fix and returns nullopt.
std::optional<Prior> prior_from(const KeyValues& kv);

/// Scenario description:
///   segment.0 = "arc length=300 radius=500 turn=left grade=0"
///   phase.0 = "accelerate target=20 rate=0.5"
///   outage.0 = "50 inf"
/// plus scalar sensor and build keys.
ScenarioSpec scenario_spec_from(const KeyValues& kv);
KeyValues to_keyvalues(const ScenarioSpec& spec);

}  // namespace railpf
