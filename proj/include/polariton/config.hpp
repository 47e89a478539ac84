#pragma once

// Flat key-value configuration files.
//
//   # comment
//   key = value
//
// A flat JSON object with scalar (or numeric array) values is accepted too.
// Unknown keys are rejected by the typed loaders.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "polariton/detection_budget.hpp"
#include "polariton/noise_scaling.hpp"

namespace polariton {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  const std::map<std::string, std::string>& entries() const { return entries_; }
  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  double number(const std::string& key) const;
  std::vector<double> number_list(const std::string& key) const;

  /// Throws ConfigError naming the first key not in `allowed`.
  void reject_unknown(const std::vector<std::string>& allowed) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Accepts decimal/scientific notation and "inf".
double parse_number(std::string_view text);

/// Starts from `base` and overrides every key present.
BudgetConfig budget_config_from(const KeyValueConfig& kv, BudgetConfig base = {});

/// Keys: atom_numbers (comma list) or max_atoms + points, shots_per_point,
/// shot_noise_var, projection_coeff, technical_coeff, preparation_jitter.
NoiseScanConfig noise_config_from(const KeyValueConfig& kv,
                                  NoiseScanConfig base = reference_noise_config());

}  // namespace polariton
