#pragma once

// Origin accounting for heralding clicks and the resulting mixture purity.

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace polariton {

/// Per-shot model inputs. SI units: seconds, counts per second.
struct BudgetConfig {
  double excitation_photons = 1.35e4;
  double pulse_duration = 10e-6;
  double scatter_probability = 0.05;
  double pbs_rejection = 7e3;
  double cavity_rejection = 5e7;
  double cavity_transmission = 0.8;
  double n_cavities = 2;
  double mode_match = 0.75;
  /// Desired decay over the unfilterable F=3, mF=2 decay.
  double branching_favor = 4.0;
  /// pi-polarized decay relative to the desired decay, before the PBS.
  double pi_decay_ratio = 0.0;
  double dark_count_rate = 0.0;
  double detector_efficiency = 1.0;
  /// Sources with a smaller click probability are flagged minor.
  double report_threshold = 5e-4;

  void validate() const;
};

/// Stated apparatus values; detector efficiency assumed 0.5, dark
/// counts and branching ratio left at nominal values for calibration.
BudgetConfig nominal_config();

enum class ClickSource {
  dark_count,
  excitation_leakage,
  wrong_decay_mF2,
  desired_decay,
  pi_polarized_decay,
};

inline constexpr std::array kAllSources = {
    ClickSource::dark_count, ClickSource::excitation_leakage, ClickSource::wrong_decay_mF2,
    ClickSource::desired_decay, ClickSource::pi_polarized_decay};

std::string_view to_string(ClickSource source);
ClickSource click_source_from_string(std::string_view name);
/// Label for the origin column of the table.
std::string_view origin_label(ClickSource source);
/// "|Psi1>" for the desired decay, "|Psi0>" otherwise.
std::string_view created_state(ClickSource source);

struct SourceEntry {
  double expected_clicks = 0.0;  // per shot, unnormalized
  double probability = 0.0;      // conditional on a click
  bool minor = false;
};

struct ClickBudget {
  std::map<ClickSource, SourceEntry> per_source;
  double purity = 0.0;

  double probability(ClickSource source) const;
};

ClickBudget compute_click_budget(const BudgetConfig& config);

double purity_from_budget(const ClickBudget& budget);

/// Names of BudgetConfig fields that calibrate_unknowns can fit.
std::vector<std::string> calibratable_fields();

struct CalibrationResult {
  BudgetConfig config;
  std::map<ClickSource, double> residuals;  // model - target
  double max_abs_residual = 0.0;
  int iterations = 0;
};

/// Fits up to two named config fields so the normalized click probabilities
/// match `target` (probabilities, missing sources count as 0) in least
/// squares. Throws CalibrationFailed when any residual exceeds `tolerance`.
CalibrationResult calibrate_unknowns(const BudgetConfig& config,
                                     const std::vector<std::string>& unknowns,
                                     const std::map<ClickSource, double>& target,
                                     double tolerance = 2e-3);

/// Origin probabilities as printed in the reference table.
std::map<ClickSource, double> reference_table();

/// nominal_config() with dark_count_rate and branching_favor fitted to
/// reference_table().
BudgetConfig calibrated_budget_config();

double get_field(const BudgetConfig& config, std::string_view name);
void set_field(BudgetConfig& config, std::string_view name, double value);
/// All field names in declaration order.
std::vector<std::string> budget_field_names();

nlohmann::json to_json(const ClickBudget& budget);
nlohmann::json to_json(const BudgetConfig& config);
/// Aligned table: origin, created state, probability in percent.
std::string format_table(const ClickBudget& budget);

}  // namespace polariton
