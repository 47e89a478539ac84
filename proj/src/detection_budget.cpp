#include "polariton/detection_budget.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "polariton/error.hpp"

namespace polariton {

namespace {

struct FieldInfo {
  const char* name;
  double BudgetConfig::*member;
  enum Bound { unit, positive, at_least_one } bound;
};

constexpr FieldInfo kFields[] = {
    {"excitation_photons", &BudgetConfig::excitation_photons, FieldInfo::positive},
    {"pulse_duration", &BudgetConfig::pulse_duration, FieldInfo::positive},
    {"scatter_probability", &BudgetConfig::scatter_probability, FieldInfo::unit},
    {"pbs_rejection", &BudgetConfig::pbs_rejection, FieldInfo::at_least_one},
    {"cavity_rejection", &BudgetConfig::cavity_rejection, FieldInfo::at_least_one},
    {"cavity_transmission", &BudgetConfig::cavity_transmission, FieldInfo::unit},
    {"n_cavities", &BudgetConfig::n_cavities, FieldInfo::positive},
    {"mode_match", &BudgetConfig::mode_match, FieldInfo::unit},
    {"branching_favor", &BudgetConfig::branching_favor, FieldInfo::positive},
    {"pi_decay_ratio", &BudgetConfig::pi_decay_ratio, FieldInfo::positive},
    {"dark_count_rate", &BudgetConfig::dark_count_rate, FieldInfo::positive},
    {"detector_efficiency", &BudgetConfig::detector_efficiency, FieldInfo::unit},
    {"report_threshold", &BudgetConfig::report_threshold, FieldInfo::unit},
};

const FieldInfo& field_info(std::string_view name) {
  for (const auto& f : kFields) {
    if (name == f.name) return f;
  }
  throw std::invalid_argument("unknown budget field '" + std::string(name) + "'");
}

// Fields the fitter may vary; each is mapped to an unbounded coordinate.
constexpr const char* kCalibratable[] = {
    "dark_count_rate", "detector_efficiency", "branching_favor", "mode_match",
    "scatter_probability", "cavity_rejection", "excitation_photons", "pi_decay_ratio",
};

double to_free(const FieldInfo& f, double v) {
  switch (f.bound) {
    case FieldInfo::unit: {
      const double c = std::clamp(v, 1e-12, 1.0 - 1e-12);
      return std::log(c / (1.0 - c));
    }
    case FieldInfo::positive: return std::log(std::max(v, 1e-300));
    case FieldInfo::at_least_one: return std::log(std::max(v - 1.0, 1e-300));
  }
  return v;
}

double from_free(const FieldInfo& f, double u) {
  switch (f.bound) {
    case FieldInfo::unit: return 1.0 / (1.0 + std::exp(-u));
    case FieldInfo::positive: return std::exp(u);
    case FieldInfo::at_least_one: return 1.0 + std::exp(u);
  }
  return u;
}

}  // namespace

void BudgetConfig::validate() const {
  if (n_cavities != std::floor(n_cavities)) {
    throw std::invalid_argument("n_cavities must be a whole number");
  }
  for (const auto& f : kFields) {
    const double v = this->*f.member;
    if (std::isnan(v)) throw std::invalid_argument(std::string(f.name) + " is NaN");
    switch (f.bound) {
      case FieldInfo::unit:
        if (v < 0.0 || v > 1.0) {
          throw std::invalid_argument(std::string(f.name) + " must lie in [0, 1]");
        }
        break;
      case FieldInfo::positive:
        if (v < 0.0) throw std::invalid_argument(std::string(f.name) + " must be >= 0");
        break;
      case FieldInfo::at_least_one:
        if (v < 1.0) throw std::invalid_argument(std::string(f.name) + " must be >= 1");
        break;
    }
  }
}

BudgetConfig nominal_config() {
  BudgetConfig c;
  c.dark_count_rate = 100.0;
  c.detector_efficiency = 0.5;
  c.pi_decay_ratio = 1.0;
  return c;
}

std::string_view to_string(ClickSource source) {
  switch (source) {
    case ClickSource::dark_count: return "dark_count";
    case ClickSource::excitation_leakage: return "excitation_leakage";
    case ClickSource::wrong_decay_mF2: return "wrong_decay_mF2";
    case ClickSource::desired_decay: return "desired_decay";
    case ClickSource::pi_polarized_decay: return "pi_polarized_decay";
  }
  return "unknown";
}

ClickSource click_source_from_string(std::string_view name) {
  for (auto s : kAllSources) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown click source '" + std::string(name) + "'");
}

std::string_view origin_label(ClickSource source) {
  switch (source) {
    case ClickSource::dark_count: return "Dark counts";
    case ClickSource::excitation_leakage: return "Leakage of excitation pulse";
    case ClickSource::wrong_decay_mF2: return "Decay via e -> F=3,mF=2";
    case ClickSource::desired_decay: return "Decay via e -> down";
    case ClickSource::pi_polarized_decay: return "pi-polarized decay (PBS)";
  }
  return "unknown";
}

std::string_view created_state(ClickSource source) {
  return source == ClickSource::desired_decay ? "|Psi1>" : "|Psi0>";
}

double ClickBudget::probability(ClickSource source) const {
  const auto it = per_source.find(source);
  return it == per_source.end() ? 0.0 : it->second.probability;
}

ClickBudget compute_click_budget(const BudgetConfig& config) {
  config.validate();
  const double r = config.branching_favor;
  // Detection path shared by every photon that reaches the detector.
  const double path = config.mode_match *
                      std::pow(config.cavity_transmission, config.n_cavities) *
                      config.detector_efficiency;
  const double desired = config.scatter_probability * (r / (r + 1.0)) * path;
  const double wrong = config.scatter_probability * (1.0 / (r + 1.0)) * path;
  const double pi = desired * config.pi_decay_ratio / config.pbs_rejection;
  // An infinite rejection gives exactly zero leakage.
  const double leakage = config.excitation_photons / config.cavity_rejection * path;
  const double dark = config.dark_count_rate * config.pulse_duration;

  ClickBudget budget;
  budget.per_source[ClickSource::dark_count].expected_clicks = dark;
  budget.per_source[ClickSource::excitation_leakage].expected_clicks = leakage;
  budget.per_source[ClickSource::wrong_decay_mF2].expected_clicks = wrong;
  budget.per_source[ClickSource::desired_decay].expected_clicks = desired;
  budget.per_source[ClickSource::pi_polarized_decay].expected_clicks = pi;

  double total = 0.0;
  for (const auto& [_, e] : budget.per_source) total += e.expected_clicks;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidState("no click source has nonzero expected counts");
  }
  for (auto& [_, e] : budget.per_source) {
    e.probability = e.expected_clicks / total;
    e.minor = e.probability < config.report_threshold;
  }
  budget.purity = budget.per_source[ClickSource::desired_decay].probability;
  return budget;
}

double purity_from_budget(const ClickBudget& budget) {
  return budget.probability(ClickSource::desired_decay);
}

std::vector<std::string> calibratable_fields() {
  return {std::begin(kCalibratable), std::end(kCalibratable)};
}

double get_field(const BudgetConfig& config, std::string_view name) {
  return config.*field_info(name).member;
}

void set_field(BudgetConfig& config, std::string_view name, double value) {
  config.*field_info(name).member = value;
}

std::vector<std::string> budget_field_names() {
  std::vector<std::string> names;
  for (const auto& f : kFields) names.emplace_back(f.name);
  return names;
}

CalibrationResult calibrate_unknowns(const BudgetConfig& config,
                                     const std::vector<std::string>& unknowns,
                                     const std::map<ClickSource, double>& target,
                                     double tolerance) {
  config.validate();
  if (unknowns.size() > 2) throw std::invalid_argument("at most two unknown fields");
  std::vector<const FieldInfo*> fields;
  for (const auto& name : unknowns) {
    if (std::find(std::begin(kCalibratable), std::end(kCalibratable), name) ==
        std::end(kCalibratable)) {
      throw std::invalid_argument("field '" + name + "' cannot be calibrated");
    }
    fields.push_back(&field_info(name));
  }
  double target_sum = 0.0;
  for (const auto& [_, p] : target) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("target probabilities in [0, 1]");
    target_sum += p;
  }
  if (std::abs(target_sum - 1.0) > 5e-3) {
    throw std::invalid_argument("target probabilities must sum to 1");
  }

  const auto n_res = kAllSources.size();
  const auto residuals = [&](const BudgetConfig& c) {
    const auto b = compute_click_budget(c);
    Eigen::VectorXd res(static_cast<Eigen::Index>(n_res));
    for (std::size_t i = 0; i < n_res; ++i) {
      const auto it = target.find(kAllSources[i]);
      const double t = it == target.end() ? 0.0 : it->second;
      res[static_cast<Eigen::Index>(i)] = b.probability(kAllSources[i]) - t;
    }
    return res;
  };
  const auto apply = [&](const Eigen::VectorXd& u) {
    BudgetConfig c = config;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      c.*fields[k]->member = from_free(*fields[k], u[static_cast<Eigen::Index>(k)]);
    }
    return c;
  };

  const auto dim = static_cast<Eigen::Index>(fields.size());
  Eigen::VectorXd u(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    u[k] = to_free(*fields[static_cast<std::size_t>(k)],
                   config.*fields[static_cast<std::size_t>(k)]->member);
  }

  // Levenberg-Marquardt on the free coordinates with a forward-difference
  // Jacobian. Additive damping keeps steps finite along unidentifiable
  // directions (e.g. dark_count_rate vs detector_efficiency).
  int iterations = 0;
  if (dim > 0) {
    double lambda = 1e-3;
    Eigen::VectorXd res = residuals(apply(u));
    double cost = res.squaredNorm();
    bool converged = false;
    while (!converged && iterations < 200) {
      ++iterations;
      Eigen::MatrixXd jac(res.size(), dim);
      for (Eigen::Index k = 0; k < dim; ++k) {
        Eigen::VectorXd up = u;
        const double h = 1e-6 * std::max(1.0, std::abs(u[k]));
        up[k] += h;
        jac.col(k) = (residuals(apply(up)) - res) / h;
      }
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd grad = jac.transpose() * res;
      converged = true;
      for (int tries = 0; tries < 30; ++tries) {
        const Eigen::MatrixXd lhs = jtj + lambda * Eigen::MatrixXd::Identity(dim, dim);
        const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
        const Eigen::VectorXd trial = u + step;
        const Eigen::VectorXd trial_res = residuals(apply(trial));
        const double trial_cost = trial_res.squaredNorm();
        if (std::isfinite(trial_cost) && trial_cost < cost) {
          converged = cost - trial_cost < 1e-24 || step.norm() < 1e-12;
          u = trial;
          res = trial_res;
          cost = trial_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          break;
        }
        lambda *= 10.0;
      }
    }
  }

  CalibrationResult result;
  result.config = apply(u);
  result.iterations = iterations;
  const auto final_res = residuals(result.config);
  for (std::size_t i = 0; i < n_res; ++i) {
    const double r = final_res[static_cast<Eigen::Index>(i)];
    result.residuals[kAllSources[i]] = r;
    result.max_abs_residual = std::max(result.max_abs_residual, std::abs(r));
  }
  if (!(result.max_abs_residual <= tolerance)) {
    std::ostringstream msg;
    msg << "calibration residual " << result.max_abs_residual << " exceeds tolerance "
        << tolerance << ";";
    for (const auto& [s, r] : result.residuals) msg << ' ' << to_string(s) << '=' << r;
    for (const auto* f : fields) msg << ' ' << f->name << "->" << result.config.*f->member;
    throw CalibrationFailed(msg.str());
  }
  return result;
}

std::map<ClickSource, double> reference_table() {
  return {{ClickSource::dark_count, 0.087},
          {ClickSource::excitation_leakage, 0.006},
          {ClickSource::wrong_decay_mF2, 0.191},
          {ClickSource::desired_decay, 0.715}};
}

BudgetConfig calibrated_budget_config() {
  return calibrate_unknowns(nominal_config(), {"dark_count_rate", "branching_favor"},
                            reference_table())
      .config;
}

nlohmann::json to_json(const ClickBudget& budget) {
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [s, e] : budget.per_source) {
    sources[std::string(to_string(s))] = {{"expected_clicks", e.expected_clicks},
                                          {"probability", e.probability},
                                          {"created_state", created_state(s)},
                                          {"minor", e.minor}};
  }
  return {{"schema_version", 1}, {"per_source", std::move(sources)}, {"purity", budget.purity}};
}

nlohmann::json to_json(const BudgetConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : kFields) j[f.name] = config.*f.member;
  return j;
}

std::string format_table(const ClickBudget& budget) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-30s %-14s %15s\n", "Origin of photo-count",
                "Created state", "Probability (%)");
  out << line;
  for (auto s : kAllSources) {
    const auto& e = budget.per_source.at(s);
    std::snprintf(line, sizeof line, "%-30s %-14s %15.1f%s\n", std::string(origin_label(s)).c_str(),
                  std::string(created_state(s)).c_str(), 100.0 * e.probability,
                  e.minor ? "  (minor)" : "");
    out << line;
  }
  std::snprintf(line, sizeof line, "purity p = %.4f\n", budget.purity);
  out << line;
  return out.str();
}

}  // namespace polariton
