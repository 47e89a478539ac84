#pragma once

// Jz-outcome distributions of the coherent spin state (CSS), the single
// polariton state, their classical mixture, and the finite-efficiency readout.
//
// Two coordinate systems are used throughout:
//   n-units: n = number of atoms found in |down>, 0 <= n <= Na
//   x-units: x = sqrt(2/Na) * (n - Na/2); the CSS has variance 1/2 here.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace polariton {

enum class StateKind { css, single_polariton, mixture };

std::string_view to_string(StateKind kind);

/// Which heralded state is measured. `purity` is the weight of the
/// single-polariton component and only matters for `mixture`.
struct StateSpec {
  StateKind kind = StateKind::css;
  double purity = 0.0;

  static StateSpec css() { return {StateKind::css, 0.0}; }
  static StateSpec single_polariton() { return {StateKind::single_polariton, 1.0}; }
  static StateSpec mixture(double purity);

  /// Probability that a draw comes from the single-polariton component.
  double polariton_weight() const;
};

struct EnsembleParams {
  std::int64_t n_atoms = 1;
  double purity = 0.0;
  double efficiency = 1.0;

  void validate() const;
};

/// Exact pmf over n, stored as natural logs. Exact zeros are -infinity.
class DiscreteMarginal {
 public:
  DiscreteMarginal(std::int64_t n_atoms, std::vector<double> log_pmf);

  std::int64_t n_atoms() const { return n_atoms_; }
  std::span<const double> log_pmf() const { return log_pmf_; }
  double log_probability(std::int64_t n) const;
  double probability(std::int64_t n) const;
  /// log of the total probability mass (0 when normalized).
  double log_total() const;

 private:
  std::int64_t n_atoms_;
  std::vector<double> log_pmf_;
};

DiscreteMarginal css_pmf(std::int64_t n_atoms);
DiscreteMarginal single_polariton_pmf(std::int64_t n_atoms);
DiscreteMarginal mixture_pmf(std::int64_t n_atoms, double purity);
DiscreteMarginal state_pmf(std::int64_t n_atoms, const StateSpec& state);

double n_to_x(std::int64_t n_atoms, std::int64_t n);
/// Nearest grid point n for a quadrature value x; exact inverse of n_to_x.
std::int64_t x_to_n(std::int64_t n_atoms, double x);

/// Large-Na form of the per-n probability at quadrature value x.
double asymptotic_pmf(const StateSpec& state, std::int64_t n_atoms, double x);
/// Large-Na density per unit x: (1 - w + 2 w x^2) e^{-x^2} / sqrt(pi).
double asymptotic_density(const StateSpec& state, double x);

/// Density of X = sqrt(eff) * X_state + sqrt(1 - eff) * X_vac in x-units,
/// X_vac ~ N(0, 1/2). Vacuum admixture maps the single-polariton component
/// onto a mixture of itself (weight eff) and the vacuum Gaussian, so the
/// result is the ideal density with effective polariton weight purity * eff.
class ContinuousMarginal {
 public:
  ContinuousMarginal(StateSpec state, double efficiency);

  const StateSpec& state() const { return state_; }
  double efficiency() const { return efficiency_; }
  double effective_polariton_weight() const { return weight_; }

  double density(double x) const;
  double cdf(double x) const;

 private:
  StateSpec state_;
  double efficiency_;
  double weight_;
};

ContinuousMarginal apply_efficiency(const StateSpec& state, double efficiency);

struct Moments {
  double mean = 0.0;
  double mu2 = 0.0;  // central
  double mu4 = 0.0;  // central
  double raw2 = 0.0;
  double raw4 = 0.0;
  double kappa2 = 0.0;
  double kappa4 = 0.0;
};

/// Exact moments in x-units by summation over the n grid.
Moments marginal_moments(const DiscreteMarginal& marginal);
/// Moments by adaptive quadrature over [-12, 12].
Moments marginal_moments(const ContinuousMarginal& marginal);

/// Closed-form cumulants of apply_efficiency(state, efficiency):
/// kappa2 = 1/2 + w, kappa4 = -3 w^2 with w = purity * efficiency.
Moments closed_form_moments(const StateSpec& state, double efficiency);

double log_sum_exp(std::span<const double> values);

enum class Convention { n_units, x_units };

/// {"n_atoms", "log_pmf", "convention"}; -infinity entries become null.
/// In x-units the entries are log densities per unit x at the grid points.
nlohmann::json to_json(const DiscreteMarginal& marginal,
                       Convention convention = Convention::n_units);
DiscreteMarginal discrete_marginal_from_json(const nlohmann::json& j);

}  // namespace polariton
