#include "polariton/spin_states.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "polariton/error.hpp"
#include "polariton/quadrature.hpp"

namespace polariton {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kQuadratureLimit = 12.0;
constexpr double kNormalizationTolerance = 1e-9;

void require_atoms(std::int64_t n_atoms) {
  if (n_atoms < 1) {
    throw std::invalid_argument("n_atoms must be >= 1, got " + std::to_string(n_atoms));
  }
}

void require_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0, 1], got " +
                                std::to_string(v));
  }
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void normalize(std::vector<double>& log_pmf) {
  const double total = log_sum_exp(log_pmf);
  for (double& v : log_pmf) {
    if (v != kNegInf) v -= total;
  }
}

// log(2^-Na C(Na, n)) for all n. The lower half is computed and mirrored so
// the result is exactly symmetric under n <-> Na - n.
std::vector<double> log_binomial_half_weights(std::int64_t n_atoms) {
  const auto size = static_cast<std::size_t>(n_atoms) + 1;
  std::vector<double> out(size);
  const double na = static_cast<double>(n_atoms);
  const double head = std::lgamma(na + 1.0) - na * std::numbers::ln2;
  for (std::int64_t n = 0; 2 * n <= n_atoms; ++n) {
    const double k = static_cast<double>(n);
    const double v = head - (std::lgamma(k + 1.0) + std::lgamma(na - k + 1.0));
    out[static_cast<std::size_t>(n)] = v;
    out[static_cast<std::size_t>(n_atoms - n)] = v;
  }
  return out;
}

}  // namespace

std::string_view to_string(StateKind kind) {
  switch (kind) {
    case StateKind::css: return "css";
    case StateKind::single_polariton: return "single";
    case StateKind::mixture: return "mixture";
  }
  return "unknown";
}

StateSpec StateSpec::mixture(double purity) {
  require_unit_interval(purity, "purity");
  return {StateKind::mixture, purity};
}

double StateSpec::polariton_weight() const {
  switch (kind) {
    case StateKind::css: return 0.0;
    case StateKind::single_polariton: return 1.0;
    case StateKind::mixture: return purity;
  }
  return 0.0;
}

void EnsembleParams::validate() const {
  require_atoms(n_atoms);
  require_unit_interval(purity, "purity");
  require_unit_interval(efficiency, "efficiency");
}

DiscreteMarginal::DiscreteMarginal(std::int64_t n_atoms, std::vector<double> log_pmf)
    : n_atoms_(n_atoms), log_pmf_(std::move(log_pmf)) {
  require_atoms(n_atoms);
  if (log_pmf_.size() != static_cast<std::size_t>(n_atoms) + 1) {
    throw std::invalid_argument("log_pmf must have n_atoms + 1 entries");
  }
  for (double v : log_pmf_) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("log_pmf entries must be finite or -inf");
    }
  }
}

double DiscreteMarginal::log_probability(std::int64_t n) const {
  if (n < 0 || n > n_atoms_) throw std::invalid_argument("n out of range");
  return log_pmf_[static_cast<std::size_t>(n)];
}

double DiscreteMarginal::probability(std::int64_t n) const {
  return std::exp(log_probability(n));
}

double DiscreteMarginal::log_total() const { return log_sum_exp(log_pmf_); }

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  // Compensated sum; Na can reach 10^6 terms.
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double y = std::exp(v - hi) - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return hi + std::log(sum);
}

DiscreteMarginal css_pmf(std::int64_t n_atoms) {
  require_atoms(n_atoms);
  auto log_pmf = log_binomial_half_weights(n_atoms);
  normalize(log_pmf);
  return {n_atoms, std::move(log_pmf)};
}

DiscreteMarginal single_polariton_pmf(std::int64_t n_atoms) {
  require_atoms(n_atoms);
  auto log_pmf = log_binomial_half_weights(n_atoms);
  const double na = static_cast<double>(n_atoms);
  const double log_prefactor = std::log(4.0 / na);
  for (std::int64_t n = 0; n <= n_atoms; ++n) {
    auto& v = log_pmf[static_cast<std::size_t>(n)];
    // |n - Na/2| as an exact half-integer.
    const std::int64_t twice_offset = 2 * n - n_atoms;
    if (twice_offset == 0) {
      v = kNegInf;
      continue;
    }
    const double offset = std::abs(static_cast<double>(twice_offset)) / 2.0;
    v += log_prefactor + 2.0 * std::log(offset);
  }
  normalize(log_pmf);
  return {n_atoms, std::move(log_pmf)};
}

DiscreteMarginal mixture_pmf(std::int64_t n_atoms, double purity) {
  require_atoms(n_atoms);
  require_unit_interval(purity, "purity");
  const auto p0 = css_pmf(n_atoms);
  const auto p1 = single_polariton_pmf(n_atoms);
  const double log_w1 = purity > 0.0 ? std::log(purity) : kNegInf;
  const double log_w0 = purity < 1.0 ? std::log1p(-purity) : kNegInf;
  std::vector<double> out(p0.log_pmf().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = log_w1 == kNegInf ? kNegInf : log_w1 + p1.log_pmf()[i];
    const double b = log_w0 == kNegInf ? kNegInf : log_w0 + p0.log_pmf()[i];
    out[i] = log_add(a, b);
  }
  return {n_atoms, std::move(out)};
}

DiscreteMarginal state_pmf(std::int64_t n_atoms, const StateSpec& state) {
  switch (state.kind) {
    case StateKind::css: return css_pmf(n_atoms);
    case StateKind::single_polariton: return single_polariton_pmf(n_atoms);
    case StateKind::mixture: return mixture_pmf(n_atoms, state.purity);
  }
  throw std::invalid_argument("unknown state kind");
}

double n_to_x(std::int64_t n_atoms, std::int64_t n) {
  require_atoms(n_atoms);
  if (n < 0 || n > n_atoms) {
    throw std::invalid_argument("n must lie in [0, n_atoms], got " + std::to_string(n));
  }
  // sqrt(2/Na) (n - Na/2) == (2n - Na) / sqrt(2 Na), integer numerator.
  return static_cast<double>(2 * n - n_atoms) / std::sqrt(2.0 * static_cast<double>(n_atoms));
}

std::int64_t x_to_n(std::int64_t n_atoms, double x) {
  require_atoms(n_atoms);
  const double na = static_cast<double>(n_atoms);
  const double n = std::round((x * std::sqrt(2.0 * na) + na) / 2.0);
  if (!(n >= 0.0 && n <= na)) throw std::invalid_argument("x maps outside [0, n_atoms]");
  return static_cast<std::int64_t>(n);
}

double asymptotic_pmf(const StateSpec& state, std::int64_t n_atoms, double x) {
  require_atoms(n_atoms);
  const double per_n = std::sqrt(2.0 / (std::numbers::pi * static_cast<double>(n_atoms)));
  return per_n * std::sqrt(std::numbers::pi) * asymptotic_density(state, x);
}

double asymptotic_density(const StateSpec& state, double x) {
  const double w = state.polariton_weight();
  const double gauss = std::exp(-x * x) * std::numbers::inv_sqrtpi;
  return ((1.0 - w) + w * 2.0 * x * x) * gauss;
}

ContinuousMarginal::ContinuousMarginal(StateSpec state, double efficiency)
    : state_(state), efficiency_(efficiency) {
  require_unit_interval(efficiency, "efficiency");
  require_unit_interval(state.purity, "purity");
  weight_ = state_.polariton_weight() * efficiency_;
}

double ContinuousMarginal::density(double x) const {
  const double gauss = std::exp(-x * x) * std::numbers::inv_sqrtpi;
  return ((1.0 - weight_) + weight_ * 2.0 * x * x) * gauss;
}

double ContinuousMarginal::cdf(double x) const {
  // Gaussian part: (1 + erf x)/2; the x^2 e^{-x^2} part adds -x e^{-x^2}/sqrt(pi).
  const double gauss_cdf = 0.5 * std::erfc(-x);
  return gauss_cdf - weight_ * x * std::exp(-x * x) * std::numbers::inv_sqrtpi;
}

ContinuousMarginal apply_efficiency(const StateSpec& state, double efficiency) {
  return {state, efficiency};
}

namespace {

Moments finish(double mean, double raw2, double raw4, double mu2, double mu4) {
  Moments m;
  m.mean = mean;
  m.raw2 = raw2;
  m.raw4 = raw4;
  m.mu2 = mu2;
  m.mu4 = mu4;
  m.kappa2 = mu2;
  m.kappa4 = mu4 - 3.0 * mu2 * mu2;
  return m;
}

}  // namespace

Moments marginal_moments(const DiscreteMarginal& marginal) {
  const double log_total = marginal.log_total();
  if (!(std::abs(std::expm1(log_total)) <= kNormalizationTolerance)) {
    throw InvalidState("discrete marginal is not normalized (total mass " +
                       std::to_string(std::exp(log_total)) + ")");
  }
  const auto na = marginal.n_atoms();
  double mean = 0.0;
  double raw2 = 0.0;
  double raw4 = 0.0;
  for (std::int64_t n = 0; n <= na; ++n) {
    const double p = std::exp(marginal.log_pmf()[static_cast<std::size_t>(n)]);
    const double x = n_to_x(na, n);
    mean += p * x;
    raw2 += p * x * x;
    raw4 += p * x * x * x * x;
  }
  double mu2 = 0.0;
  double mu4 = 0.0;
  for (std::int64_t n = 0; n <= na; ++n) {
    const double p = std::exp(marginal.log_pmf()[static_cast<std::size_t>(n)]);
    const double d = n_to_x(na, n) - mean;
    mu2 += p * d * d;
    mu4 += p * d * d * d * d;
  }
  return finish(mean, raw2, raw4, mu2, mu4);
}

Moments marginal_moments(const ContinuousMarginal& marginal) {
  const auto f = [&](double x) { return marginal.density(x); };
  const double total = integrate(f, -kQuadratureLimit, kQuadratureLimit);
  if (!(std::abs(total - 1.0) <= kNormalizationTolerance)) {
    throw InvalidState("continuous marginal is not normalized (integral " +
                       std::to_string(total) + ")");
  }
  const double mean =
      integrate([&](double x) { return x * f(x); }, -kQuadratureLimit, kQuadratureLimit);
  const double raw2 =
      integrate([&](double x) { return x * x * f(x); }, -kQuadratureLimit, kQuadratureLimit);
  const double raw4 = integrate([&](double x) { return x * x * x * x * f(x); },
                                -kQuadratureLimit, kQuadratureLimit);
  const double mu2 = integrate([&](double x) { return (x - mean) * (x - mean) * f(x); },
                               -kQuadratureLimit, kQuadratureLimit);
  const double mu4 = integrate(
      [&](double x) {
        const double d = x - mean;
        return d * d * d * d * f(x);
      },
      -kQuadratureLimit, kQuadratureLimit);
  return finish(mean, raw2, raw4, mu2, mu4);
}

Moments closed_form_moments(const StateSpec& state, double efficiency) {
  require_unit_interval(efficiency, "efficiency");
  const double w = state.polariton_weight() * efficiency;
  // Vacuum Gaussian: mu2 = 1/2, mu4 = 3/4. Fock-1 marginal: mu2 = 3/2, mu4 = 15/4.
  const double mu2 = 0.5 + w;
  const double mu4 = 0.75 + 3.0 * w;
  return finish(0.0, mu2, mu4, mu2, mu4);
}

nlohmann::json to_json(const DiscreteMarginal& marginal, Convention convention) {
  const double shift = convention == Convention::x_units
                           ? 0.5 * std::log(static_cast<double>(marginal.n_atoms()) / 2.0)
                           : 0.0;
  nlohmann::json entries = nlohmann::json::array();
  for (double v : marginal.log_pmf()) {
    if (v == kNegInf) {
      entries.push_back(nullptr);
    } else {
      entries.push_back(v + shift);
    }
  }
  return {{"n_atoms", marginal.n_atoms()},
          {"log_pmf", std::move(entries)},
          {"convention", convention == Convention::x_units ? "x-units" : "n-units"}};
}

DiscreteMarginal discrete_marginal_from_json(const nlohmann::json& j) {
  const auto n_atoms = j.at("n_atoms").get<std::int64_t>();
  const auto convention = j.value("convention", std::string("n-units"));
  double shift = 0.0;
  if (convention == "x-units") {
    shift = 0.5 * std::log(static_cast<double>(n_atoms) / 2.0);
  } else if (convention != "n-units") {
    throw std::invalid_argument("unknown convention '" + convention + "'");
  }
  std::vector<double> log_pmf;
  for (const auto& e : j.at("log_pmf")) {
    log_pmf.push_back(e.is_null() ? kNegInf : e.get<double>() - shift);
  }
  return {n_atoms, std::move(log_pmf)};
}

}  // namespace polariton
