#pragma once

// Variance-vs-atom-number scans: V(Na) = c0 + c1 Na + c2 Na^2, with c0 the
// light shot noise plus technical floor, c1 Na the projection noise and
// c2 Na^2 technical noise that grows with the atomic signal.

#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace polariton {

struct NoiseScanConfig {
  std::vector<double> atom_numbers;
  std::size_t shots_per_point = 10000;
  double shot_noise_var = 1.0;
  double projection_coeff = 0.0;
  double technical_coeff = 0.0;
  double preparation_jitter = 0.0;

  void validate() const;
  double model_variance(double n_atoms) const;
};

/// Evenly spaced grid 0, step, ..., max_atoms with `points` entries.
std::vector<double> linear_grid(double max_atoms, std::size_t points);

/// Reference scan: projection noise dominates at 10^5 atoms and the
/// tomography efficiency there is 0.65.
NoiseScanConfig reference_noise_config();

/// tomography_efficiency of reference_noise_config() at its largest Na.
double reference_efficiency();

struct ScanPoint {
  double n_atoms = 0.0;
  double variance = 0.0;
  double std_error = 0.0;  // 0 when unknown
};

/// Per point: shots_per_point Gaussian outcomes with variance V(Na); reports
/// the sample variance and sqrt(2/(m-1)) times it. Point i uses seed
/// derive_seed(seed, i, 0).
std::vector<ScanPoint> simulate_noise_scan(const NoiseScanConfig& config, std::uint64_t seed);

enum class FitMode { non_negative, unconstrained };

struct QuadraticFit {
  std::array<double, 3> coeffs{};  // c0, c1, c2
  std::array<std::array<double, 3>, 3> covariance{};
  std::vector<double> residuals;  // data - model
  std::array<bool, 3> clipped{};  // held at 0 by the non-negativity constraint
  bool weighted = true;

  double c0() const { return coeffs[0]; }
  double c1() const { return coeffs[1]; }
  double c2() const { return coeffs[2]; }
  double evaluate(double n_atoms) const;
  bool any_clipped() const { return clipped[0] || clipped[1] || clipped[2]; }
};

/// Weighted least squares (weights 1/std_error^2). When any point lacks a
/// std_error the fit is unweighted and the covariance is scaled by the
/// residual variance. The non-negative mode returns the exact constrained
/// minimum; coefficients held at zero are flagged in `clipped`.
QuadraticFit fit_quadratic(std::span<const ScanPoint> scan,
                           FitMode mode = FitMode::non_negative);

struct NoiseFractions {
  double n_atoms = 0.0;
  double shot = 0.0;
  double projection = 0.0;
  double technical = 0.0;
};

std::vector<NoiseFractions> decompose_noise(const QuadraticFit& fit,
                                            std::span<const ScanPoint> scan);

/// (Var(Na) - Var(0)) / Var(Na).
double tomography_efficiency(double var_with_atoms, double var_no_atoms);

/// CSV with header na,variance[,stderr]. Sets `has_std_error` accordingly.
std::vector<ScanPoint> read_scan_csv(std::istream& in, bool& has_std_error);
void write_scan_csv(std::ostream& out, std::span<const ScanPoint> scan);

nlohmann::json to_json(const QuadraticFit& fit, std::span<const ScanPoint> scan);

}  // namespace polariton
