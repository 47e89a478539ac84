#pragma once

// Monte-Carlo sampling of the x-units Jz marginals, cumulant estimation and
// the sample-size study for telling the heralded state apart from the CSS.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "polariton/spin_states.hpp"

namespace polariton {

struct SampleSet {
  std::vector<double> values;
  StateSpec state;
  double efficiency = 1.0;
  std::uint64_t seed = 0;
  std::string generator_id;
};

/// I.i.d. draws from apply_efficiency(state, efficiency). Exact transforms:
/// vacuum ~ N(0, 1/2); polariton ~ sign * sqrt(Gamma(3/2, 1)) with the
/// Gamma variate built as Exp(1) + Z^2/2.
SampleSet draw_samples(const StateSpec& state, double efficiency, std::size_t size,
                       std::uint64_t seed);

enum class CumulantEstimator { unbiased, plug_in };

struct KStatistics {
  double k2 = 0.0;
  double k4 = 0.0;
};

/// Fisher k-statistics (unbiased, needs >= 5 values) or the plug-in
/// central-moment cumulants m2 and m4 - 3 m2^2 (needs >= 2 values).
KStatistics k_statistics(std::span<const double> values,
                         CumulantEstimator estimator = CumulantEstimator::unbiased);

struct CumulantEstimate {
  double k2 = 0.0;
  double k4 = 0.0;
  double stderr_k2 = 0.0;  // standard deviation over repetitions
  double stderr_k4 = 0.0;
  std::size_t sample_size = 0;
  std::size_t repetitions = 0;
};

struct SweepOptions {
  std::vector<std::size_t> sizes;
  std::size_t repetitions = 1000;
  std::uint64_t seed = 0;
  /// 0 picks POLARITON_THREADS or the hardware concurrency. Results do not
  /// depend on this value.
  unsigned threads = 0;
  CumulantEstimator estimator = CumulantEstimator::unbiased;
};

/// 5..50 by 5, 60..100 by 10, 125..1000 by 25.
std::vector<std::size_t> default_sweep_sizes();

/// Worker count used when SweepOptions::threads is 0.
unsigned resolve_thread_count(unsigned requested);

struct SweepCurve {
  StateSpec state;
  double efficiency = 1.0;
  std::vector<CumulantEstimate> points;
};

/// Repetition r at size index i uses seed derive_seed(seed, i, r).
std::vector<CumulantEstimate> cumulant_sweep(const StateSpec& state, double efficiency,
                                             const SweepOptions& options);

enum class Statistic { kappa2, kappa4 };

std::string to_string(Statistic statistic);

struct DistinguishabilityReport {
  Statistic statistic = Statistic::kappa2;
  double k = 1.0;
  std::optional<std::size_t> min_samples;  // empty: not distinguished
  std::size_t largest_size = 0;
  SweepCurve curve_a;
  SweepCurve curve_b;

  bool distinguished() const { return min_samples.has_value(); }
};

/// Smallest size m with |mean_a - mean_b| >= k (stderr_a + stderr_b).
std::optional<std::size_t> separation_size(const SweepCurve& a, const SweepCurve& b,
                                           Statistic statistic, double k);

/// Both states are swept with the same master seed.
DistinguishabilityReport min_samples_to_distinguish(const StateSpec& state_a,
                                                    const StateSpec& state_b, double efficiency,
                                                    Statistic statistic, double k,
                                                    const SweepOptions& options);

struct NonClassicality {
  bool vogel = false;
  bool kot = false;
};

/// Purity thresholds for the CSS/polariton mixture: p > 0 and p > 1/2.
NonClassicality nonclassicality_class(double purity);

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
  double density = 0.0;
};

/// Bins are [lo + i w, lo + (i+1) w) with the last bin closed. Densities are
/// count / (N w) with N the total number of values, out-of-range included.
std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins, double lo,
                                    double hi);

// Serialization. CSV files start with a "# schema_version=1" line.
inline constexpr int kSchemaVersion = 1;

std::string format_double(double v);
void write_sweep_csv(std::ostream& out, const SweepCurve& curve);
nlohmann::json to_json(const SweepCurve& curve);
void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins);
void write_samples_csv(std::ostream& out, const SampleSet& samples);
nlohmann::json to_json(const DistinguishabilityReport& report);

}  // namespace polariton
