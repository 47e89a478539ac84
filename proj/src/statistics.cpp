#include "polariton/statistics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

#include "polariton/random.hpp"

namespace polariton {

namespace {

double polariton_draw(Rng& rng) {
  const double z = rng.standard_normal();
  const double g = rng.exponential() + 0.5 * z * z;
  const double r = std::sqrt(g);
  return rng.coin() ? r : -r;
}

double vacuum_draw(Rng& rng) { return std::sqrt(0.5) * rng.standard_normal(); }

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

SampleSet draw_samples(const StateSpec& state, double efficiency, std::size_t size,
                       std::uint64_t seed) {
  if (size == 0) throw std::invalid_argument("sample size must be >= 1");
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw std::invalid_argument("efficiency must lie in [0, 1]");
  }
  if (!(state.purity >= 0.0 && state.purity <= 1.0)) {
    throw std::invalid_argument("purity must lie in [0, 1]");
  }
  SampleSet out{{}, state, efficiency, seed, std::string(kGeneratorId)};
  out.values.reserve(size);
  Rng rng(seed);
  const double signal = std::sqrt(efficiency);
  const double noise = std::sqrt(1.0 - efficiency);
  for (std::size_t i = 0; i < size; ++i) {
    double y = 0.0;
    switch (state.kind) {
      case StateKind::css: y = vacuum_draw(rng); break;
      case StateKind::single_polariton: y = polariton_draw(rng); break;
      case StateKind::mixture:
        y = rng.bernoulli(state.purity) ? polariton_draw(rng) : vacuum_draw(rng);
        break;
    }
    out.values.push_back(efficiency < 1.0 ? signal * y + noise * vacuum_draw(rng) : y);
  }
  return out;
}

KStatistics k_statistics(std::span<const double> values, CumulantEstimator estimator) {
  const std::size_t count = values.size();
  const std::size_t needed = estimator == CumulantEstimator::unbiased ? 5 : 2;
  if (count < needed) {
    throw std::invalid_argument("k_statistics needs at least " + std::to_string(needed) +
                                " values, got " + std::to_string(count));
  }
  const double n = static_cast<double>(count);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d2 = (v - mean) * (v - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (estimator == CumulantEstimator::plug_in) return {m2, m4 - 3.0 * m2 * m2};
  const double k2 = n / (n - 1.0) * m2;
  const double k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) /
                    ((n - 1.0) * (n - 2.0) * (n - 3.0));
  return {k2, k4};
}

std::vector<std::size_t> default_sweep_sizes() {
  std::vector<std::size_t> sizes;
  for (std::size_t m = 5; m <= 50; m += 5) sizes.push_back(m);
  for (std::size_t m = 60; m <= 100; m += 10) sizes.push_back(m);
  for (std::size_t m = 125; m <= 1000; m += 25) sizes.push_back(m);
  return sizes;
}

unsigned resolve_thread_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("POLARITON_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<CumulantEstimate> cumulant_sweep(const StateSpec& state, double efficiency,
                                             const SweepOptions& options) {
  if (options.repetitions < 2) throw std::invalid_argument("repetitions must be >= 2");
  if (options.sizes.empty()) throw std::invalid_argument("sweep sizes must be nonempty");
  for (auto m : options.sizes) {
    if (m < 5) throw std::invalid_argument("sweep sizes must be >= 5");
  }
  const unsigned threads = resolve_thread_count(options.threads);
  std::vector<CumulantEstimate> out;
  out.reserve(options.sizes.size());
  std::vector<double> k2(options.repetitions);
  std::vector<double> k4(options.repetitions);
  for (std::size_t i = 0; i < options.sizes.size(); ++i) {
    const std::size_t size = options.sizes[i];
    parallel_for(options.repetitions, threads, [&](std::size_t r) {
      const auto samples = draw_samples(state, efficiency, size, derive_seed(options.seed, i, r));
      const auto ks = k_statistics(samples.values, options.estimator);
      k2[r] = ks.k2;
      k4[r] = ks.k4;
    });
    CumulantEstimate e;
    e.k2 = mean_of(k2);
    e.k4 = mean_of(k4);
    e.stderr_k2 = sd_of(k2, e.k2);
    e.stderr_k4 = sd_of(k4, e.k4);
    e.sample_size = size;
    e.repetitions = options.repetitions;
    out.push_back(e);
  }
  return out;
}

std::string to_string(Statistic statistic) {
  return statistic == Statistic::kappa2 ? "kappa2" : "kappa4";
}

std::optional<std::size_t> separation_size(const SweepCurve& a, const SweepCurve& b,
                                           Statistic statistic, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("separation multiple k must be > 0");
  if (a.points.size() != b.points.size()) {
    throw std::invalid_argument("curves must share the same size grid");
  }
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& pa = a.points[i];
    const auto& pb = b.points[i];
    if (pa.sample_size != pb.sample_size) {
      throw std::invalid_argument("curves must share the same size grid");
    }
    const bool k2 = statistic == Statistic::kappa2;
    const double gap = std::abs(k2 ? pa.k2 - pb.k2 : pa.k4 - pb.k4);
    const double spread = k2 ? pa.stderr_k2 + pb.stderr_k2 : pa.stderr_k4 + pb.stderr_k4;
    if (gap >= k * spread && gap > 0.0) return pa.sample_size;
  }
  return std::nullopt;
}

DistinguishabilityReport min_samples_to_distinguish(const StateSpec& state_a,
                                                    const StateSpec& state_b, double efficiency,
                                                    Statistic statistic, double k,
                                                    const SweepOptions& options) {
  if (!(k > 0.0)) throw std::invalid_argument("separation multiple k must be > 0");
  DistinguishabilityReport report;
  report.statistic = statistic;
  report.k = k;
  report.curve_a = {state_a, efficiency, cumulant_sweep(state_a, efficiency, options)};
  report.curve_b = {state_b, efficiency, cumulant_sweep(state_b, efficiency, options)};
  report.largest_size = *std::max_element(options.sizes.begin(), options.sizes.end());
  report.min_samples = separation_size(report.curve_a, report.curve_b, statistic, k);
  return report;
}

NonClassicality nonclassicality_class(double purity) {
  if (!(purity >= 0.0 && purity <= 1.0)) {
    throw std::invalid_argument("purity must lie in [0, 1]");
  }
  return {purity > 0.0, purity > 0.5};
}

std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins, double lo,
                                    double hi) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  if (!(lo < hi)) throw std::invalid_argument("histogram range needs lo < hi");
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].center = lo + (static_cast<double>(i) + 0.5) * width;
  }
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    auto idx = static_cast<std::size_t>((v - lo) / width);
    if (idx >= bins) idx = bins - 1;
    ++out[idx].count;
  }
  if (!values.empty()) {
    const double scale = 1.0 / (static_cast<double>(values.size()) * width);
    for (auto& b : out) b.density = static_cast<double>(b.count) * scale;
  }
  return out;
}

std::string format_double(double v) {
  // Shortest representation that reads back to the same double.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_sweep_csv(std::ostream& out, const SweepCurve& curve) {
  out << "# schema_version=" << kSchemaVersion << " state=" << to_string(curve.state.kind)
      << " purity=" << format_double(curve.state.purity)
      << " efficiency=" << format_double(curve.efficiency) << '\n';
  out << "size,mean_k2,std_k2,mean_k4,std_k4\n";
  for (const auto& p : curve.points) {
    out << p.sample_size << ',' << format_double(p.k2) << ',' << format_double(p.stderr_k2) << ','
        << format_double(p.k4) << ',' << format_double(p.stderr_k4) << '\n';
  }
}

nlohmann::json to_json(const SweepCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"size", p.sample_size},
                      {"mean_k2", p.k2},
                      {"std_k2", p.stderr_k2},
                      {"mean_k4", p.k4},
                      {"std_k4", p.stderr_k4},
                      {"repetitions", p.repetitions}});
  }
  return {{"schema_version", kSchemaVersion},
          {"state", to_string(curve.state.kind)},
          {"purity", curve.state.purity},
          {"efficiency", curve.efficiency},
          {"points", std::move(points)}};
}

void write_histogram_csv(std::ostream& out, std::span<const HistogramBin> bins) {
  out << "# schema_version=" << kSchemaVersion << '\n';
  out << "bin_center,count,density\n";
  for (const auto& b : bins) {
    out << format_double(b.center) << ',' << b.count << ',' << format_double(b.density) << '\n';
  }
}

void write_samples_csv(std::ostream& out, const SampleSet& samples) {
  out << "# schema_version=" << kSchemaVersion << " state=" << to_string(samples.state.kind)
      << " purity=" << format_double(samples.state.purity)
      << " efficiency=" << format_double(samples.efficiency) << " seed=" << samples.seed
      << " generator=" << samples.generator_id << '\n';
  out << "x\n";
  for (double v : samples.values) out << format_double(v) << '\n';
}

nlohmann::json to_json(const DistinguishabilityReport& report) {
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"statistic", to_string(report.statistic)},
                      {"k", report.k},
                      {"distinguished", report.distinguished()},
                      {"largest_size", report.largest_size},
                      {"curve_a", to_json(report.curve_a)},
                      {"curve_b", to_json(report.curve_b)}};
  j["min_samples"] = report.min_samples ? nlohmann::json(*report.min_samples) : nlohmann::json();
  return j;
}

}  // namespace polariton
