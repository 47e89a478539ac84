// polariton: command-line front end.
//
//   marginal     exact pmf and readout density of a state
//   budget       photo-count origin table and purity
//   sample       seeded draws plus histogram
//   sweep        cumulant estimates versus sample size
//   distinguish  smallest sample size separating two states
//   noise-scan   simulate or ingest a variance scan and fit it
//
// Exit codes: 0 success, 1 computation failure, 2 usage or config error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polariton/config.hpp"
#include "polariton/detection_budget.hpp"
#include "polariton/error.hpp"
#include "polariton/noise_scaling.hpp"
#include "polariton/spin_states.hpp"
#include "polariton/statistics.hpp"

namespace fs = std::filesystem;
using namespace polariton;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string output_dir = ".";
  std::string format = "csv";
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct StateArgs {
  std::string kind = "mixture";
  double purity = 0.715;
  double efficiency = 1.0;

  StateSpec spec() const {
    if (kind == "css") return StateSpec::css();
    if (kind == "single") return StateSpec::single_polariton();
    return StateSpec::mixture(purity);
  }
};

void add_state_options(CLI::App* cmd, StateArgs& s, const std::string& prefix = "",
                       double default_eff = 1.0) {
  s.efficiency = default_eff;
  cmd->add_option("--" + prefix + "state", s.kind, "css, single or mixture")
      ->check(CLI::IsMember({"css", "single", "mixture"}))
      ->capture_default_str();
  cmd->add_option("--" + prefix + "purity", s.purity, "polariton weight of a mixture")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  if (prefix.empty()) {
    cmd->add_option("--efficiency", s.efficiency, "readout efficiency")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }
}

fs::path output_path(const Globals& g, const std::string& stem) {
  fs::create_directories(g.output_dir);
  return fs::path(g.output_dir) / (stem + "." + g.format);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string header(const std::string& extra = "") {
  std::string h = "# schema_version=" + std::to_string(kSchemaVersion);
  if (!extra.empty()) h += " " + extra;
  return h + "\n";
}

void print_cumulants(const Moments& m) {
  std::printf("kappa2 = %.10g\nkappa4 = %.10g\n", m.kappa2, m.kappa4);
}

// marginal ------------------------------------------------------------------

struct MarginalArgs {
  StateArgs state;
  std::optional<std::int64_t> n_atoms;
  bool x_units = false;
  double x_max = 6.0;
  std::size_t points = 601;
};

int run_marginal(const Globals& g, const MarginalArgs& a) {
  const StateSpec spec = a.state.spec();
  const std::string meta = "state=" + std::string(to_string(spec.kind)) +
                           " purity=" + format_double(spec.purity) +
                           " efficiency=" + format_double(a.state.efficiency);
  std::optional<Moments> moments;

  if (a.n_atoms) {
    if (a.state.efficiency != 1.0) {
      throw UsageError("--na gives the ideal pmf; a finite --efficiency applies to the x-units "
                       "density only (drop --na)");
    }
    const auto pmf = state_pmf(*a.n_atoms, spec);
    const auto path = output_path(g, "marginal_pmf");
    if (g.format == "json") {
      auto j = to_json(pmf, a.x_units ? Convention::x_units : Convention::n_units);
      j["schema_version"] = kSchemaVersion;
      write_json(path, j);
    } else {
      std::string text = header(meta + " n_atoms=" + std::to_string(*a.n_atoms));
      text += "n,x,probability,log_probability\n";
      for (std::int64_t n = 0; n <= *a.n_atoms; ++n) {
        text += std::to_string(n) + "," + format_double(n_to_x(*a.n_atoms, n)) + "," +
                format_double(pmf.probability(n)) + "," + format_double(pmf.log_probability(n)) +
                "\n";
      }
      write_text(path, text);
    }
    if (*a.n_atoms <= 32) {
      std::printf("pmf =");
      for (std::int64_t n = 0; n <= *a.n_atoms; ++n) std::printf(" %.10g", pmf.probability(n));
      std::printf("\n");
    }
    moments = marginal_moments(pmf);
  }

  if (a.x_units || !a.n_atoms) {
    if (a.points < 2 || !(a.x_max > 0.0)) throw UsageError("need --points >= 2 and --x-max > 0");
    const auto m = apply_efficiency(spec, a.state.efficiency);
    std::vector<double> xs(a.points);
    for (std::size_t i = 0; i < a.points; ++i) {
      xs[i] = -a.x_max + 2.0 * a.x_max * static_cast<double>(i) / static_cast<double>(a.points - 1);
    }
    const auto path = output_path(g, "marginal_density");
    if (g.format == "json") {
      nlohmann::json rows = nlohmann::json::array();
      for (double x : xs) rows.push_back({{"x", x}, {"density", m.density(x)}, {"cdf", m.cdf(x)}});
      write_json(path, {{"schema_version", kSchemaVersion},
                        {"state", to_string(spec.kind)},
                        {"purity", spec.purity},
                        {"efficiency", a.state.efficiency},
                        {"points", rows}});
    } else {
      std::string text = header(meta) + "x,density,cdf\n";
      for (double x : xs) {
        text += format_double(x) + "," + format_double(m.density(x)) + "," + format_double(m.cdf(x)) +
                "\n";
      }
      write_text(path, text);
    }
    if (!moments) moments = marginal_moments(m);
  }
  print_cumulants(*moments);
  return 0;
}

// budget --------------------------------------------------------------------

struct BudgetArgs {
  std::string config;
  std::optional<double> dark_rate;
  std::vector<std::string> calibrate;
};

int run_budget(const Globals& g, const BudgetArgs& a) {
  BudgetConfig config = a.config.empty() ? calibrated_budget_config()
                                         : budget_config_from(KeyValueConfig::load(a.config));
  if (a.dark_rate) {
    config.dark_count_rate = *a.dark_rate;
    try {
      config.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  nlohmann::json calibration;
  if (!a.calibrate.empty()) {
    const auto result = calibrate_unknowns(config, a.calibrate, reference_table());
    config = result.config;
    calibration = {{"fields", a.calibrate},
                   {"max_abs_residual", result.max_abs_residual},
                   {"iterations", result.iterations}};
    for (const auto& f : a.calibrate) {
      std::printf("calibrated %s = %.10g\n", f.c_str(), get_field(config, f));
    }
  }
  const auto budget = compute_click_budget(config);
  std::printf("%s", format_table(budget).c_str());

  const auto path = output_path(g, "budget");
  if (g.format == "json") {
    auto j = to_json(budget);
    j["config"] = to_json(config);
    if (!calibration.is_null()) j["calibration"] = calibration;
    write_json(path, j);
  } else {
    std::string text = header() + "source,origin,created_state,expected_clicks,probability,minor\n";
    for (auto s : kAllSources) {
      const auto& e = budget.per_source.at(s);
      text += std::string(to_string(s)) + ",\"" + std::string(origin_label(s)) + "\"," +
              std::string(created_state(s)) + "," + format_double(e.expected_clicks) + "," +
              format_double(e.probability) + "," + (e.minor ? "1" : "0") + "\n";
    }
    write_text(path, text);
  }
  return 0;
}

// sample --------------------------------------------------------------------

struct SampleArgs {
  StateArgs state;
  std::size_t size = 1000;
  std::size_t bins = 41;
  double range = 4.0;
};

int run_sample(const Globals& g, const SampleArgs& a) {
  const auto samples = draw_samples(a.state.spec(), a.state.efficiency, a.size, g.seed);
  const auto bins = histogram(samples.values, a.bins, -a.range, a.range);
  if (g.format == "json") {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& b : bins) {
      hist.push_back({{"bin_center", b.center}, {"count", b.count}, {"density", b.density}});
    }
    const nlohmann::json meta = {{"schema_version", kSchemaVersion},
                                 {"state", to_string(samples.state.kind)},
                                 {"purity", samples.state.purity},
                                 {"efficiency", samples.efficiency},
                                 {"seed", samples.seed},
                                 {"generator", samples.generator_id}};
    auto sj = meta;
    sj["values"] = samples.values;
    auto hj = meta;
    hj["bins"] = hist;
    write_json(output_path(g, "samples"), sj);
    write_json(output_path(g, "histogram"), hj);
  } else {
    std::ostringstream s;
    write_samples_csv(s, samples);
    write_text(output_path(g, "samples"), s.str());
    std::ostringstream h;
    write_histogram_csv(h, bins);
    write_text(output_path(g, "histogram"), h.str());
  }
  if (a.size >= 5) {
    const auto ks = k_statistics(samples.values);
    std::printf("k2 = %.10g\nk4 = %.10g\n", ks.k2, ks.k4);
  }
  return 0;
}

// sweep / distinguish --------------------------------------------------------

struct SweepArgs {
  StateArgs state;
  std::vector<std::size_t> sizes;
  std::size_t repetitions = 1000;
  std::string estimator = "unbiased";
};

SweepOptions sweep_options(const Globals& g, const std::vector<std::size_t>& sizes,
                           std::size_t repetitions, const std::string& estimator) {
  SweepOptions o;
  o.sizes = sizes.empty() ? default_sweep_sizes() : sizes;
  o.repetitions = repetitions;
  o.seed = g.seed;
  o.threads = g.threads;
  o.estimator = estimator == "plug-in" ? CumulantEstimator::plug_in : CumulantEstimator::unbiased;
  return o;
}

void write_curve(const Globals& g, const std::string& stem, const SweepCurve& curve) {
  if (g.format == "json") {
    write_json(output_path(g, stem), to_json(curve));
  } else {
    std::ostringstream s;
    write_sweep_csv(s, curve);
    write_text(output_path(g, stem), s.str());
  }
}

int run_sweep(const Globals& g, const SweepArgs& a) {
  const auto options = sweep_options(g, a.sizes, a.repetitions, a.estimator);
  SweepCurve curve{a.state.spec(), a.state.efficiency,
                   cumulant_sweep(a.state.spec(), a.state.efficiency, options)};
  write_curve(g, "sweep", curve);
  const auto& last = curve.points.back();
  std::printf("size %zu: k2 = %.6g +- %.3g, k4 = %.6g +- %.3g\n", last.sample_size, last.k2,
              last.stderr_k2, last.k4, last.stderr_k4);
  return 0;
}

struct DistinguishArgs {
  StateArgs a;
  StateArgs b;
  std::vector<std::size_t> sizes;
  std::size_t repetitions = 1000;
  std::string statistic = "both";
  double k = 1.0;
};

int run_distinguish(const Globals& g, const DistinguishArgs& d) {
  const auto options = sweep_options(g, d.sizes, d.repetitions, "unbiased");
  const double eff = d.a.efficiency;
  // One pair of sweeps serves both statistics.
  const auto report = min_samples_to_distinguish(d.a.spec(), d.b.spec(), eff, Statistic::kappa2,
                                                 d.k, options);
  nlohmann::json out = {{"schema_version", kSchemaVersion},
                        {"k", d.k},
                        {"efficiency", eff},
                        {"seed", g.seed},
                        {"repetitions", d.repetitions},
                        {"largest_size", report.largest_size}};
  for (Statistic s : {Statistic::kappa2, Statistic::kappa4}) {
    const std::string name = to_string(s);
    if (d.statistic != "both" && d.statistic != name) continue;
    const auto m = separation_size(report.curve_a, report.curve_b, s, d.k);
    out["min_samples"][name] = m ? nlohmann::json(*m) : nlohmann::json();
    if (m) {
      std::printf("min_samples[%s] = %zu\n", name.c_str(), *m);
    } else {
      std::printf("min_samples[%s] = none (not separated up to %zu)\n", name.c_str(),
                  report.largest_size);
    }
  }
  write_curve(g, "sweep_a", report.curve_a);
  write_curve(g, "sweep_b", report.curve_b);
  write_json(fs::path(g.output_dir) / "distinguish.json", out);
  return 0;
}

// noise-scan ------------------------------------------------------------------

struct NoiseArgs {
  std::string config;
  std::string input;
  std::string mode = "non-negative";
};

int run_noise_scan(const Globals& g, const NoiseArgs& a) {
  std::vector<ScanPoint> scan;
  if (!a.input.empty()) {
    std::ifstream in(a.input);
    if (!in) throw ConfigError("cannot open scan file '" + a.input + "'");
    bool has_std_error = false;
    try {
      scan = read_scan_csv(in, has_std_error);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("bad scan file: ") + e.what());
    }
    if (!has_std_error) {
      std::fprintf(stderr,
                   "warning: no stderr column; fitting unweighted and scaling the covariance "
                   "by the residual variance\n");
    }
  } else {
    const auto config = a.config.empty() ? reference_noise_config()
                                         : noise_config_from(KeyValueConfig::load(a.config));
    scan = simulate_noise_scan(config, g.seed);
  }
  const auto fit =
      fit_quadratic(scan, a.mode == "unconstrained" ? FitMode::unconstrained : FitMode::non_negative);
  const double top = scan.back().n_atoms;
  const double eff = tomography_efficiency(fit.evaluate(top), fit.evaluate(0.0));

  auto j = to_json(fit, scan);
  j["efficiency"] = eff;
  j["efficiency_at_n_atoms"] = top;
  fs::create_directories(g.output_dir);
  write_json(fs::path(g.output_dir) / "fit.json", j);
  if (g.format == "json") {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : scan) {
      pts.push_back({{"na", p.n_atoms}, {"variance", p.variance}, {"stderr", p.std_error}});
    }
    write_json(output_path(g, "scan"), {{"schema_version", kSchemaVersion}, {"points", pts}});
  } else {
    std::ostringstream s;
    write_scan_csv(s, scan);
    write_text(output_path(g, "scan"), s.str());
  }
  std::printf("c0 = %.6g\nc1 = %.6g\nc2 = %.6g\n", fit.c0(), fit.c1(), fit.c2());
  if (fit.any_clipped()) std::printf("note: coefficients held at zero by the constraint\n");
  std::printf("efficiency = %.6g (at Na = %.6g)\n", eff, top);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heralded spin-polariton tomography toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--output-dir", g.output_dir, "directory for all output files")->capture_default_str();
  app.add_option("--format", g.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0: POLARITON_THREADS or all cores)")
      ->capture_default_str();

  MarginalArgs marginal;
  auto* cm = app.add_subcommand("marginal", "exact pmf and x-units density");
  add_state_options(cm, marginal.state);
  cm->add_option("--na", marginal.n_atoms, "atom number for the exact pmf")->check(CLI::PositiveNumber);
  cm->add_flag("--x-units", marginal.x_units, "x-units pmf convention and readout density");
  cm->add_option("--x-max", marginal.x_max, "density grid half width")->capture_default_str();
  cm->add_option("--points", marginal.points, "density grid points")->capture_default_str();

  BudgetArgs budget;
  auto* cb = app.add_subcommand("budget", "photo-count origin table");
  cb->add_option("--config", budget.config, "budget config file (default: calibrated reference)");
  cb->add_option("--dark-rate", budget.dark_rate, "override dark_count_rate [1/s]");
  cb->add_option("--calibrate", budget.calibrate, "fit up to two fields to the reference table")
      ->expected(1, 2);

  SampleArgs sample;
  auto* cs = app.add_subcommand("sample", "seeded draws and histogram");
  add_state_options(cs, sample.state);
  cs->add_option("--size", sample.size, "number of draws")->capture_default_str();
  cs->add_option("--bins", sample.bins, "histogram bins")->capture_default_str();
  cs->add_option("--range", sample.range, "histogram half width")->capture_default_str();

  SweepArgs sweep;
  auto* cw = app.add_subcommand("sweep", "cumulant estimates versus sample size");
  add_state_options(cw, sweep.state, "", reference_efficiency());
  cw->add_option("--sizes", sweep.sizes, "sample sizes (default 5..1000 grid)")->delimiter(',');
  cw->add_option("--repetitions", sweep.repetitions)->capture_default_str();
  cw->add_option("--estimator", sweep.estimator)
      ->check(CLI::IsMember({"unbiased", "plug-in"}))
      ->capture_default_str();

  DistinguishArgs dist;
  dist.b.kind = "css";
  auto* cd = app.add_subcommand("distinguish", "smallest sample size separating two states");
  add_state_options(cd, dist.a, "", reference_efficiency());
  add_state_options(cd, dist.b, "against-");
  cd->add_option("--sizes", dist.sizes, "sample sizes (default 5..1000 grid)")->delimiter(',');
  cd->add_option("--repetitions", dist.repetitions)->capture_default_str();
  cd->add_option("--statistic", dist.statistic, "kappa2, kappa4 or both")
      ->check(CLI::IsMember({"kappa2", "kappa4", "both"}))
      ->capture_default_str();
  cd->add_option("-k", dist.k, "separation in units of summed standard deviations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  NoiseArgs noise;
  auto* cn = app.add_subcommand("noise-scan", "fit variance versus atom number");
  auto* nc = cn->add_option("--config", noise.config, "scan config (default: reference scan)");
  cn->add_option("--input", noise.input, "measured scan CSV (na,variance[,stderr])")->excludes(nc);
  cn->add_option("--mode", noise.mode)
      ->check(CLI::IsMember({"non-negative", "unconstrained"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cm) return run_marginal(g, marginal);
    if (*cb) return run_budget(g, budget);
    if (*cs) return run_sample(g, sample);
    if (*cw) return run_sweep(g, sweep);
    if (*cd) return run_distinguish(g, dist);
    if (*cn) return run_noise_scan(g, noise);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
