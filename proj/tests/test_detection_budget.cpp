#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "polariton/detection_budget.hpp"
#include "polariton/error.hpp"

using namespace polariton;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double total_probability(const ClickBudget& b) {
  double s = 0.0;
  for (const auto& [_, e] : b.per_source) s += e.probability;
  return s;
}

}  // namespace

TEST_CASE("calibrated budget reproduces the reference table") {
  const auto config = calibrated_budget_config();
  const auto budget = compute_click_budget(config);
  const auto table = reference_table();
  for (const auto& [source, p] : table) {
    CHECK(std::abs(budget.probability(source) - p) < 2e-3);
  }
  CHECK(std::abs(budget.purity - 0.715) < 5e-3);
  CHECK(purity_from_budget(budget) == budget.purity);
  // Fitted branching ratio stays close to the nominal factor of about 4.
  CHECK(config.branching_favor == doctest::Approx(3.74).epsilon(0.02));
  CHECK(config.dark_count_rate > 0.0);
  // The PBS-suppressed channel is computed but below the reporting cutoff.
  CHECK(budget.per_source.at(ClickSource::pi_polarized_decay).minor);
  CHECK(budget.per_source.at(ClickSource::pi_polarized_decay).probability > 0.0);
  CHECK_FALSE(budget.per_source.at(ClickSource::excitation_leakage).minor);
}

TEST_CASE("only branching survives without parasitic sources") {
  BudgetConfig c;
  c.dark_count_rate = 0.0;
  c.cavity_rejection = kInf;
  c.branching_favor = 4.0;
  const auto b = compute_click_budget(c);
  CHECK(b.probability(ClickSource::dark_count) == 0.0);
  CHECK(b.probability(ClickSource::excitation_leakage) == 0.0);
  CHECK(b.probability(ClickSource::wrong_decay_mF2) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(b.probability(ClickSource::desired_decay) == doctest::Approx(0.8).epsilon(1e-14));

  for (double r : {0.5, 3.74, 10.0}) {
    c.branching_favor = r;
    CHECK(compute_click_budget(c).purity == doctest::Approx(r / (r + 1.0)).epsilon(1e-15));
  }
}

TEST_CASE("dark counts alone") {
  BudgetConfig c;
  c.scatter_probability = 0.0;
  c.excitation_photons = 0.0;
  c.dark_count_rate = 50.0;
  const auto b = compute_click_budget(c);
  CHECK(b.probability(ClickSource::dark_count) == 1.0);
  CHECK(b.purity == 0.0);
}

TEST_CASE("no click source is an invalid state") {
  BudgetConfig c;
  c.scatter_probability = 0.0;
  c.excitation_photons = 0.0;
  c.dark_count_rate = 0.0;
  CHECK_THROWS_AS(compute_click_budget(c), InvalidState);
}

TEST_CASE("purity of simple budgets") {
  ClickBudget only;
  only.per_source[ClickSource::desired_decay] = {1.0, 1.0, false};
  CHECK(purity_from_budget(only) == 1.0);

  ClickBudget half;
  half.per_source[ClickSource::desired_decay] = {1.0, 0.5, false};
  half.per_source[ClickSource::dark_count] = {1.0, 0.5, false};
  CHECK(purity_from_budget(half) == 0.5);
}

TEST_CASE("budget invariants over a parameter grid") {
  const auto base = calibrated_budget_config();
  for (double dark : {0.0, 10.0, 115.0, 1000.0}) {
    for (double rej : {1e5, 5e7, kInf}) {
      for (double eff : {0.1, 0.5, 1.0}) {
        auto c = base;
        c.dark_count_rate = dark;
        c.cavity_rejection = rej;
        c.detector_efficiency = eff;
        const auto b = compute_click_budget(c);
        CHECK(std::abs(total_probability(b) - 1.0) < 1e-12);
        CHECK(b.purity == b.probability(ClickSource::desired_decay));
      }
    }
  }

  // Monotonicity.
  double previous = 2.0;
  for (double dark : {0.0, 1.0, 10.0, 100.0, 1000.0}) {
    auto c = base;
    c.dark_count_rate = dark;
    const double p = compute_click_budget(c).purity;
    CHECK(p < previous);
    previous = p;
  }
  previous = -1.0;
  for (double rej : {1e3, 1e5, 1e7, 1e9, kInf}) {
    auto c = base;
    c.cavity_rejection = rej;
    const double p = compute_click_budget(c).purity;
    CHECK(p >= previous);
    previous = p;
  }
}

TEST_CASE("scaling every source by a common factor leaves probabilities unchanged") {
  // Detector efficiency scales all photon channels, pulse duration the dark
  // counts; scaling both by the same factor scales every count.
  const auto base = calibrated_budget_config();
  auto scaled = base;
  scaled.detector_efficiency *= 0.37;
  scaled.pulse_duration *= 0.37;
  const auto a = compute_click_budget(base);
  const auto b = compute_click_budget(scaled);
  for (auto s : kAllSources) {
    CHECK(b.per_source.at(s).expected_clicks ==
          doctest::Approx(0.37 * a.per_source.at(s).expected_clicks).epsilon(1e-13));
    CHECK(b.probability(s) == doctest::Approx(a.probability(s)).epsilon(1e-13));
  }
}

TEST_CASE("calibrate_unknowns") {
  const auto calibrated = calibrated_budget_config();

  SUBCASE("dark counts and detector efficiency against the table") {
    auto start = calibrated;
    start.dark_count_rate = 400.0;
    start.detector_efficiency = 0.9;
    const auto result =
        calibrate_unknowns(start, {"dark_count_rate", "detector_efficiency"}, reference_table());
    CHECK(result.max_abs_residual < 2e-3);
    const auto b = compute_click_budget(result.config);
    for (const auto& [s, p] : reference_table()) CHECK(std::abs(b.probability(s) - p) < 2e-3);
  }

  SUBCASE("no unknowns on a self-consistent target is the identity") {
    const auto b = compute_click_budget(calibrated);
    std::map<ClickSource, double> target;
    for (const auto& [s, e] : b.per_source) target[s] = e.probability;
    const auto result = calibrate_unknowns(calibrated, {}, target);
    CHECK(result.max_abs_residual < 1e-15);
    CHECK(result.config.dark_count_rate == calibrated.dark_count_rate);
    CHECK(result.config.branching_favor == calibrated.branching_favor);
  }

  SUBCASE("unattainable purity fails with diagnostics") {
    // Branching caps purity at r/(r+1) = 0.8 whatever dark counts and
    // detector efficiency are.
    auto start = calibrated;
    start.branching_favor = 4.0;
    const std::map<ClickSource, double> target = {{ClickSource::desired_decay, 0.95},
                                                  {ClickSource::wrong_decay_mF2, 0.05}};
    try {
      calibrate_unknowns(start, {"dark_count_rate", "detector_efficiency"}, target);
      FAIL("expected CalibrationFailed");
    } catch (const CalibrationFailed& e) {
      CHECK(std::string(e.what()).find("desired_decay") != std::string::npos);
    }
  }

  SUBCASE("argument errors") {
    CHECK_THROWS_AS(calibrate_unknowns(calibrated, {"a", "b", "c"}, reference_table()),
                    std::invalid_argument);
    CHECK_THROWS_AS(calibrate_unknowns(calibrated, {"n_cavities"}, reference_table()),
                    std::invalid_argument);
    CHECK_THROWS_AS(calibrate_unknowns(calibrated, {"dark_count_rate"},
                                       {{ClickSource::desired_decay, 0.5}}),
                    std::invalid_argument);
  }
}

TEST_CASE("config validation") {
  BudgetConfig c;
  c.detector_efficiency = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.cavity_rejection = 0.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.dark_count_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.n_cavities = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("table and json output") {
  const auto b = compute_click_budget(calibrated_budget_config());
  const auto text = format_table(b);
  CHECK(text.find("Origin of photo-count") != std::string::npos);
  CHECK(text.find("Dark counts") != std::string::npos);
  CHECK(text.find("purity p = 0.71") != std::string::npos);
  const auto j = to_json(b);
  CHECK(j["schema_version"] == 1);
  CHECK(j["per_source"]["desired_decay"]["created_state"] == "|Psi1>");
  CHECK(j["purity"].get<double>() == b.purity);
}
