#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "polariton/error.hpp"
#include "polariton/quadrature.hpp"
#include "polariton/spin_states.hpp"

using namespace polariton;

namespace {

// Brute-force oracles in long double with exact integer binomials (Na <= 60).
long double binomial(int n, int k) {
  long double c = 1.0L;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

long double css_oracle(int na, int n) { return std::ldexp(binomial(na, n), -na); }

long double single_oracle(int na, int n) {
  const long double d = n - na / 2.0L;
  return css_oracle(na, n) * 4.0L / na * d * d;
}

// Convolution of the ideal x-units density with the vacuum Gaussian,
// evaluated by quadrature, independent of the closed-form mixture mapping.
double convolved_density(double weight, double efficiency, double x) {
  const double s = std::sqrt(efficiency);
  const double var = (1.0 - efficiency) / 2.0;
  const auto ideal = [&](double y) {
    return ((1.0 - weight) + weight * 2.0 * y * y) * std::exp(-y * y) / std::sqrt(std::numbers::pi);
  };
  return integrate(
      [&](double y) {
        const double r = x - s * y;
        return ideal(y) * std::exp(-r * r / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
      },
      -12.0, 12.0, 1e-12);
}

}  // namespace

TEST_CASE("css_pmf matches the binomial formula") {
  CHECK(css_pmf(2).probability(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(css_pmf(2).probability(0) == doctest::Approx(0.25).epsilon(1e-14));

  for (int na : {1, 3, 7, 20, 60}) {
    const auto pmf = css_pmf(na);
    for (int n = 0; n <= na; ++n) {
      CHECK(pmf.probability(n) == doctest::Approx(static_cast<double>(css_oracle(na, n))).epsilon(1e-12));
    }
  }
}

TEST_CASE("css_pmf is finite and peaked correctly at large Na") {
  const auto pmf = css_pmf(100000);
  const double peak = pmf.probability(50000);
  // Central binomial term: sqrt(2/(pi Na)) (1 - 1/(4 Na) + ...).
  CHECK(peak == doctest::Approx(std::sqrt(2.0 / (std::numbers::pi * 100000.0))).epsilon(1e-5));
  CHECK(peak == doctest::Approx(2.523e-3).epsilon(1e-3));
  const auto big = css_pmf(1000000);
  CHECK(std::isfinite(big.log_probability(500000)));
  CHECK(std::abs(big.log_total()) < 1e-12);
}

TEST_CASE("single_polariton_pmf matches the overlap formula") {
  const auto two = single_polariton_pmf(2);
  CHECK(two.probability(1) == 0.0);
  CHECK(two.log_probability(1) == -std::numeric_limits<double>::infinity());
  CHECK(two.probability(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(two.probability(2) == doctest::Approx(0.5).epsilon(1e-14));

  const auto four = single_polariton_pmf(4);
  const double expected[] = {0.25, 0.25, 0.0, 0.25, 0.25};
  for (int n = 0; n <= 4; ++n) {
    CHECK(four.probability(n) == doctest::Approx(expected[n]).epsilon(1e-14));
  }

  const auto one = single_polariton_pmf(1);
  CHECK(one.probability(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(one.probability(1) == doctest::Approx(0.5).epsilon(1e-14));

  for (int na : {3, 9, 30, 60}) {
    const auto pmf = single_polariton_pmf(na);
    for (int n = 0; n <= na; ++n) {
      CHECK(pmf.probability(n) ==
            doctest::Approx(static_cast<double>(single_oracle(na, n))).epsilon(1e-12));
    }
  }
}

TEST_CASE("raw overlap formulas are normalized before any rescaling") {
  for (int na : {1, 2, 3, 4, 10, 40, 60}) {
    long double s0 = 0.0L;
    long double s1 = 0.0L;
    for (int n = 0; n <= na; ++n) {
      s0 += css_oracle(na, n);
      s1 += single_oracle(na, n);
    }
    CHECK(static_cast<double>(std::abs(s0 - 1.0L)) < 1e-15);
    CHECK(static_cast<double>(std::abs(s1 - 1.0L)) < 1e-15);
  }
}

TEST_CASE("pmfs are normalized, bounded by one, and exactly symmetric") {
  for (std::int64_t na : {1, 2, 3, 4, 10, 100, 10000, 100000}) {
    for (const auto& pmf : {css_pmf(na), single_polariton_pmf(na), mixture_pmf(na, 0.715)}) {
      CHECK(std::abs(std::expm1(pmf.log_total())) < 1e-12);
      for (std::int64_t n = 0; n <= na; ++n) {
        REQUIRE(pmf.log_probability(n) <= 0.0);
        REQUIRE(pmf.log_probability(n) == pmf.log_probability(na - n));
      }
    }
    if (na % 2 == 0) {
      CHECK(single_polariton_pmf(na).probability(na / 2) == 0.0);
    }
  }
}

TEST_CASE("mixture_pmf is the convex combination") {
  const std::int64_t na = 40;
  const auto css = css_pmf(na);
  const auto single = single_polariton_pmf(na);
  const auto zero = mixture_pmf(na, 0.0);
  const auto one = mixture_pmf(na, 1.0);
  for (std::int64_t n = 0; n <= na; ++n) {
    CHECK(zero.log_probability(n) == css.log_probability(n));
    CHECK(one.log_probability(n) == single.log_probability(n));
  }
  CHECK(mixture_pmf(4, 0.5).probability(2) == doctest::Approx(0.1875).epsilon(1e-14));

  const auto mix = mixture_pmf(na, 0.3);
  for (std::int64_t n = 0; n <= na; ++n) {
    CHECK(mix.probability(n) ==
          doctest::Approx(0.3 * single.probability(n) + 0.7 * css.probability(n)).epsilon(1e-13));
  }

  CHECK_THROWS_AS(mixture_pmf(4, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(mixture_pmf(4, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(css_pmf(0), std::invalid_argument);
  CHECK_THROWS_AS(single_polariton_pmf(0), std::invalid_argument);
}

TEST_CASE("n_to_x and x_to_n") {
  CHECK(n_to_x(2, 1) == 0.0);
  CHECK(n_to_x(8, 6) == 1.0);
  CHECK(n_to_x(100000, 50100) == doctest::Approx(std::sqrt(2.0 / 100000.0) * 100.0).epsilon(1e-15));
  CHECK(n_to_x(100000, 50100) == doctest::Approx(0.4472).epsilon(1e-4));
  CHECK(x_to_n(100000, n_to_x(100000, 50100)) == 50100);

  for (std::int64_t na : {1, 2, 7, 1000, 100001}) {
    for (std::int64_t n = 0; n <= na; n += 1 + na / 97) {
      REQUIRE(x_to_n(na, n_to_x(na, n)) == n);
    }
  }
  CHECK_THROWS_AS(n_to_x(4, 5), std::invalid_argument);
  CHECK_THROWS_AS(n_to_x(4, -1), std::invalid_argument);
  CHECK_THROWS_AS(x_to_n(4, 100.0), std::invalid_argument);
}

TEST_CASE("asymptotic forms") {
  CHECK(asymptotic_density(StateSpec::single_polariton(), 0.0) == 0.0);
  CHECK(asymptotic_density(StateSpec::css(), 0.0) ==
        doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-15));
  CHECK(asymptotic_density(StateSpec::css(), 0.0) == doctest::Approx(0.5642).epsilon(1e-4));
  CHECK(asymptotic_pmf(StateSpec::css(), 100000, 0.0) ==
        doctest::Approx(std::sqrt(2.0 / (std::numbers::pi * 100000.0))).epsilon(1e-15));

  // Normalization of the x-units densities.
  for (double w : {0.0, 0.3, 1.0}) {
    const auto state = StateSpec::mixture(w);
    CHECK(integrate([&](double x) { return asymptotic_density(state, x); }, -12, 12) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("exact pmf converges to the asymptotic density") {
  const auto sup_distance = [](std::int64_t na, const StateSpec& state, double x_max) {
    const auto pmf = state_pmf(na, state);
    double worst = 0.0;
    for (std::int64_t n = 0; n <= na; ++n) {
      const double x = n_to_x(na, n);
      if (std::abs(x) > x_max) continue;
      const double scaled = pmf.probability(n) * std::sqrt(static_cast<double>(na) / 2.0);
      worst = std::max(worst, std::abs(scaled - asymptotic_density(state, x)));
    }
    return worst;
  };

  for (const auto& state : {StateSpec::css(), StateSpec::single_polariton()}) {
    const double d2 = sup_distance(100, state, 1e9);
    const double d3 = sup_distance(1000, state, 1e9);
    const double d4 = sup_distance(10000, state, 1e9);
    CHECK(d3 < d2);
    CHECK(d4 < d3);

    // Relative to the peak density over |x| <= 3.
    const auto pmf = state_pmf(10000, state);
    double peak = 0.0;
    double worst = 0.0;
    double worst_pointwise = 0.0;
    for (std::int64_t n = 0; n <= 10000; ++n) {
      const double x = n_to_x(10000, n);
      const double a = asymptotic_pmf(state, 10000, x);
      peak = std::max(peak, a);
      if (std::abs(x) <= 3.0) worst = std::max(worst, std::abs(pmf.probability(n) - a));
      if (std::abs(x) <= 2.0 && a > 0.0) {
        worst_pointwise = std::max(worst_pointwise, std::abs(pmf.probability(n) / a - 1.0));
      }
    }
    CHECK(worst / peak < 1e-3);
    CHECK(worst_pointwise < 1e-3);
  }
}

TEST_CASE("apply_efficiency matches the quadrature convolution") {
  for (double w : {0.0, 0.715, 1.0}) {
    for (double eff : {0.1, 0.5, 0.65, 0.9}) {
      const auto m = apply_efficiency(StateSpec::mixture(w), eff);
      for (double x : {-3.1, -1.0, 0.0, 0.4, 1.7, 2.5}) {
        CHECK(m.density(x) == doctest::Approx(convolved_density(w, eff, x)).epsilon(1e-9));
      }
    }
  }

  // eff = 1 is the ideal density; eff = 0 is the vacuum Gaussian.
  const auto ideal = apply_efficiency(StateSpec::single_polariton(), 1.0);
  const auto vac = apply_efficiency(StateSpec::single_polariton(), 0.0);
  for (double x : {-2.0, 0.0, 0.3, 1.5}) {
    CHECK(ideal.density(x) == doctest::Approx(asymptotic_density(StateSpec::single_polariton(), x)));
    CHECK(vac.density(x) == doctest::Approx(asymptotic_density(StateSpec::css(), x)));
  }
  const auto vm = marginal_moments(vac);
  CHECK(vm.kappa2 == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::abs(vm.kappa4) < 1e-10);

  CHECK_THROWS_AS(apply_efficiency(StateSpec::css(), 1.2), std::invalid_argument);
  CHECK_THROWS_AS(apply_efficiency(StateSpec::css(), -0.01), std::invalid_argument);
}

TEST_CASE("cdf is the integral of the density") {
  for (double w : {0.0, 0.465, 1.0}) {
    const auto m = apply_efficiency(StateSpec::mixture(w), 1.0);
    for (double x : {-4.0, -1.3, 0.0, 0.2, 2.2}) {
      const double q = integrate([&](double t) { return m.density(t); }, -12.0, x);
      CHECK(m.cdf(x) == doctest::Approx(q).epsilon(1e-12));
    }
  }
}

TEST_CASE("continuous marginals are normalized and even") {
  for (double w : {0.0, 0.25, 0.715, 1.0}) {
    for (double eff : {0.0, 0.3, 0.65, 1.0}) {
      const auto m = apply_efficiency(StateSpec::mixture(w), eff);
      CHECK(integrate([&](double x) { return m.density(x); }, -12, 12) ==
            doctest::Approx(1.0).epsilon(1e-9));
      for (double x : {0.1, 0.9, 2.3}) CHECK(m.density(x) == m.density(-x));
    }
  }
}

TEST_CASE("moments of the ideal and degraded marginals") {
  const auto css = marginal_moments(apply_efficiency(StateSpec::css(), 1.0));
  CHECK(css.kappa2 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(css.kappa4) < 1e-12);

  const auto single = marginal_moments(apply_efficiency(StateSpec::single_polariton(), 1.0));
  CHECK(std::abs(single.kappa2 - 1.5) < 1e-8);
  CHECK(std::abs(single.mu4 - 3.75) < 1e-8);
  CHECK(std::abs(single.kappa4 + 3.0) < 1e-8);
  CHECK(std::abs(single.mean) < 1e-14);

  for (double p : {0.0, 0.25, 0.5, 0.715, 1.0}) {
    for (double eff : {0.1, 0.5, 1.0}) {
      const auto m = marginal_moments(apply_efficiency(StateSpec::mixture(p), eff));
      CHECK(std::abs(m.kappa2 - (0.5 + p * eff)) < 1e-6);
      CHECK(std::abs(m.kappa4 + 3.0 * p * p * eff * eff) < 1e-6);
      const auto c = closed_form_moments(StateSpec::mixture(p), eff);
      CHECK(std::abs(m.kappa4 - c.kappa4) < 1e-6);
    }
  }
}

TEST_CASE("efficiency scales kappa4 by eff^2 and sets variance 1/2 + eff") {
  const auto ideal = marginal_moments(apply_efficiency(StateSpec::single_polariton(), 1.0));
  for (double eff : {0.25, 0.5, 0.75}) {
    const auto m = marginal_moments(apply_efficiency(StateSpec::single_polariton(), eff));
    CHECK(std::abs(m.kappa4 - eff * eff * ideal.kappa4) < 1e-6);
    CHECK(std::abs(m.kappa2 - (0.5 + eff)) < 1e-6);
  }
}

TEST_CASE("discrete moments") {
  // Finite-Na x-units moments: CSS variance is exactly 1/2; the polariton
  // variance is 2 E_css[x^4] = 3/2 - 1/Na.
  for (std::int64_t na : {2, 10, 1000}) {
    const auto css = marginal_moments(css_pmf(na));
    CHECK(css.mu2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(css.mean) < 1e-13);
    const auto single = marginal_moments(single_polariton_pmf(na));
    CHECK(single.mu2 == doctest::Approx(1.5 - 1.0 / static_cast<double>(na)).epsilon(1e-12));
  }

  // Brute-force oracle at Na = 10.
  long double m4 = 0.0L;
  for (int n = 0; n <= 10; ++n) {
    const long double x = (2.0L * n - 10.0L) / std::sqrt(20.0L);
    m4 += single_oracle(10, n) * x * x * x * x;
  }
  CHECK(marginal_moments(single_polariton_pmf(10)).mu4 ==
        doctest::Approx(static_cast<double>(m4)).epsilon(1e-12));

  // Raw moments combine convexly.
  for (std::int64_t na : {3, 10, 100}) {
    const auto a = marginal_moments(single_polariton_pmf(na));
    const auto b = marginal_moments(css_pmf(na));
    for (double p : {0.2, 0.715}) {
      const auto m = marginal_moments(mixture_pmf(na, p));
      CHECK(std::abs(m.raw2 - (p * a.raw2 + (1 - p) * b.raw2)) < 1e-10);
      CHECK(std::abs(m.raw4 - (p * a.raw4 + (1 - p) * b.raw4)) < 1e-10);
      CHECK(std::abs(m.mean) < 1e-10);
    }
  }

  std::vector<double> unnormalized(5, std::log(0.5));
  CHECK_THROWS_AS(marginal_moments(DiscreteMarginal(4, unnormalized)), InvalidState);
}

TEST_CASE("json serialization keeps the zero sentinel") {
  const auto pmf = single_polariton_pmf(6);
  const auto j = to_json(pmf);
  CHECK(j["convention"] == "n-units");
  CHECK(j["log_pmf"][3].is_null());
  const auto back = discrete_marginal_from_json(nlohmann::json::parse(j.dump()));
  for (std::int64_t n = 0; n <= 6; ++n) CHECK(back.log_probability(n) == pmf.log_probability(n));

  const auto jx = to_json(pmf, Convention::x_units);
  CHECK(jx["convention"] == "x-units");
  const auto back_x = discrete_marginal_from_json(jx);
  for (std::int64_t n = 0; n <= 6; ++n) {
    CHECK(back_x.probability(n) == doctest::Approx(pmf.probability(n)).epsilon(1e-14));
  }
}
