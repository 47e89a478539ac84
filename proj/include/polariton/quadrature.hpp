#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace polariton {

/// Adaptive 61-point Gauss-Kronrod integral of f over [a, b].
template <class F>
double integrate(F&& f, double a, double b, double tolerance = 1e-13) {
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, a, b, 20, tolerance, &error);
}

}  // namespace polariton
