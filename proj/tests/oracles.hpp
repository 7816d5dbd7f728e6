#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "polyxport/vec.hpp"

namespace polyxport::testing {

/// Adaptive one-dimensional integral, independent of the library's own quadrature layouts.
inline double integrate_1d(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, tol);
}

/// Integral over the unit disk in polar coordinates centred at the origin.
inline double integrate_disk(const std::function<double(const Vec&)>& f, double tol = 1e-10) {
  return integrate_1d(
      [&](double rho) {
        if (rho == 0.0) return 0.0;
        return rho * integrate_1d(
                         [&](double phi) { return f(Vec{rho * std::cos(phi), rho * std::sin(phi)}); }, 0.0,
                         2.0 * std::numbers::pi, tol);
      },
      0.0, 1.0, tol);
}

/// Integral over the unit ball of dimension 1 (an interval) or 2 (a disk).
inline double integrate_ball(int dim, const std::function<double(const Vec&)>& f, double tol = 1e-10) {
  if (dim == 1) return integrate_1d([&](double w) { return f(Vec{w}); }, -1.0, 1.0, tol);
  return integrate_disk(f, tol);
}

/// Central finite difference with a Richardson step.
inline double derivative(const std::function<double(double)>& f, double x, double h) {
  const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
  const double d2 = (f(x + h / 2) - f(x - h / 2)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

}  // namespace polyxport::testing
