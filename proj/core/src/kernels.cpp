#include "polyxport/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace polyxport {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

double integrate(auto&& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-12);
}

}  // namespace

double zeta_of_dim(int dim) {
  if (dim == 2) return kPi2 / 6.0;
  if (dim == 3) return kZeta3;
  throw std::invalid_argument("zeta_of_dim: dimension must be 2 or 3");
}

double unit_ball_volume(int dim) {
  if (dim == 2) return 2.0;
  if (dim == 3) return kPi;
  throw std::invalid_argument("unit_ball_volume: dimension must be 2 or 3");
}

double upsilon(double x) { return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : x); }

double phi0_2d(double xi, double w, double z) {
  if (!(xi > 0.0)) throw std::domain_error("phi0_2d: xi must be positive");
  const double num = 1.0 / xi - std::max(std::abs(w), std::abs(z)) - 1.0;
  const double den = std::abs(w + z);
  double arg;
  if (den == 0.0)
    arg = num >= 0.0 ? 1.0 : 0.0;
  else
    arg = 1.0 + num / den;
  return 6.0 / kPi2 * upsilon(arg);
}

double disk_cut_area(double t) {
  if (!(t >= 0.0) || t > 1.0 + 1e-12) throw std::domain_error("disk_cut_area: t must lie in [0, 1]");
  t = std::min(t, 1.0);
  return kPi - std::acos(t) + t * std::sqrt(1.0 - t * t);
}

double cut_area_integral(double w) {
  if (!(w >= 0.0) || w > 1.0 + 1e-12) throw std::domain_error("cut_area_integral: w must lie in [0, 1]");
  w = std::min(w, 1.0);
  const double inner = 1.0 - w;
  double total = 0.0;
  if (inner > 0.0) total += kPi * integrate([](double r) { return disk_cut_area(r / 2.0) * r; }, 0.0, inner);
  if (w > 0.0) {
    // r = 1 - w cos(theta) removes the square-root endpoint behaviour of the arccos factor.
    auto f = [w](double theta) {
      const double r = 1.0 - w * std::cos(theta);
      if (r <= 0.0) return 0.0;
      const double c = std::clamp((w * w + r * r - 1.0) / (2.0 * w * r), -1.0, 1.0);
      return disk_cut_area(std::min(r / 2.0, 1.0)) * std::acos(c) * r * w * std::sin(theta);
    };
    total += integrate(f, 0.0, kPi);
  }
  return total;
}

double phi0_3d(double xi, const Vec& w, const Vec& z) {
  if (!(xi > 0.0)) throw std::domain_error("phi0_3d: xi must be positive");
  if (xi > 0.25 * (1.0 + 1e-12)) throw std::domain_error("phi0_3d: xi beyond the explicit range 1/4");
  const double t = (w - z).norm() / 2.0;
  return (1.0 - 6.0 / kPi2 * disk_cut_area(t) * xi) / kZeta3;
}

// --- KernelModel -----------------------------------------------------------

KernelModel::KernelModel(KernelMedium medium, int dim)
    : medium_(medium), dim_(dim), sigma_bar_(unit_ball_volume(dim)), zeta_(zeta_of_dim(dim)) {}

KernelModel KernelModel::crystal(int dim) {
  if (dim == 2) return KernelModel(KernelMedium::crystal2d, 2);
  if (dim == 3) return KernelModel(KernelMedium::crystal3d, 3);
  throw std::invalid_argument("KernelModel: dimension must be 2 or 3");
}

KernelModel KernelModel::poisson(int dim) { return KernelModel(KernelMedium::poisson, dim); }

double KernelModel::max_xi() const {
  switch (medium_) {
    case KernelMedium::crystal2d: return 0.5;
    case KernelMedium::crystal3d: return 0.25;
    default: return std::numeric_limits<double>::infinity();
  }
}

void KernelModel::check_xi(double xi) const {
  if (!(xi >= 0.0)) throw std::domain_error("KernelModel: xi must be non-negative");
  if (xi > max_xi() * (1.0 + 1e-12))
    throw std::domain_error("KernelModel: xi = " + std::to_string(xi) + " beyond the explicit range " +
                            std::to_string(max_xi()));
}

void KernelModel::check_param(const Vec& w) const {
  if (w.dim() != dim_ - 1) throw std::invalid_argument("KernelModel: parameter must have dimension d-1");
  if (w.norm2() > 1.0 + 1e-12) throw std::domain_error("KernelModel: parameter outside the unit ball");
}

double KernelModel::transition_density(double xi, const Vec& w, const Vec& z) const {
  check_xi(xi);
  check_param(w);
  check_param(z);
  switch (medium_) {
    case KernelMedium::crystal2d: return 6.0 / kPi2;
    case KernelMedium::crystal3d:
      return (1.0 - 6.0 / kPi2 * disk_cut_area(std::min((w - z).norm() / 2.0, 1.0)) * xi) / kZeta3;
    default: return std::exp(-sigma_bar_ * xi);
  }
}

double KernelModel::exit_survival(double xi, const Vec& w) const {
  check_xi(xi);
  check_param(w);
  if (medium_ == KernelMedium::crystal3d) return exit_survival_from_cut(xi, cut_area_integral(std::min(w.norm(), 1.0)));
  if (medium_ == KernelMedium::crystal2d) return 1.0 - 12.0 / kPi2 * xi;
  return std::exp(-sigma_bar_ * xi);
}

double KernelModel::exit_path_density(double xi, const Vec& w) const {
  check_xi(xi);
  check_param(w);
  if (medium_ == KernelMedium::crystal3d) return exit_path_density_from_cut(xi, cut_area_integral(std::min(w.norm(), 1.0)));
  if (medium_ == KernelMedium::crystal2d) return 12.0 / kPi2;
  return sigma_bar_ * std::exp(-sigma_bar_ * xi);
}

double KernelModel::exit_survival_from_cut(double xi, double cut) const {
  if (medium_ != KernelMedium::crystal3d) throw std::logic_error("exit_survival_from_cut: d = 3 crystal only");
  check_xi(xi);
  return 1.0 - kPi / kZeta3 * xi + 6.0 * cut * xi * xi / (kPi2 * kZeta3);
}

double KernelModel::exit_path_density_from_cut(double xi, double cut) const {
  if (medium_ != KernelMedium::crystal3d) throw std::logic_error("exit_path_density_from_cut: d = 3 crystal only");
  check_xi(xi);
  return kPi / kZeta3 - 12.0 * cut * xi / (kPi2 * kZeta3);
}

double KernelModel::path_density(double xi) const {
  check_xi(xi);
  switch (medium_) {
    case KernelMedium::crystal2d: return 2.0 - 24.0 / kPi2 * xi;
    case KernelMedium::crystal3d:
      return kPi - kPi2 / kZeta3 * xi + (3.0 * kPi2 + 16.0) / (2.0 * kPi * kZeta3) * xi * xi;
    default: return sigma_bar_ * std::exp(-sigma_bar_ * xi);
  }
}

double KernelModel::survival(double xi) const {
  check_xi(xi);
  switch (medium_) {
    case KernelMedium::crystal2d: return 1.0 - 2.0 * xi + 12.0 / kPi2 * xi * xi;
    case KernelMedium::crystal3d:
      return 1.0 - kPi * xi + kPi2 / (2.0 * kZeta3) * xi * xi -
             (3.0 * kPi2 + 16.0) / (6.0 * kPi * kZeta3) * xi * xi * xi;
    default: return std::exp(-sigma_bar_ * xi);
  }
}

double KernelModel::tail_bound(double xi) const {
  if (!(xi >= 0.0)) throw std::domain_error("tail_bound: xi must be non-negative");
  return std::max(std::exp(-sigma_bar_ * xi / 2.0), std::exp(-zeta_ / 2.0));
}

}  // namespace polyxport
