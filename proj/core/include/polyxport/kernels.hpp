#pragma once

#include <numbers>

#include "polyxport/vec.hpp"

namespace polyxport {

inline constexpr double kZeta3 = 1.2020569031595942854;

/// Riemann zeta at d = 2 or 3.
double zeta_of_dim(int dim);
/// Volume of the unit (d-1)-ball: 2 for d = 2, pi for d = 3.
double unit_ball_volume(int dim);

/// Clamp of x to [0, 1].
double upsilon(double x);

/// Planar crystal transition density, valid for every xi > 0. When w + z = 0
/// the ratio inside upsilon is resolved by the sign of its numerator.
double phi0_2d(double xi, double w, double z);

/// Area of {x in unit disk : x_1 < t} for t in [0, 1].
double disk_cut_area(double t);

/// Half the disk average of disk_cut_area(|w - z| / 2) over z, as a function
/// of |w| in [0, 1]. Evaluated by adaptive Gauss-Kronrod quadrature.
double cut_area_integral(double w);

/// Spatial crystal transition density for 0 < xi <= 1/4.
double phi0_3d(double xi, const Vec& w, const Vec& z);

enum class KernelMedium { crystal2d, crystal3d, poisson };

/// The single-medium kernel family. Crystal evaluations are restricted to the
/// explicit range xi <= max_xi(); out-of-range arguments throw std::domain_error.
class KernelModel {
 public:
  static KernelModel crystal(int dim);
  static KernelModel poisson(int dim);

  KernelMedium medium() const { return medium_; }
  int dim() const { return dim_; }
  double sigma_bar() const { return sigma_bar_; }
  double zeta_d() const { return zeta_; }
  /// Upper end of the explicit xi range (infinity for Poisson).
  double max_xi() const;
  bool is_poisson() const { return medium_ == KernelMedium::poisson; }
  /// True when every kernel is independent of the impact and exit parameters.
  bool parameter_free() const { return medium_ != KernelMedium::crystal3d; }

  /// Transition density in (xi, w) given exit parameter z.
  double transition_density(double xi, const Vec& w, const Vec& z) const;
  /// Probability that the path from exit parameter w exceeds xi.
  double exit_survival(double xi, const Vec& w) const;
  /// Free path density when leaving a scatterer with exit parameter w.
  double exit_path_density(double xi, const Vec& w) const;
  /// Free path density for a generic start.
  double path_density(double xi) const;
  /// Probability that a generic free path exceeds xi.
  double survival(double xi) const;
  /// max(exp(-sigma_bar xi / 2), exp(-zeta(d) / 2)).
  double tail_bound(double xi) const;

  /// Variants taking the precomputed cut_area_integral(|w|) (d = 3 crystal only).
  double exit_survival_from_cut(double xi, double cut) const;
  double exit_path_density_from_cut(double xi, double cut) const;

 private:
  KernelModel(KernelMedium medium, int dim);
  void check_xi(double xi) const;
  void check_param(const Vec& w) const;

  KernelMedium medium_;
  int dim_;
  double sigma_bar_;
  double zeta_;
};

}  // namespace polyxport
