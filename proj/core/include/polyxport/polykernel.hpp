#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "polyxport/geometry.hpp"
#include "polyxport/kernels.hpp"

namespace polyxport {

/// Polycrystal path densities built from per-grain kernels along the ray
/// itinerary. Crystal grains must lie in the explicit kernel range.
class PolyKernel {
 public:
  explicit PolyKernel(const Scene& scene);

  const Scene& scene() const { return *scene_; }
  int dim() const { return scene_->dim(); }
  double sigma_bar() const { return unit_ball_volume(dim()); }
  const KernelModel& model(int grain) const { return models_[static_cast<std::size_t>(grain)]; }
  /// True when no grain kernel depends on impact or exit parameters.
  bool parameter_free() const { return parameter_free_; }

  /// Free path density from a generic start.
  double psi(const Vec& x, const Vec& v, double xi) const;
  /// Joint density of free path and impact parameter w from a generic start.
  double psi_w(const Vec& x, const Vec& v, double xi, const Vec& w) const;
  /// Free path density when leaving a scatterer with exit parameter w.
  double psi0(const Vec& x, const Vec& v, double xi, const Vec& w) const;
  /// Transition density in (xi, w) given exit parameter z.
  double psi0_full(const Vec& x, const Vec& v, double xi, const Vec& w, const Vec& z) const;

  /// 1 - integral of psi over [0, xi]. xi may be infinite.
  double survival(const Vec& x, const Vec& v, double xi) const;
  /// 1 - integral over [0, xi] and all w of psi0_full(., w, z).
  double survival_from_exit(const Vec& x, const Vec& v, double xi, const Vec& z) const;
  /// survival (or survival_from_exit when z is given) on an increasing grid of
  /// finite xi values, from a single itinerary walk.
  std::vector<double> survival_profile(const Vec& x, const Vec& v, const std::vector<double>& grid,
                                       const std::optional<Vec>& z = std::nullopt) const;

  /// Rate and constant of the exponential envelope C exp(-rate (xi - gap)).
  double envelope_rate() const { return rate_; }
  double envelope_constant() const { return constant_; }
  double psi_tail_bound(const Vec& x, const Vec& v, double xi) const;

  /// Horizon used when a periodic ray never reaches a grain.
  double walk_cutoff() const { return cutoff_; }
  void set_walk_cutoff(double cutoff) { cutoff_ = cutoff; }

 private:
  void check_param(const Vec& w) const;
  void build_envelope();

  const Scene* scene_;
  std::vector<KernelModel> models_;
  bool parameter_free_ = true;
  double rate_ = 0.0;
  double constant_ = 0.0;
  double cutoff_ = 0.0;
};

struct PoissonPsi {
  double psi = 0.0;        // free path density
  double psi_w = 0.0;      // joint with impact parameter
  double psi0 = 0.0;       // joint with impact parameter, scatterer start
  double psi0_full = 0.0;  // transition density
};

/// Closed forms for scenes whose grains are all Poisson media.
PoissonPsi poisson_psi(const Scene& scene, const Vec& x, const Vec& v, double xi);

struct PathProbe {
  Vec x;
  Vec v;
  double xi = 0.0;
};

struct TransportIdentityReport {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_residual = 0.0;        // |D psi - integral of psi0 over w|
  double max_boundary_error = 0.0;  // errors of the xi = 0 boundary values
};

/// Compares the one-sided directional difference of psi along (x + h v, xi - h)
/// with the w-integral of psi0. Probes within reach of a segment endpoint are skipped.
TransportIdentityReport check_transport_identity(const PolyKernel& kernel, const std::vector<PathProbe>& probes);

}  // namespace polyxport
