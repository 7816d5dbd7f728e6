#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polyxport/polykernel.hpp"
#include "polyxport/rng.hpp"

namespace polyxport {

/// State of the limiting random flight: position, velocity, remaining flight
/// length xi and the velocity after the next collision.
struct ExtendedState {
  Vec x;
  Vec v;
  double xi = 0.0;
  Vec v_plus;
  std::int64_t collisions = 0;
  bool escaped = false;
  double time = 0.0;
};

enum class SamplerKind { automatic, factorized, rejection };

struct PathDraw {
  double xi = 0.0;
  Vec v_plus;
};

struct SamplerStats {
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
};

class FlightProcess {
 public:
  explicit FlightProcess(const PolyKernel& kernel, SamplerKind kind = SamplerKind::automatic);

  const PolyKernel& kernel() const { return *kernel_; }
  /// True when flight lengths are drawn by inversion and impact parameters
  /// independently (all grain kernels free of impact and exit parameters).
  bool factorized() const { return factorized_; }

  /// (xi, v_plus) from the generic-start law Psi(x, v, xi, b) sigma(v, v_plus);
  /// nullopt when the particle escapes.
  std::optional<PathDraw> sample_path(const Vec& x, const Vec& v, Rng& rng, SamplerStats* stats = nullptr) const;
  /// (xi, v_plus) after a collision at x_col that turned v_prev into v.
  std::optional<PathDraw> sample_collision(const Vec& v_prev, const Vec& x_col, const Vec& v, Rng& rng,
                                           SamplerStats* stats = nullptr) const;

  /// Initial state at (x, v) with (xi, v_plus) from the generic-start law.
  ExtendedState sample_initial(const Vec& x, const Vec& v, Rng& rng) const;
  /// Advances the state by dt, registering every collision on the way.
  void evolve(ExtendedState& state, double dt, Rng& rng) const;

 private:
  std::optional<double> invert_survival(const Vec& x, const Vec& v, double u, const Vec* exit) const;
  std::optional<PathDraw> rejection(const Vec& x, const Vec& v, const Vec* exit, Rng& rng, SamplerStats* stats) const;

  const PolyKernel* kernel_;
  bool factorized_;
};

/// Uniform position on the scene support (the periodic box, or the union of
/// the grains) and uniform direction.
std::pair<Vec, Vec> sample_uniform_start(const Scene& scene, Rng& rng);

/// Position reduced into the periodic box (unchanged for finite scenes).
Vec wrap_position(const Scene& scene, const Vec& x);

struct EnsembleRequest {
  std::size_t particles = 1000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  unsigned threads = 1;
};

/// Particles started from the stationary law p with uniform f0 and evolved
/// through the consecutive time steps in `steps`.
std::vector<ExtendedState> run_ensemble(const FlightProcess& process, const EnsembleRequest& request,
                                        const std::vector<double>& steps);

/// Counts of particles by number of collisions; the last entry counts escapes.
struct CollisionHistogram {
  std::vector<std::uint64_t> counts;
  std::uint64_t escaped = 0;
  std::uint64_t total = 0;
};
CollisionHistogram n_collision_histogram(const std::vector<ExtendedState>& ensemble);

struct MarginalComparison {
  std::string name;
  double statistic = 0.0;
  double p_value = 1.0;
};

struct StationarityReport {
  double time = 0.0;
  std::vector<MarginalComparison> stationarity;  // time 0 against time t
  std::vector<MarginalComparison> semigroup;     // split evolution against one step
  double min_p_value() const;
};

/// Compares marginals of (xi, v_plus, v, position) between independent
/// ensembles: fresh against evolved to t, and evolved in two steps
/// (split, t - split) against one step of t.
StationarityReport stationarity_test(const FlightProcess& process, const EnsembleRequest& request, double t,
                                     double split);

}  // namespace polyxport
