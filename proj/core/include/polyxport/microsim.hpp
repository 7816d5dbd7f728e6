#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "polyxport/geometry.hpp"
#include "polyxport/lattice.hpp"
#include "polyxport/rng.hpp"

namespace polyxport {

struct MicroConfig {
  double r = 1e-2;
  OffsetMode offset_mode = OffsetMode::anchored;
  std::uint64_t seed = 1;
  /// Rays travelling this far without a hit escape. Zero selects ten times
  /// the scene extent.
  double escape_cutoff = 0.0;
  /// Tube length enumerated at a time along one grain.
  double chunk_length = 0.25;

  /// Lattice scaling r^((d-1)/d).
  double epsilon(int dim) const;
};

/// Identifies one scatterer: a lattice point of a crystal grain, or the
/// sub-th point of a hashed cell of the Poisson process (grain = -1).
struct ScattererId {
  int grain = -1;
  LatticeIndex index{};
  std::int64_t sub = 0;
  bool operator==(const ScattererId&) const = default;
};

struct CollisionEvent {
  double time = 0.0;    // free flight length before this collision
  Vec centre;           // scatterer centre
  Vec impact_point;     // unit vector, position = centre + r * impact_point
  Vec position;
  int grain = -1;       // grain containing the centre
  ScattererId id;
  Vec v_in;
  Vec v_out;
};

struct Trajectory {
  std::vector<CollisionEvent> events;
  bool escaped = false;
  double end_time = 0.0;
};

/// Hard-sphere scatterers of radius r on the polylattice of a scene: each
/// crystal grain carries anchor + eps (Z^d + omega) M restricted to the grain,
/// Poisson grains carry a Poisson process of intensity eps^-d.
class MicroSystem {
 public:
  MicroSystem(const Scene& scene, MicroConfig cfg);

  const Scene& scene() const { return *scene_; }
  const MicroConfig& config() const { return cfg_; }
  int dim() const { return scene_->dim(); }
  double r() const { return cfg_.r; }
  double epsilon() const { return eps_; }
  double escape_cutoff() const { return cutoff_; }

  /// Copy carrying an independent realization of the Poisson scatterers;
  /// crystal lattices are unchanged.
  MicroSystem with_poisson_seed(std::uint64_t seed) const;

  /// Lattice of crystal grain g (throws for Poisson grains).
  const ScaledGrainLattice& grain_lattice(int g) const;
  /// Points of the Poisson process in the hashed cell with the given index.
  std::vector<Vec> poisson_cell_points(const LatticeIndex& cell) const;
  double poisson_cell_size() const { return cell_size_; }

  /// First sphere entered by the ray x + t v, t > 0, skipping `exclude`.
  /// nullopt when the ray escapes.
  std::optional<CollisionEvent> first_collision(const Vec& x, const Vec& v,
                                                const std::optional<ScattererId>& exclude = std::nullopt) const;

  /// Collision sequence up to time t_max. If `start_on` is given the
  /// particle starts on that scatterer's surface.
  Trajectory trajectory(const Vec& x0, const Vec& v0, double t_max,
                        const std::optional<ScattererId>& start_on = std::nullopt) const;

  /// True when x lies strictly inside some scatterer.
  bool covered(const Vec& x) const;

  /// Crystal lattice point of grain g closest to x (in lattice coordinates).
  std::pair<ScattererId, Vec> nearest_scatterer(int g, const Vec& x) const;

 private:
  struct Candidate {
    double t;
    Vec centre;
    ScattererId id;
    int grain;
  };
  void scan_interval(int grain, const Vec& shift, const Vec& x, const Vec& v, double t0, double t1,
                     const std::optional<ScattererId>& exclude, std::optional<Candidate>& best) const;

  const Scene* scene_;
  MicroConfig cfg_;
  double eps_;
  double cutoff_;
  double cell_size_;
  std::vector<std::optional<ScaledGrainLattice>> lattices_;
  ScaledGrainLattice cells_;
};

/// Law of the initial direction: uniform on the sphere, or uniform on the cap
/// of directions within `half_angle` of `axis`.
struct DirectionLaw {
  enum class Kind { uniform, cap } kind = Kind::uniform;
  Vec axis;
  double half_angle = 0.0;

  Vec sample(Rng& rng, int dim) const;
  /// Deterministic nodes and weights (summing to one) for integrals over the law.
  std::vector<std::pair<Vec, double>> quadrature(int dim, int n) const;
};

/// Initial offset beta(v) for starts on a scatterer: `forward` is beta(v) = v,
/// `offset` places the start at exit parameter `offset` in the frame of v.
struct StartOffset {
  enum class Kind { forward, offset } kind = Kind::forward;
  Vec offset;

  Vec beta(const Vec& v) const;
  /// (beta(v) K(v))_perp
  Vec exit_parameter(const Vec& v) const;
};

struct FreePathSample {
  double tau = 0.0;
  bool escaped = false;
  int grain = -1;
  Vec impact;  // -w1 K(v)
  Vec v;
};

struct FreePathRequest {
  Vec base;          // x
  Vec q;             // start offset in units of eps
  DirectionLaw law;
  std::size_t samples = 1000;
  bool on_scatterer = false;  // start next to the lattice point of the grain containing base
  StartOffset start;
  /// Give every sample its own realization of the Poisson scatterers, redrawn
  /// until the start point is uncovered.
  bool fresh_poisson = false;
  std::uint64_t stream = 0;
  unsigned threads = 1;
};

/// Independent directions v ~ law; per direction the first collision from
/// base + eps q + r beta(v). Output order depends only on the sample index.
std::vector<FreePathSample> sample_tau1_distribution(const MicroSystem& system, const FreePathRequest& request);

/// Runs body(i) for i in [0, n) on `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace polyxport
