#pragma once

#include <array>
#include <optional>
#include <vector>

#include "polyxport/lattice.hpp"
#include "polyxport/vec.hpp"

namespace polyxport {

/// Relative tolerance for entry/exit comparisons along a ray.
inline constexpr double kTimeTolerance = 1e-12;

/// Open halfspace {x : x . normal < offset}, with unit normal.
struct Halfspace {
  Vec normal;
  double offset = 0.0;
};

/// Open parameter interval (t_in, t_out) along a ray.
struct Interval {
  double t_in = 0.0;
  double t_out = 0.0;
  double length() const { return t_out - t_in; }
};

/// Bounded convex open polytope in H-representation. Vertices are kept for
/// diameter, overlap and containment checks.
class ConvexGrain {
 public:
  static ConvexGrain from_halfspaces(int id, std::vector<Halfspace> faces);
  static ConvexGrain from_vertices(int id, const std::vector<Vec>& points);
  /// Axis-aligned box (lo, hi).
  static ConvexGrain box(int id, const Vec& lo, const Vec& hi);

  int id() const { return id_; }
  int dim() const { return dim_; }
  const std::vector<Halfspace>& faces() const { return faces_; }
  const std::vector<Vec>& vertices() const { return vertices_; }
  double diameter_bound() const { return diameter_; }
  Vec centroid() const;

  /// Strict interior test.
  bool contains(const Vec& x) const;

  /// Maximal open interval of t > 0 with x + t v inside the grain grown by
  /// `inflate` (each face pushed outward by that distance). Grazing rays miss.
  std::optional<Interval> ray_intersect(const Vec& x, const Vec& v, double inflate = 0.0) const;

 private:
  ConvexGrain() = default;
  void finish();

  int id_ = 0;
  int dim_ = 0;
  std::vector<Halfspace> faces_;
  std::vector<Vec> vertices_;
  double diameter_ = 0.0;
};

/// Free-function form of ConvexGrain::ray_intersect.
std::optional<Interval> ray_grain_intersect(const ConvexGrain& grain, const Vec& x, const Vec& v);

enum class MediumKind { crystal, poisson };

struct Medium {
  MediumKind kind = MediumKind::crystal;
  AffineLattice lattice;  // unused for Poisson grains
};

/// Axis-aligned periodic box. Grains lie inside it and are repeated on the
/// translates lo + k * (hi - lo), k in Z^d.
struct PeriodicBox {
  Vec lo;
  Vec hi;
  Vec size() const { return hi - lo; }
};

using Image = std::array<std::int64_t, kMaxDim>;

struct ItinerarySegment {
  int grain_id = 0;  // index into Scene::grains()
  Image image{};     // periodic translate, all zero for non-periodic scenes
  double entry = 0.0;
  double exit = 0.0;
  double length() const { return exit - entry; }
};

class Scene;

/// Lazily produces the itinerary of a ray in entry order; works for periodic
/// (unbounded) scenes. Entries/exits within tolerance of each other are chained.
class ItineraryCursor {
 public:
  ItineraryCursor(const Scene& scene, const Vec& x, const Vec& v, double horizon);

  /// Next segment with entry < horizon, or nullopt when exhausted.
  std::optional<ItinerarySegment> next();

 private:
  void fill();
  void collect_cell(const Image& cell, double t_cell_end);

  const Scene* scene_;
  Vec x_, v_;
  double horizon_;
  std::vector<ItinerarySegment> pending_;
  std::size_t pending_pos_ = 0;
  bool exhausted_ = false;
  double last_exit_ = -1.0;
  bool have_last_ = false;
  // periodic walk state
  Image cell_{};
  double t_cell_ = 0.0;
};

class Scene {
 public:
  Scene(int dim, std::vector<ConvexGrain> grains, std::vector<Medium> media,
        std::optional<PeriodicBox> box = std::nullopt, std::optional<Vec> anchor = std::nullopt);

  int dim() const { return dim_; }
  const std::vector<ConvexGrain>& grains() const { return grains_; }
  const std::vector<Medium>& media() const { return media_; }
  const std::optional<PeriodicBox>& box() const { return box_; }
  const Vec& anchor() const { return anchor_; }
  bool periodic() const { return box_.has_value(); }

  /// Largest diameter bound over all grains.
  double max_diameter() const;
  /// Largest diameter bound over crystal grains (0 if none).
  double max_crystal_diameter() const;
  /// Diameter of the union of grains (finite scenes) or of the box.
  double extent() const;

  /// Offset of the periodic translate `image` (zero vector when not periodic).
  Vec image_shift(const Image& image) const;

  std::vector<ItinerarySegment> itinerary(const Vec& x, const Vec& v, double horizon) const;
  double gap(const Vec& x, const Vec& v, double xi) const;
  bool inside_indicator(const Vec& x, const Vec& v) const;

  /// Throws std::domain_error if a crystal grain exceeds the diameter range
  /// on which the explicit crystal kernels are available.
  void require_explicit_kernel_range() const;

 private:
  void validate() const;

  int dim_;
  std::vector<ConvexGrain> grains_;
  std::vector<Medium> media_;
  std::optional<PeriodicBox> box_;
  Vec anchor_;
};

/// Explicit-kernel range for crystal grain diameters: 1/2 in d=2, 1/4 in d=3.
double crystal_diameter_limit(int dim);

}  // namespace polyxport
