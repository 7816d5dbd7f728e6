#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "polyxport/geometry.hpp"
#include "polyxport/rng.hpp"

namespace polyxport::testing {

inline Medium crystal_medium(int dim) { return Medium{MediumKind::crystal, AffineLattice::integer(dim)}; }
inline Medium poisson_medium() { return Medium{MediumKind::poisson, {}}; }

inline Vec filled(int dim, double value) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = value;
  return v;
}

/// Random point of the unit ball in R^dim for dim = 1, 2.
inline Vec random_parameter(Rng& rng, int dim) { return rng.in_ball(dim); }

/// Grains on a cubic grid of cells with side `cell`: each cell is left empty,
/// filled by a box, or holds a random convex polytope inside a shrunk copy.
/// Grain diameters stay within the explicit kernel range.
inline std::shared_ptr<Scene> random_scene(Rng& rng, int dim, bool all_poisson = false, bool allow_crystal = true) {
  const double cell = dim == 2 ? 0.34 : 0.14;
  const int per_axis = dim == 2 ? 4 : 3;
  std::vector<ConvexGrain> grains;
  std::vector<Medium> media;
  const int cells = dim == 2 ? per_axis * per_axis : per_axis * per_axis * per_axis;
  for (int c = 0; c < cells; ++c) {
    Vec lo(dim);
    int code = c;
    for (int i = 0; i < dim; ++i) {
      lo[i] = cell * (code % per_axis);
      code /= per_axis;
    }
    const double u = rng.uniform();
    if (u < 0.2) continue;
    const int id = static_cast<int>(grains.size());
    if (u < 0.6) {
      grains.push_back(ConvexGrain::box(id, lo, lo + filled(dim, cell)));
    } else {
      const double margin = 0.1 * cell;
      std::vector<Vec> pts;
      for (int k = 0; k < (dim == 2 ? 7 : 12); ++k) {
        Vec p(dim);
        for (int i = 0; i < dim; ++i) p[i] = lo[i] + margin + (cell - 2 * margin) * rng.uniform();
        pts.push_back(p);
      }
      grains.push_back(ConvexGrain::from_vertices(id, pts));
    }
    const bool poisson = all_poisson || !allow_crystal || rng.uniform() < 0.4;
    media.push_back(poisson ? poisson_medium() : crystal_medium(dim));
  }
  if (grains.empty()) {
    grains.push_back(ConvexGrain::box(0, Vec::zero(dim), filled(dim, cell)));
    media.push_back(all_poisson || !allow_crystal ? poisson_medium() : crystal_medium(dim));
  }
  return std::make_shared<Scene>(dim, std::move(grains), std::move(media));
}

/// Uniform point inside a randomly chosen grain (by rejection from its bounding box).
inline Vec point_in_grains(Rng& rng, const Scene& scene) {
  const auto& grains = scene.grains();
  const ConvexGrain& g = grains[rng.below(grains.size())];
  const int d = scene.dim();
  Vec lo = g.vertices().front(), hi = g.vertices().front();
  for (const auto& p : g.vertices())
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  for (;;) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(lo[i], hi[i]);
    if (g.contains(x)) return x;
  }
}

/// Row vector of dimension 2 rotated by angle and optionally mirrored; the
/// identity on dimension 1 apart from the mirror.
inline Vec orthogonal_image(const Vec& w, double angle, bool mirror) {
  if (w.dim() == 1) return mirror ? -w : w;
  Vec r{std::cos(angle) * w[0] - std::sin(angle) * w[1], std::sin(angle) * w[0] + std::cos(angle) * w[1]};
  if (mirror) r[1] = -r[1];
  return r;
}

}  // namespace polyxport::testing
