#include "polyxport/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace polyxport {

namespace {

constexpr double kGeomTol = 1e-10;

Vec cross(const Vec& a, const Vec& b) {
  return Vec{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Solves rows . x = rhs for a d x d system; returns nullopt when singular.
std::optional<Vec> solve(const std::vector<const Halfspace*>& rows) {
  const int d = static_cast<int>(rows.size());
  Mat a(d);
  Vec b(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = rows[static_cast<std::size_t>(i)]->normal[j];
    b[i] = rows[static_cast<std::size_t>(i)]->offset;
  }
  if (std::abs(a.det()) < 1e-12) return std::nullopt;
  // a x = b with x as a column: x = a^-1 b, i.e. x^T = b^T a^-T.
  return b * a.inverse().transpose();
}

double max_abs(const Vec& x) {
  double m = 0.0;
  for (int i = 0; i < x.dim(); ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

bool unbounded(const std::vector<Halfspace>& faces, int d) {
  // The recession cone {u : n_k . u <= 0} is non-trivial iff it contains one
  // of the candidate extreme rays or the normals do not span R^d.
  std::vector<Vec> candidates;
  if (d == 2) {
    for (const auto& f : faces) candidates.push_back(Vec{-f.normal[1], f.normal[0]});
  } else {
    for (std::size_t i = 0; i < faces.size(); ++i)
      for (std::size_t j = i + 1; j < faces.size(); ++j) {
        Vec c = cross(faces[i].normal, faces[j].normal);
        if (c.norm() > 1e-9) candidates.push_back(c.normalized());
      }
    if (candidates.empty()) return true;  // all normals parallel
  }
  // Rank check: some pair (d=2) or triple (d=3) must be independent.
  bool full_rank = false;
  if (d == 2) {
    for (std::size_t i = 0; i < faces.size() && !full_rank; ++i)
      for (std::size_t j = i + 1; j < faces.size() && !full_rank; ++j)
        full_rank = std::abs(faces[i].normal[0] * faces[j].normal[1] - faces[i].normal[1] * faces[j].normal[0]) > 1e-9;
  } else {
    for (const auto& c : candidates) {
      for (const auto& f : faces)
        if (std::abs(c.dot(f.normal)) > 1e-9) full_rank = true;
      if (full_rank) break;
    }
  }
  if (!full_rank) return true;
  for (const Vec& c : candidates)
    for (double sign : {1.0, -1.0}) {
      bool in_cone = true;
      for (const auto& f : faces)
        if (sign * c.dot(f.normal) > 1e-12) {
          in_cone = false;
          break;
        }
      if (in_cone) return true;
    }
  return false;
}

}  // namespace

double crystal_diameter_limit(int dim) { return dim == 2 ? 0.5 : 0.25; }

ConvexGrain ConvexGrain::from_halfspaces(int id, std::vector<Halfspace> faces) {
  if (faces.empty()) throw std::invalid_argument("ConvexGrain: no halfspaces");
  ConvexGrain g;
  g.id_ = id;
  g.dim_ = faces.front().normal.dim();
  if (g.dim_ != 2 && g.dim_ != 3) throw std::invalid_argument("ConvexGrain: dimension must be 2 or 3");
  for (auto& f : faces) {
    if (f.normal.dim() != g.dim_) throw std::invalid_argument("ConvexGrain: mixed dimensions");
    const double n = f.normal.norm();
    if (!(n > 0.0)) throw std::invalid_argument("ConvexGrain: zero normal");
    f.normal /= n;
    f.offset /= n;
  }
  g.faces_ = std::move(faces);
  if (unbounded(g.faces_, g.dim_)) throw std::invalid_argument("ConvexGrain " + std::to_string(id) + ": unbounded");
  g.finish();
  return g;
}

void ConvexGrain::finish() {
  vertices_.clear();
  const std::size_t n = faces_.size();
  std::vector<const Halfspace*> rows(static_cast<std::size_t>(dim_));
  auto consider = [&]() {
    auto p = solve(rows);
    if (!p) return;
    const double scale = 1.0 + max_abs(*p);
    for (const auto& f : faces_)
      if (f.normal.dot(*p) > f.offset + kGeomTol * scale) return;
    for (const auto& q : vertices_)
      if ((q - *p).norm() <= kGeomTol * scale) return;
    vertices_.push_back(*p);
  };
  if (dim_ == 2) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        rows = {&faces_[i], &faces_[j]};
        consider();
      }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          rows = {&faces_[i], &faces_[j], &faces_[k]};
          consider();
        }
  }
  if (vertices_.size() < static_cast<std::size_t>(dim_ + 1))
    throw std::invalid_argument("ConvexGrain " + std::to_string(id_) + ": empty interior");
  const Vec c = centroid();
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& f : faces_) slack = std::min(slack, f.offset - f.normal.dot(c));
  if (!(slack > kGeomTol * (1.0 + max_abs(c))))
    throw std::invalid_argument("ConvexGrain " + std::to_string(id_) + ": empty interior");
  diameter_ = 0.0;
  for (std::size_t i = 0; i < vertices_.size(); ++i)
    for (std::size_t j = i + 1; j < vertices_.size(); ++j)
      diameter_ = std::max(diameter_, (vertices_[i] - vertices_[j]).norm());
}

ConvexGrain ConvexGrain::from_vertices(int id, const std::vector<Vec>& points) {
  if (points.empty()) throw std::invalid_argument("ConvexGrain: no vertices");
  const int d = points.front().dim();
  std::vector<Halfspace> faces;
  if (d == 2) {
    std::vector<Vec> pts = points;
    std::sort(pts.begin(), pts.end(), [](const Vec& a, const Vec& b) {
      return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    auto turn = [](const Vec& o, const Vec& a, const Vec& b) {
      return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Vec> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      while (k >= 2 && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
      hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
      while (k >= t && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
      hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    if (hull.size() < 3) throw std::invalid_argument("ConvexGrain: degenerate vertex set");
    // Counter-clockwise hull: outward normal of edge a->b is (dy, -dx).
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vec& a = hull[i];
      const Vec& b = hull[(i + 1) % hull.size()];
      Vec nrm{b[1] - a[1], -(b[0] - a[0])};
      faces.push_back({nrm, nrm.dot(a)});
    }
  } else if (d == 3) {
    const std::size_t n = points.size();
    auto add_face = [&](Vec nrm, const Vec& p) {
      nrm = nrm.normalized();
      const double c = nrm.dot(p);
      for (const auto& f : faces)
        if ((f.normal - nrm).norm() < 1e-9 && std::abs(f.offset - c) < 1e-9) return;
      faces.push_back({nrm, c});
    };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) {
          Vec nrm = cross(points[j] - points[i], points[k] - points[i]);
          if (nrm.norm() < 1e-12) continue;
          bool all_below = true, all_above = true;
          const double scale = nrm.norm() * (1.0 + max_abs(points[i]));
          for (const auto& p : points) {
            const double s = nrm.dot(p - points[i]);
            if (s > 1e-12 * scale) all_below = false;
            if (s < -1e-12 * scale) all_above = false;
          }
          if (all_below) add_face(nrm, points[i]);
          if (all_above) add_face(-nrm, points[i]);
        }
  } else {
    throw std::invalid_argument("ConvexGrain: dimension must be 2 or 3");
  }
  return from_halfspaces(id, std::move(faces));
}

ConvexGrain ConvexGrain::box(int id, const Vec& lo, const Vec& hi) {
  std::vector<Halfspace> faces;
  for (int i = 0; i < lo.dim(); ++i) {
    faces.push_back({Vec::unit(lo.dim(), i), hi[i]});
    faces.push_back({-Vec::unit(lo.dim(), i), -lo[i]});
  }
  return from_halfspaces(id, std::move(faces));
}

Vec ConvexGrain::centroid() const {
  Vec c(dim_);
  for (const auto& p : vertices_) c += p;
  return c / static_cast<double>(vertices_.size());
}

bool ConvexGrain::contains(const Vec& x) const {
  for (const auto& f : faces_)
    if (!(f.normal.dot(x) < f.offset)) return false;
  return true;
}

std::optional<Interval> ConvexGrain::ray_intersect(const Vec& x, const Vec& v, double inflate) const {
  double t_in = 0.0;
  double t_out = std::numeric_limits<double>::infinity();
  for (const auto& f : faces_) {
    const double denom = f.normal.dot(v);
    const double num = f.offset + inflate - f.normal.dot(x);
    if (denom == 0.0) {
      if (num <= 0.0) return std::nullopt;
      continue;
    }
    const double t = num / denom;
    if (denom > 0.0)
      t_out = std::min(t_out, t);
    else
      t_in = std::max(t_in, t);
  }
  if (t_out - t_in <= kTimeTolerance * (1.0 + std::abs(t_out))) return std::nullopt;
  return Interval{t_in, t_out};
}

std::optional<Interval> ray_grain_intersect(const ConvexGrain& grain, const Vec& x, const Vec& v) {
  return grain.ray_intersect(x, v);
}

// --- Scene -----------------------------------------------------------------

Scene::Scene(int dim, std::vector<ConvexGrain> grains, std::vector<Medium> media,
             std::optional<PeriodicBox> box, std::optional<Vec> anchor)
    : dim_(dim),
      grains_(std::move(grains)),
      media_(std::move(media)),
      box_(std::move(box)),
      anchor_(anchor ? *anchor : Vec::zero(dim)) {
  validate();
}

namespace {

std::vector<std::pair<Vec, Vec>> edges_3d(const ConvexGrain& g) {
  std::vector<std::pair<Vec, Vec>> edges;
  const auto& vs = g.vertices();
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      int shared = 0;
      for (const auto& f : g.faces()) {
        const double tol = 1e-9 * (1.0 + std::abs(f.offset));
        if (std::abs(f.normal.dot(vs[i]) - f.offset) < tol && std::abs(f.normal.dot(vs[j]) - f.offset) < tol)
          ++shared;
      }
      if (shared >= 2) edges.emplace_back(vs[i], vs[j]);
    }
  return edges;
}

bool separated_along(const ConvexGrain& a, const ConvexGrain& b, const Vec& axis) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto& p : a.vertices()) {
    amin = std::min(amin, axis.dot(p));
    amax = std::max(amax, axis.dot(p));
  }
  for (const auto& p : b.vertices()) {
    bmin = std::min(bmin, axis.dot(p));
    bmax = std::max(bmax, axis.dot(p));
  }
  const double tol = 1e-9 * (1.0 + std::max({std::abs(amin), std::abs(amax), std::abs(bmin), std::abs(bmax)}));
  return amax <= bmin + tol || bmax <= amin + tol;
}

bool interiors_disjoint(const ConvexGrain& a, const ConvexGrain& b) {
  for (const auto& f : a.faces())
    if (separated_along(a, b, f.normal)) return true;
  for (const auto& f : b.faces())
    if (separated_along(a, b, f.normal)) return true;
  if (a.dim() == 3) {
    const auto ea = edges_3d(a);
    const auto eb = edges_3d(b);
    for (const auto& [p, q] : ea)
      for (const auto& [r, s] : eb) {
        Vec axis = cross(q - p, s - r);
        if (axis.norm() < 1e-12) continue;
        if (separated_along(a, b, axis.normalized())) return true;
      }
  }
  return false;
}

}  // namespace

void Scene::validate() const {
  if (dim_ != 2 && dim_ != 3) throw std::invalid_argument("Scene: dimension must be 2 or 3");
  if (grains_.empty()) throw std::invalid_argument("Scene: no grains");
  if (media_.size() != grains_.size()) throw std::invalid_argument("Scene: one medium per grain required");
  if (anchor_.dim() != dim_) throw std::invalid_argument("Scene: anchor dimension mismatch");
  for (std::size_t i = 0; i < grains_.size(); ++i) {
    if (grains_[i].dim() != dim_) throw std::invalid_argument("Scene: grain dimension mismatch");
    if (media_[i].kind == MediumKind::crystal && media_[i].lattice.dim() != dim_)
      throw std::invalid_argument("Scene: lattice dimension mismatch for grain " + std::to_string(i));
  }
  if (box_) {
    if (box_->lo.dim() != dim_ || box_->hi.dim() != dim_) throw std::invalid_argument("Scene: box dimension mismatch");
    for (int i = 0; i < dim_; ++i)
      if (!(box_->hi[i] > box_->lo[i])) throw std::invalid_argument("Scene: empty periodic box");
    for (const auto& g : grains_)
      for (const auto& p : g.vertices())
        for (int i = 0; i < dim_; ++i) {
          const double tol = 1e-9 * (1.0 + std::abs(box_->hi[i]) + std::abs(box_->lo[i]));
          if (p[i] < box_->lo[i] - tol || p[i] > box_->hi[i] + tol)
            throw std::invalid_argument("Scene: grain " + std::to_string(g.id()) + " leaves the periodic box");
        }
  }
  for (std::size_t i = 0; i < grains_.size(); ++i)
    for (std::size_t j = i + 1; j < grains_.size(); ++j)
      if (!interiors_disjoint(grains_[i], grains_[j]))
        throw std::invalid_argument("Scene: grains " + std::to_string(grains_[i].id()) + " and " +
                                    std::to_string(grains_[j].id()) + " overlap");
}

void Scene::require_explicit_kernel_range() const {
  const double limit = crystal_diameter_limit(dim_);
  for (std::size_t i = 0; i < grains_.size(); ++i)
    if (media_[i].kind == MediumKind::crystal && grains_[i].diameter_bound() > limit * (1.0 + 1e-12))
      throw std::domain_error("Scene: crystal grain " + std::to_string(grains_[i].id()) + " has diameter " +
                              std::to_string(grains_[i].diameter_bound()) +
                              " beyond the explicit kernel range " + std::to_string(limit));
}

double Scene::max_diameter() const {
  double m = 0.0;
  for (const auto& g : grains_) m = std::max(m, g.diameter_bound());
  return m;
}

double Scene::max_crystal_diameter() const {
  double m = 0.0;
  for (std::size_t i = 0; i < grains_.size(); ++i)
    if (media_[i].kind == MediumKind::crystal) m = std::max(m, grains_[i].diameter_bound());
  return m;
}

double Scene::extent() const {
  if (box_) return box_->size().norm();
  double m = 0.0;
  std::vector<Vec> all;
  for (const auto& g : grains_)
    for (const auto& p : g.vertices()) all.push_back(p);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) m = std::max(m, (all[i] - all[j]).norm());
  return m;
}

Vec Scene::image_shift(const Image& image) const {
  Vec s(dim_);
  if (!box_) return s;
  const Vec size = box_->size();
  for (int i = 0; i < dim_; ++i) s[i] = static_cast<double>(image[static_cast<std::size_t>(i)]) * size[i];
  return s;
}

std::vector<ItinerarySegment> Scene::itinerary(const Vec& x, const Vec& v, double horizon) const {
  if (!(horizon > 0.0)) throw std::invalid_argument("itinerary: horizon must be positive");
  std::vector<ItinerarySegment> out;
  ItineraryCursor cursor(*this, x, v, horizon);
  while (auto s = cursor.next()) out.push_back(*s);
  return out;
}

double Scene::gap(const Vec& x, const Vec& v, double xi) const {
  if (xi < 0.0) throw std::invalid_argument("gap: xi must be non-negative");
  if (xi == 0.0) return 0.0;
  double covered = 0.0;
  ItineraryCursor cursor(*this, x, v, xi);
  while (auto s = cursor.next()) covered += std::min(s->exit, xi) - s->entry;
  return std::clamp(xi - covered, 0.0, xi);
}

bool Scene::inside_indicator(const Vec& x, const Vec& v) const {
  ItineraryCursor cursor(*this, x, v, std::numeric_limits<double>::min());
  auto s = cursor.next();
  return s.has_value() && s->entry == 0.0;
}

// --- ItineraryCursor -------------------------------------------------------

ItineraryCursor::ItineraryCursor(const Scene& scene, const Vec& x, const Vec& v, double horizon)
    : scene_(&scene), x_(x), v_(v), horizon_(horizon) {
  if (scene.periodic()) {
    const auto& box = *scene.box();
    const Vec size = box.size();
    for (int i = 0; i < scene.dim(); ++i)
      cell_[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor((x[i] - box.lo[i]) / size[i]));
  } else {
    for (std::size_t g = 0; g < scene.grains().size(); ++g) {
      auto iv = scene.grains()[g].ray_intersect(x, v);
      if (iv && iv->t_in < horizon_) pending_.push_back({static_cast<int>(g), Image{}, iv->t_in, iv->t_out});
    }
    std::sort(pending_.begin(), pending_.end(),
              [](const ItinerarySegment& a, const ItinerarySegment& b) { return a.entry < b.entry; });
    exhausted_ = true;
  }
}

void ItineraryCursor::collect_cell(const Image& cell, double t_cell_end) {
  const Vec shift = scene_->image_shift(cell);
  const Vec local = x_ - shift;
  const std::size_t first = pending_.size();
  for (std::size_t g = 0; g < scene_->grains().size(); ++g) {
    auto iv = scene_->grains()[g].ray_intersect(local, v_);
    if (iv && iv->t_in < horizon_) pending_.push_back({static_cast<int>(g), cell, iv->t_in, iv->t_out});
  }
  (void)t_cell_end;
  std::sort(pending_.begin() + static_cast<std::ptrdiff_t>(first), pending_.end(),
            [](const ItinerarySegment& a, const ItinerarySegment& b) { return a.entry < b.entry; });
}

void ItineraryCursor::fill() {
  // Walks periodic cells until at least one segment is pending or the horizon is passed.
  const auto& box = *scene_->box();
  const Vec size = box.size();
  const int d = scene_->dim();
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pending_pos_));
  pending_pos_ = 0;
  while (pending_.empty() && !exhausted_) {
    if (t_cell_ >= horizon_) {
      exhausted_ = true;
      break;
    }
    double t_exit = std::numeric_limits<double>::infinity();
    int axis = -1;
    for (int i = 0; i < d; ++i) {
      if (v_[i] == 0.0) continue;
      const auto k = static_cast<double>(cell_[static_cast<std::size_t>(i)] + (v_[i] > 0.0 ? 1 : 0));
      const double t = (box.lo[i] + k * size[i] - x_[i]) / v_[i];
      if (t < t_exit) {
        t_exit = t;
        axis = i;
      }
    }
    collect_cell(cell_, t_exit);
    t_cell_ = std::max(t_cell_, t_exit);
    cell_[static_cast<std::size_t>(axis)] += v_[axis] > 0.0 ? 1 : -1;
  }
}

std::optional<ItinerarySegment> ItineraryCursor::next() {
  for (;;) {
    if (pending_pos_ >= pending_.size()) {
      if (exhausted_ || !scene_->periodic()) return std::nullopt;
      fill();
      if (pending_.empty()) return std::nullopt;
    }
    ItinerarySegment s = pending_[pending_pos_++];
    const double scale = 1.0 + max_abs(x_);
    if (s.entry <= kTimeTolerance * scale) s.entry = 0.0;
    if (have_last_ && s.entry <= last_exit_ + kTimeTolerance * (1.0 + std::abs(last_exit_)))
      s.entry = last_exit_;
    if (s.exit - s.entry <= kTimeTolerance * (1.0 + std::abs(s.exit))) continue;
    last_exit_ = s.exit;
    have_last_ = true;
    return s;
  }
}

}  // namespace polyxport
