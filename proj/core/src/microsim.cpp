#include "polyxport/microsim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <queue>
#include <set>
#include <stdexcept>
#include <thread>

#include "polyxport/scattering.hpp"

namespace polyxport {

namespace {

constexpr std::uint64_t kOffsetStream = 0x6f6666736574ULL;
constexpr std::uint64_t kPoissonStream = 0x706f6973736f6eULL;
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Entry time of the ray into the open ball, computed without cancellation.
std::optional<double> sphere_entry(const Vec& x, const Vec& v, const Vec& centre, double r) {
  const Vec rel = x - centre;
  const double b = rel.dot(v);
  const double c = rel.norm2() - r * r;
  if (b >= 0.0) return std::nullopt;  // moving away (or already leaving)
  if (c < 0.0) return 0.0;
  const double disc = b * b - c;
  if (!(disc > 0.0)) return std::nullopt;
  return c / (-b + std::sqrt(disc));
}

// Hashed Poisson cells are indexed like lattice points with offset 1/2, so the
// tube enumerator returns cell centres.
Vec cell_centre_offset(int d) {
  Vec half(d);
  for (int i = 0; i < d; ++i) half[i] = 0.5;
  return half;
}

struct Pending {
  double t_in, t_out;
  int grain;
  Image image;
  bool operator>(const Pending& o) const { return t_in > o.t_in; }
};

}  // namespace

double MicroConfig::epsilon(int dim) const {
  if (!(r > 0.0)) throw std::invalid_argument("MicroConfig: r must be positive");
  return std::pow(r, (dim - 1.0) / dim);
}

MicroSystem::MicroSystem(const Scene& scene, MicroConfig cfg)
    : scene_(&scene),
      cfg_(cfg),
      eps_(cfg.epsilon(scene.dim())),
      cutoff_(cfg.escape_cutoff > 0.0 ? cfg.escape_cutoff : 10.0 * scene.extent()),
      cell_size_(2.0 * eps_),
      cells_(AffineLattice(Mat::identity(scene.dim()), cell_centre_offset(scene.dim())), cell_size_,
             Vec::zero(scene.dim())) {
  if (!(cfg.chunk_length > 0.0)) throw std::invalid_argument("MicroConfig: chunk_length must be positive");
  const int d = scene.dim();
  if (2.0 * cfg_.r >= eps_) throw std::invalid_argument("MicroConfig: r too large for the lattice scaling");
  for (std::size_t g = 0; g < scene.grains().size(); ++g) {
    const Medium& m = scene.media()[g];
    if (m.kind == MediumKind::poisson) {
      lattices_.emplace_back(std::nullopt);
      continue;
    }
    if (cfg_.offset_mode == OffsetMode::anchored) {
      lattices_.emplace_back(ScaledGrainLattice(m.lattice, eps_, scene.anchor()));
    } else {
      Rng rng = Rng::substream(cfg_.seed, kOffsetStream, g);
      Vec omega(d);
      for (int i = 0; i < d; ++i) omega[i] = rng.uniform();
      lattices_.emplace_back(ScaledGrainLattice(m.lattice.with_offset(omega), eps_, Vec::zero(d)));
    }
  }
}

MicroSystem MicroSystem::with_poisson_seed(std::uint64_t seed) const {
  MicroSystem copy = *this;
  copy.cfg_.seed = seed;
  return copy;
}

const ScaledGrainLattice& MicroSystem::grain_lattice(int g) const {
  const auto& l = lattices_.at(static_cast<std::size_t>(g));
  if (!l) throw std::invalid_argument("MicroSystem: grain has no lattice (Poisson medium)");
  return *l;
}

std::vector<Vec> MicroSystem::poisson_cell_points(const LatticeIndex& cell) const {
  const int d = dim();
  std::uint64_t key = splitmix64(cfg_.seed ^ kPoissonStream);
  for (int i = 0; i < d; ++i) key = splitmix64(key ^ static_cast<std::uint64_t>(cell[static_cast<std::size_t>(i)]));
  std::uint64_t counter = 0;
  auto uniform = [&]() {
    return static_cast<double>(splitmix64(key + kGolden * counter++) >> 11) * 0x1.0p-53;
  };
  const double mean = std::pow(cell_size_ / eps_, d);
  const double limit = std::exp(-mean);
  int count = -1;
  double prod = 1.0;
  do {
    ++count;
    prod *= uniform();
  } while (prod > limit);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Vec p(d);
    for (int i = 0; i < d; ++i)
      p[i] = cell_size_ * (static_cast<double>(cell[static_cast<std::size_t>(i)]) + uniform());
    pts.push_back(p);
  }
  return pts;
}

void MicroSystem::scan_interval(int grain, const Vec& shift, const Vec& x, const Vec& v, double t0, double t1,
                                const std::optional<ScattererId>& exclude,
                                std::optional<Candidate>& best) const {
  const ConvexGrain& shape = scene_->grains()[static_cast<std::size_t>(grain)];
  const double r = cfg_.r;
  const auto& lattice = lattices_[static_cast<std::size_t>(grain)];
  auto consider = [&](const Vec& centre, const ScattererId& id) {
    if (exclude && id == *exclude) return;
    if (!shape.contains(centre - shift)) return;
    const auto t = sphere_entry(x, v, centre, r);
    if (!t) return;
    if (!best || *t < best->t) best = Candidate{*t, centre, id, grain};
  };
  const double reach = r + cell_size_ * std::sqrt(static_cast<double>(dim())) / 2.0;
  for (double a = t0; a < t1;) {
    const double b = std::min(t1, a + cfg_.chunk_length);
    if (best && best->t <= a - r) return;
    if (lattice) {
      lattice->for_each_in_tube(x, v, a, b, r, [&](const LatticePoint& p) {
        consider(p.position, ScattererId{grain, p.index, 0});
      });
    } else {
      cells_.for_each_in_tube(x, v, a, b, reach, [&](const LatticePoint& cell) {
        const auto pts = poisson_cell_points(cell.index);
        for (std::size_t k = 0; k < pts.size(); ++k)
          consider(pts[k], ScattererId{-1, cell.index, static_cast<std::int64_t>(k)});
      });
    }
    a = b;
  }
}

std::optional<CollisionEvent> MicroSystem::first_collision(const Vec& x, const Vec& v,
                                                           const std::optional<ScattererId>& exclude) const {
  const int d = dim();
  const double r = cfg_.r;
  std::optional<Candidate> best;
  const auto& grains = scene_->grains();

  if (!scene_->periodic()) {
    std::vector<Pending> pending;
    for (std::size_t g = 0; g < grains.size(); ++g) {
      auto iv = grains[g].ray_intersect(x, v, r);
      if (iv && iv->t_in < cutoff_) pending.push_back({iv->t_in, iv->t_out, static_cast<int>(g), Image{}});
    }
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) { return a.t_in < b.t_in; });
    for (const auto& p : pending) {
      if (best && p.t_in >= best->t) break;
      scan_interval(p.grain, Vec::zero(d), x, v, std::max(p.t_in, 0.0), std::min(p.t_out, cutoff_), exclude, best);
    }
  } else {
    const auto& box = *scene_->box();
    const Vec size = box.size();
    Image cell{};
    for (int i = 0; i < d; ++i)
      cell[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor((x[i] - box.lo[i]) / size[i]));
    std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> heap;
    std::set<std::pair<int, Image>> seen;
    const int neighbours = d == 2 ? 9 : 27;
    for (;;) {
      double t_exit = std::numeric_limits<double>::infinity();
      int axis = -1;
      for (int i = 0; i < d; ++i) {
        if (v[i] == 0.0) continue;
        const auto k = static_cast<double>(cell[static_cast<std::size_t>(i)] + (v[i] > 0.0 ? 1 : 0));
        const double t = (box.lo[i] + k * size[i] - x[i]) / v[i];
        if (t < t_exit) {
          t_exit = t;
          axis = i;
        }
      }
      for (int n = 0; n < neighbours; ++n) {
        Image image = cell;
        int code = n;
        for (int i = 0; i < d; ++i) {
          image[static_cast<std::size_t>(i)] += code % 3 - 1;
          code /= 3;
        }
        for (std::size_t g = 0; g < grains.size(); ++g) {
          if (!seen.insert({static_cast<int>(g), image}).second) continue;
          auto iv = grains[g].ray_intersect(x - scene_->image_shift(image), v, r);
          if (iv && iv->t_in < cutoff_) heap.push({iv->t_in, iv->t_out, static_cast<int>(g), image});
        }
      }
      while (!heap.empty() && heap.top().t_in <= t_exit) {
        const Pending p = heap.top();
        heap.pop();
        if (best && p.t_in >= best->t) continue;
        scan_interval(p.grain, scene_->image_shift(p.image), x, v, std::max(p.t_in, 0.0), std::min(p.t_out, cutoff_),
                      exclude, best);
      }
      if (best && best->t <= t_exit) break;
      if (t_exit >= cutoff_ || axis < 0) break;
      cell[static_cast<std::size_t>(axis)] += v[axis] > 0.0 ? 1 : -1;
    }
  }

  if (!best) return std::nullopt;
  CollisionEvent ev;
  ev.time = best->t;
  ev.centre = best->centre;
  ev.position = x + v * best->t;
  ev.impact_point = (ev.position - ev.centre).normalized();
  ev.position = ev.centre + ev.impact_point * r;
  ev.grain = best->grain;
  ev.id = best->id;
  ev.v_in = v;
  ev.v_out = reflect(v, ev.impact_point);
  ev.v_out /= ev.v_out.norm();
  return ev;
}

Trajectory MicroSystem::trajectory(const Vec& x0, const Vec& v0, double t_max,
                                   const std::optional<ScattererId>& start_on) const {
  if (!(t_max > 0.0)) throw std::invalid_argument("trajectory: t_max must be positive");
  Trajectory tr;
  Vec x = x0, v = v0;
  std::optional<ScattererId> exclude = start_on;
  double t = 0.0;
  for (;;) {
    auto ev = first_collision(x, v, exclude);
    if (!ev) {
      tr.escaped = true;
      tr.end_time = t_max;
      return tr;
    }
    if (t + ev->time > t_max) {
      tr.end_time = t_max;
      return tr;
    }
    t += ev->time;
    x = ev->position;
    v = ev->v_out;
    exclude = ev->id;
    tr.events.push_back(std::move(*ev));
    if (tr.events.size() > 10'000'000) throw std::runtime_error("trajectory: more than 1e7 collisions");
  }
}

bool MicroSystem::covered(const Vec& x) const {
  const int d = dim();
  const double r = cfg_.r;
  const Vec axis = Vec::unit(d, 0);
  const double reach = r + cell_size_ * std::sqrt(static_cast<double>(d)) / 2.0;
  auto near_grain = [&](const ConvexGrain& g, const Vec& p) {
    return std::all_of(g.faces().begin(), g.faces().end(),
                       [&](const Halfspace& h) { return p.dot(h.normal) < h.offset + r; });
  };
  std::vector<Image> images{Image{}};
  if (scene_->periodic()) {
    const auto& box = *scene_->box();
    Image cell{};
    for (int i = 0; i < d; ++i)
      cell[static_cast<std::size_t>(i)] =
          static_cast<std::int64_t>(std::floor((x[i] - box.lo[i]) / (box.hi[i] - box.lo[i])));
    images.clear();
    const int neighbours = d == 2 ? 9 : 27;
    for (int n = 0; n < neighbours; ++n) {
      Image image = cell;
      int code = n;
      for (int i = 0; i < d; ++i) {
        image[static_cast<std::size_t>(i)] += code % 3 - 1;
        code /= 3;
      }
      images.push_back(image);
    }
  }
  bool hit = false;
  for (const auto& image : images) {
    const Vec shift = scene_->image_shift(image);
    for (std::size_t g = 0; g < scene_->grains().size() && !hit; ++g) {
      const ConvexGrain& shape = scene_->grains()[g];
      if (!near_grain(shape, x - shift)) continue;
      auto check = [&](const Vec& centre) {
        if (shape.contains(centre - shift) && (centre - x).norm2() < r * r) hit = true;
      };
      if (const auto& lattice = lattices_[g]) {
        lattice->for_each_in_tube(x, axis, 0.0, 0.0, r, [&](const LatticePoint& p) { check(p.position); });
      } else {
        cells_.for_each_in_tube(x, axis, 0.0, 0.0, reach, [&](const LatticePoint& cell) {
          for (const auto& p : poisson_cell_points(cell.index)) check(p);
        });
      }
    }
    if (hit) return true;
  }
  return false;
}

std::pair<ScattererId, Vec> MicroSystem::nearest_scatterer(int g, const Vec& x) const {
  const ScaledGrainLattice& l = grain_lattice(g);
  const Vec c = l.coordinates(x);
  LatticeIndex k{};
  for (int i = 0; i < dim(); ++i) k[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::llround(c[i]));
  return {ScattererId{g, k, 0}, l.point(k)};
}

// --- direction laws and offsets ---------------------------------------------

Vec DirectionLaw::sample(Rng& rng, int dim) const {
  if (kind == Kind::uniform) return rng.unit_vector(dim);
  const Mat back = frame(axis).transpose();
  if (dim == 2) {
    const double a = rng.uniform(-half_angle, half_angle);
    return Vec{std::cos(a), std::sin(a)} * back;
  }
  const double c = rng.uniform(std::cos(half_angle), 1.0);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  return Vec{c, s * std::cos(phi), s * std::sin(phi)} * back;
}

std::vector<std::pair<Vec, double>> DirectionLaw::quadrature(int dim, int n) const {
  std::vector<std::pair<Vec, double>> nodes;
  const bool cap = kind == Kind::cap;
  const Mat back = cap ? frame(axis).transpose() : Mat::identity(dim);
  if (dim == 2) {
    const double lo = cap ? -half_angle : 0.0;
    const double hi = cap ? half_angle : 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
      const double a = lo + (hi - lo) * (i + 0.5) / n;
      nodes.emplace_back(Vec{std::cos(a), std::sin(a)} * back, 1.0 / n);
    }
    return nodes;
  }
  // Equal-area grid: midpoints in cos(theta) and phi.
  const int nc = std::max(1, static_cast<int>(std::round(std::sqrt(n / 2.0))));
  const int np = 2 * nc;
  const double c_lo = cap ? std::cos(half_angle) : -1.0;
  for (int i = 0; i < nc; ++i) {
    const double c = c_lo + (1.0 - c_lo) * (i + 0.5) / nc;
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    for (int j = 0; j < np; ++j) {
      const double phi = 2.0 * std::numbers::pi * (j + 0.5) / np;
      nodes.emplace_back(Vec{c, s * std::cos(phi), s * std::sin(phi)} * back, 1.0 / (nc * np));
    }
  }
  return nodes;
}

Vec StartOffset::beta(const Vec& v) const {
  if (kind == Kind::forward) return v;
  const int d = v.dim();
  const double o2 = offset.norm2();
  if (o2 > 1.0) throw std::domain_error("StartOffset: offset outside the unit ball");
  Vec local(d);
  local[0] = std::sqrt(1.0 - o2);
  for (int i = 1; i < d; ++i) local[i] = offset[i - 1];
  return local * frame(v).transpose();
}

Vec StartOffset::exit_parameter(const Vec& v) const { return perp(beta(v) * frame(v)); }

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(64);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + 64);
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<FreePathSample> sample_tau1_distribution(const MicroSystem& system, const FreePathRequest& request) {
  const Scene& scene = system.scene();
  const int d = scene.dim();
  const double eps = system.epsilon();
  const double r = system.r();
  Vec start = request.base + request.q * eps;
  std::optional<ScattererId> exclude;
  if (request.on_scatterer) {
    int grain = -1;
    for (std::size_t g = 0; g < scene.grains().size(); ++g)
      if (scene.grains()[g].contains(request.base)) grain = static_cast<int>(g);
    if (grain < 0 || scene.media()[static_cast<std::size_t>(grain)].kind != MediumKind::crystal)
      throw std::invalid_argument("sample_tau1_distribution: scatterer start needs a base point in a crystal grain");
    auto [id, centre] = system.nearest_scatterer(grain, start);
    exclude = id;
    start = centre;
  }
  const bool fresh = request.fresh_poisson &&
                     std::any_of(scene.media().begin(), scene.media().end(),
                                 [](const Medium& m) { return m.kind == MediumKind::poisson; });
  std::vector<FreePathSample> out(request.samples);
  parallel_for(request.samples, request.threads, [&](std::size_t i) {
    Rng rng = Rng::substream(system.config().seed, request.stream, i);
    FreePathSample s;
    s.v = request.law.sample(rng, d);
    const Vec x0 = request.on_scatterer ? start + request.start.beta(s.v) * r : start;
    std::optional<MicroSystem> local;
    if (fresh) {
      do local.emplace(system.with_poisson_seed(rng.bits()));
      while (!request.on_scatterer && local->covered(x0));
    }
    auto ev = (local ? *local : system).first_collision(x0, s.v, exclude);
    if (!ev) {
      s.escaped = true;
      s.tau = std::numeric_limits<double>::infinity();
      s.impact = Vec(d);
    } else {
      s.tau = ev->time;
      s.grain = ev->grain;
      s.impact = -(ev->impact_point * frame(s.v));
    }
    out[i] = s;
  });
  return out;
}

}  // namespace polyxport
