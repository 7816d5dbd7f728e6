#include "polyxport/flight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <functional>
#include <stdexcept>
#include <string>

#include "polyxport/microsim.hpp"
#include "polyxport/scattering.hpp"
#include "polyxport/stats.hpp"

namespace polyxport {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Solves factor(s) = y on a segment, where factor is the generic survival of
// the grain kernel, or its exit survival on the first segment after a collision.
double invert_factor(const KernelModel& m, bool after_collision, double y, double len) {
  double s;
  if (m.is_poisson()) {
    s = -std::log(y) / m.sigma_bar();
  } else if (m.medium() == KernelMedium::crystal2d) {
    const double a = 12.0 / (std::numbers::pi * std::numbers::pi);
    const double q = 1.0 - y;
    s = after_collision ? q / a : q / (1.0 + std::sqrt(1.0 - a * q));
  } else {
    throw std::logic_error("invert_factor: kernel depends on impact parameters");
  }
  return std::clamp(s, 0.0, len);
}

double segment_factor(const KernelModel& m, bool after_collision, double len, const Vec& zero) {
  return after_collision ? m.exit_survival(len, zero) : m.survival(len);
}

// Itinerary walked on demand and kept for repeated lookups by covered length.
class CoveredWalk {
 public:
  CoveredWalk(const Scene& scene, const Vec& x, const Vec& v, double horizon) : cursor_(scene, x, v, horizon) {}

  /// Flight length at which the covered (in-grain) length reaches u.
  std::optional<double> locate(double u) {
    std::size_t i = 0;
    double covered = 0.0;
    while (true) {
      if (i == segments_.size()) {
        auto s = cursor_.next();
        if (!s) return std::nullopt;
        segments_.push_back(*s);
      }
      const auto& s = segments_[i];
      if (u < covered + s.length()) return s.entry + (u - covered);
      covered += s.length();
      ++i;
    }
  }

  double total() {
    while (auto s = cursor_.next()) segments_.push_back(*s);
    double covered = 0.0;
    for (const auto& s : segments_) covered += s.length();
    return covered;
  }

 private:
  ItineraryCursor cursor_;
  std::vector<ItinerarySegment> segments_;
};

}  // namespace

FlightProcess::FlightProcess(const PolyKernel& kernel, SamplerKind kind) : kernel_(&kernel) {
  switch (kind) {
    case SamplerKind::automatic:
      factorized_ = kernel.parameter_free();
      break;
    case SamplerKind::factorized:
      if (!kernel.parameter_free())
        throw std::invalid_argument("FlightProcess: factorized sampling needs parameter-free kernels");
      factorized_ = true;
      break;
    case SamplerKind::rejection:
      factorized_ = false;
      break;
  }
}

std::optional<double> FlightProcess::invert_survival(const Vec& x, const Vec& v, double u, const Vec* exit) const {
  const PolyKernel& k = *kernel_;
  const Vec zero(k.dim() - 1);
  const double horizon = k.scene().periodic() ? k.walk_cutoff() : kInf;
  ItineraryCursor cursor(k.scene(), x, v, horizon);
  double prod = 1.0;
  bool first = true;
  while (auto s = cursor.next()) {
    const bool after_collision = exit != nullptr && first;
    if (after_collision && s->entry != 0.0) return std::nullopt;
    const KernelModel& m = k.model(s->grain_id);
    const double end = prod * segment_factor(m, after_collision, s->length(), zero);
    if (end < u) return s->entry + invert_factor(m, after_collision, u / prod, s->length());
    prod = end;
    first = false;
  }
  return std::nullopt;
}

std::optional<PathDraw> FlightProcess::rejection(const Vec& x, const Vec& v, const Vec* exit, Rng& rng,
                                                 SamplerStats* stats) const {
  const PolyKernel& k = *kernel_;
  const int d = k.dim();
  const double escape = exit ? k.survival_from_exit(x, v, kInf, *exit) : k.survival(x, v, kInf);
  if (rng.uniform() < escape) return std::nullopt;

  const double rate = k.envelope_rate();
  const double constant = k.envelope_constant();
  const bool periodic = k.scene().periodic();
  CoveredWalk walk(k.scene(), x, v, periodic ? k.walk_cutoff() : kInf);
  // Finite scenes: truncate the proposal to the covered length.
  const double mass = periodic ? 1.0 : -std::expm1(-rate * walk.total());
  if (!(mass > 0.0)) return std::nullopt;
  while (true) {
    if (stats) ++stats->proposals;
    const double u = -std::log1p(-mass * rng.uniform()) / rate;
    const Vec b = rng.in_ball(d - 1);
    const double accept = rng.uniform();
    const auto xi = walk.locate(u);
    if (!xi) continue;
    const double target = exit ? k.psi0_full(x, v, *xi, b, *exit) : k.psi_w(x, v, *xi, b);
    const double bound = constant * std::exp(-rate * u);
    if (target > bound * (1.0 + 1e-9)) throw std::logic_error("FlightProcess: envelope violated");
    if (accept * bound < target) {
      if (stats) ++stats->accepted;
      return PathDraw{*xi, outgoing_velocity(v, b)};
    }
  }
}

std::optional<PathDraw> FlightProcess::sample_path(const Vec& x, const Vec& v, Rng& rng, SamplerStats* stats) const {
  if (!factorized_) return rejection(x, v, nullptr, rng, stats);
  const auto xi = invert_survival(x, v, rng.uniform_pos(), nullptr);
  const Vec b = rng.in_ball(kernel_->dim() - 1);
  if (!xi) return std::nullopt;
  return PathDraw{*xi, outgoing_velocity(v, b)};
}

std::optional<PathDraw> FlightProcess::sample_collision(const Vec& v_prev, const Vec& x_col, const Vec& v, Rng& rng,
                                                        SamplerStats* stats) const {
  const Vec z = -exit_param(v, v_prev);
  if (!factorized_) return rejection(x_col, v, &z, rng, stats);
  const auto xi = invert_survival(x_col, v, rng.uniform_pos(), &z);
  const Vec b = rng.in_ball(kernel_->dim() - 1);
  if (!xi) return std::nullopt;
  return PathDraw{*xi, outgoing_velocity(v, b)};
}

ExtendedState FlightProcess::sample_initial(const Vec& x, const Vec& v, Rng& rng) const {
  ExtendedState s;
  s.x = x;
  s.v = v;
  if (auto draw = sample_path(x, v, rng)) {
    s.xi = draw->xi;
    s.v_plus = draw->v_plus;
  } else {
    s.escaped = true;
    s.xi = kInf;
    s.v_plus = v;
  }
  return s;
}

void FlightProcess::evolve(ExtendedState& s, double dt, Rng& rng) const {
  if (!(dt >= 0.0)) throw std::domain_error("evolve: dt must be non-negative");
  double remaining = dt;
  while (!s.escaped && s.xi <= remaining) {
    remaining -= s.xi;
    s.time += s.xi;
    s.x += s.v * s.xi;
    const Vec v_prev = s.v;
    s.v = s.v_plus;
    ++s.collisions;
    if (auto draw = sample_collision(v_prev, s.x, s.v, rng)) {
      s.xi = draw->xi;
      s.v_plus = draw->v_plus;
    } else {
      s.escaped = true;
      s.xi = kInf;
      s.v_plus = s.v;
    }
  }
  s.x += s.v * remaining;
  s.time += remaining;
  if (!s.escaped) s.xi -= remaining;
}

std::pair<Vec, Vec> sample_uniform_start(const Scene& scene, Rng& rng) {
  const int d = scene.dim();
  Vec x(d);
  if (scene.periodic()) {
    const auto& box = *scene.box();
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(box.lo[i], box.hi[i]);
  } else {
    Vec lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      lo[i] = kInf;
      hi[i] = -kInf;
    }
    for (const auto& g : scene.grains())
      for (const auto& p : g.vertices())
        for (int i = 0; i < d; ++i) {
          lo[i] = std::min(lo[i], p[i]);
          hi[i] = std::max(hi[i], p[i]);
        }
    while (true) {
      for (int i = 0; i < d; ++i) x[i] = rng.uniform(lo[i], hi[i]);
      if (std::any_of(scene.grains().begin(), scene.grains().end(),
                      [&](const ConvexGrain& g) { return g.contains(x); }))
        break;
    }
  }
  return {x, rng.unit_vector(d)};
}

Vec wrap_position(const Scene& scene, const Vec& x) {
  if (!scene.periodic()) return x;
  const auto& box = *scene.box();
  Vec out = x;
  for (int i = 0; i < x.dim(); ++i) {
    const double size = box.hi[i] - box.lo[i];
    double t = std::fmod(x[i] - box.lo[i], size);
    if (t < 0.0) t += size;
    out[i] = box.lo[i] + t;
  }
  return out;
}

std::vector<ExtendedState> run_ensemble(const FlightProcess& process, const EnsembleRequest& request,
                                        const std::vector<double>& steps) {
  std::vector<ExtendedState> out(request.particles);
  parallel_for(request.particles, request.threads, [&](std::size_t i) {
    Rng rng = Rng::substream(request.seed, request.stream, i);
    auto [x, v] = sample_uniform_start(process.kernel().scene(), rng);
    ExtendedState s = process.sample_initial(x, v, rng);
    for (double dt : steps) process.evolve(s, dt, rng);
    out[i] = s;
  });
  return out;
}

CollisionHistogram n_collision_histogram(const std::vector<ExtendedState>& ensemble) {
  CollisionHistogram h;
  for (const auto& s : ensemble) {
    const auto n = static_cast<std::size_t>(s.collisions);
    if (h.counts.size() <= n) h.counts.resize(n + 1, 0);
    ++h.counts[n];
    if (s.escaped) ++h.escaped;
    ++h.total;
  }
  return h;
}

double StationarityReport::min_p_value() const {
  double p = 1.0;
  for (const auto& c : stationarity) p = std::min(p, c.p_value);
  for (const auto& c : semigroup) p = std::min(p, c.p_value);
  return p;
}

namespace {

using Marginal = std::pair<std::string, std::function<double(const ExtendedState&)>>;

std::vector<Marginal> state_marginals(const Scene& scene) {
  std::vector<Marginal> out;
  out.emplace_back("xi", [](const ExtendedState& s) { return s.xi; });
  for (const char* which : {"v_plus", "v"}) {
    const bool plus = which[1] == '_';
    auto pick = [plus](const ExtendedState& s) -> const Vec& { return plus ? s.v_plus : s.v; };
    if (scene.dim() == 2) {
      out.emplace_back(std::string(which) + "_angle",
                       [pick](const ExtendedState& s) { return std::atan2(pick(s)[1], pick(s)[0]); });
    } else {
      out.emplace_back(std::string(which) + "_polar_cos", [pick](const ExtendedState& s) { return pick(s)[2]; });
      out.emplace_back(std::string(which) + "_azimuth",
                       [pick](const ExtendedState& s) { return std::atan2(pick(s)[1], pick(s)[0]); });
    }
  }
  for (int i = 0; i < scene.dim(); ++i)
    out.emplace_back("position_" + std::to_string(i),
                     [&scene, i](const ExtendedState& s) { return wrap_position(scene, s.x)[i]; });
  return out;
}

std::vector<MarginalComparison> compare(const Scene& scene, const std::vector<ExtendedState>& a,
                                        const std::vector<ExtendedState>& b) {
  std::vector<MarginalComparison> out;
  for (const auto& [name, f] : state_marginals(scene)) {
    std::vector<double> xa, xb;
    xa.reserve(a.size());
    xb.reserve(b.size());
    for (const auto& s : a) xa.push_back(f(s));
    for (const auto& s : b) xb.push_back(f(s));
    const KsResult ks = ks_two_sample(std::move(xa), std::move(xb));
    out.push_back({name, ks.statistic, ks.p_value});
  }
  return out;
}

}  // namespace

StationarityReport stationarity_test(const FlightProcess& process, const EnsembleRequest& request, double t,
                                     double split) {
  if (!(split >= 0.0 && split <= t)) throw std::invalid_argument("stationarity_test: split must lie in [0, t]");
  const Scene& scene = process.kernel().scene();
  auto with_stream = [&](std::uint64_t k) {
    EnsembleRequest r = request;
    r.stream = request.stream * 4 + k;
    return r;
  };
  const auto fresh = run_ensemble(process, with_stream(0), {});
  const auto evolved = run_ensemble(process, with_stream(1), {t});
  const auto split_run = run_ensemble(process, with_stream(2), {split, t - split});
  StationarityReport report;
  report.time = t;
  report.stationarity = compare(scene, fresh, evolved);
  report.semigroup = compare(scene, split_run, evolved);
  return report;
}

}  // namespace polyxport
