#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "polyxport/flight.hpp"
#include "polyxport/scattering.hpp"
#include "polyxport/stats.hpp"
#include "support.hpp"

namespace polyxport {
namespace {

using testing::crystal_medium;
using testing::poisson_medium;

constexpr double kInf = std::numeric_limits<double>::infinity();

Scene poisson_tiling(int d) {
  return Scene(d, {ConvexGrain::box(0, Vec::zero(d), testing::filled(d, 1.0))}, {poisson_medium()},
               PeriodicBox{Vec::zero(d), testing::filled(d, 1.0)});
}

Scene planar_crystal_pair() {
  return Scene(2, {ConvexGrain::box(0, Vec{0, 0}, Vec{0.3, 0.3}), ConvexGrain::box(1, Vec{0.35, 0}, Vec{0.65, 0.3})},
               {crystal_medium(2), poisson_medium()});
}

Scene spatial_crystal_pair() {
  return Scene(3,
               {ConvexGrain::box(0, Vec{0, 0, 0}, Vec{0.14, 0.14, 0.14}),
                ConvexGrain::box(1, Vec{0.14, 0, 0}, Vec{0.28, 0.14, 0.14})},
               {crystal_medium(3), crystal_medium(3)});
}

double angle_of(const Vec& v) { return std::atan2(v[1], v[0]); }

TEST(FlightProcessTest, RegimeSelection) {
  const Scene planar = planar_crystal_pair();
  const PolyKernel kp(planar);
  EXPECT_TRUE(FlightProcess(kp).factorized());
  EXPECT_FALSE(FlightProcess(kp, SamplerKind::rejection).factorized());
  const Scene spatial = spatial_crystal_pair();
  const PolyKernel ks(spatial);
  EXPECT_FALSE(FlightProcess(ks).factorized());
  EXPECT_THROW(FlightProcess(ks, SamplerKind::factorized), std::invalid_argument);
}

TEST(FlightProcessTest, PoissonTilingIsExponential) {
  for (int d : {2, 3}) {
    const Scene scene = poisson_tiling(d);
    const PolyKernel k(scene);
    const FlightProcess fp(k);
    Rng rng(1);
    std::vector<double> xs;
    for (int i = 0; i < 20000; ++i) {
      const auto draw = fp.sample_path(testing::filled(d, 0.3), Vec::unit(d, 0), rng);
      ASSERT_TRUE(draw);
      xs.push_back(draw->xi);
    }
    const double sb = unit_ball_volume(d);
    EXPECT_GT(ks_one_sample(xs, [&](double t) { return 1 - std::exp(-sb * t); }).p_value, 0.001);
  }
}

TEST(FlightProcessTest, PathLawMatchesSurvival) {
  for (SamplerKind kind : {SamplerKind::factorized, SamplerKind::rejection}) {
    const Scene scene = planar_crystal_pair();
    const PolyKernel k(scene);
    const FlightProcess fp(k, kind);
    Rng rng(2);
    const Vec x{0.1, 0.1}, v = Vec{0.95, 0.1}.normalized();
    std::vector<double> xs;
    std::size_t escaped = 0;
    for (int i = 0; i < 20000; ++i) {
      if (auto draw = fp.sample_path(x, v, rng))
        xs.push_back(draw->xi);
      else
        ++escaped;
    }
    const auto r = ks_one_sample(xs, [&](double t) { return 1 - k.survival(x, v, t); }, escaped);
    EXPECT_GT(r.p_value, 0.001);
  }
}

TEST(FlightProcessTest, EscapeProbabilityMatchesQuadrature) {
  const Scene scene = planar_crystal_pair();
  const PolyKernel k(scene);
  const FlightProcess fp(k, SamplerKind::rejection);
  Rng rng(3);
  const Vec x{0.05, 0.05}, v = Vec{1.0, 0.2}.normalized();
  const int n = 20000;
  int escaped = 0;
  for (int i = 0; i < n; ++i) escaped += fp.sample_path(x, v, rng) ? 0 : 1;
  const double p = k.survival(x, v, kInf);
  ASSERT_GT(p, 0.05);
  EXPECT_NEAR(static_cast<double>(escaped) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(FlightProcessTest, FactorizedAndRejectionAgree) {
  const Scene scene = planar_crystal_pair();
  const PolyKernel k(scene);
  const FlightProcess fa(k, SamplerKind::factorized), fb(k, SamplerKind::rejection);
  Rng ra(4), rb(5);
  const Vec v_prev = Vec{0.2, 1.0}.normalized(), v = Vec{1.0, -0.3}.normalized(), x{0.12, 0.17};
  std::vector<double> xa, xb, aa, ab;
  for (int i = 0; i < 20000; ++i) {
    if (auto d = fa.sample_collision(v_prev, x, v, ra)) {
      xa.push_back(d->xi);
      aa.push_back(angle_of(d->v_plus));
    }
    if (auto d = fb.sample_collision(v_prev, x, v, rb)) {
      xb.push_back(d->xi);
      ab.push_back(angle_of(d->v_plus));
    }
  }
  EXPECT_GT(ks_two_sample(xa, xb).p_value, 0.001);
  EXPECT_GT(ks_two_sample(aa, ab).p_value, 0.001);
}

TEST(FlightProcessTest, SpatialCollisionLawMatchesExitSurvival) {
  // The flight length marginal after a collision is the exit-parameter survival at -s.
  const Scene scene = spatial_crystal_pair();
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  Rng rng(6);
  const Vec v_prev = Vec{-0.3, 0.9, 0.2}.normalized(), v = Vec{0.9, 0.2, 0.3}.normalized();
  const Vec x{0.02, 0.03, 0.05};
  const Vec z = -exit_param(v, v_prev);
  std::vector<double> xs;
  std::size_t escaped = 0;
  SamplerStats stats;
  for (int i = 0; i < 20000; ++i) {
    if (auto d = fp.sample_collision(v_prev, x, v, rng, &stats)) {
      xs.push_back(d->xi);
    } else {
      ++escaped;
    }
  }
  EXPECT_GT(stats.accepted, 0u);
  EXPECT_GT(ks_one_sample(xs, [&](double t) { return 1 - k.survival_from_exit(x, v, t, z); }, escaped).p_value,
            0.001);
}

TEST(FlightProcessTest, PoissonCollisionsAreMemoryless) {
  const Scene scene = poisson_tiling(2);
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  Rng ra(7), rb(8);
  const Vec v{1, 0}, x{0.5, 0.5};
  std::vector<double> xa, xb;
  for (int i = 0; i < 10000; ++i) {
    xa.push_back(fp.sample_collision(Vec{0, 1}, x, v, ra)->xi);
    xb.push_back(fp.sample_collision(Vec{-0.99, 0.141}.normalized(), x, v, rb)->xi);
  }
  EXPECT_GT(ks_two_sample(xa, xb).p_value, 0.001);
}

TEST(FlightProcessTest, ImpactParametersUniformInPlanarRegime) {
  const Scene scene = planar_crystal_pair();
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  Rng rng(9);
  const Vec v{0.0, 1.0}, x{0.1, 0.05};
  std::vector<double> counts(16, 0.0), probs(16, 1.0 / 16);
  for (int i = 0; i < 20000; ++i) {
    const auto d = fp.sample_path(x, v, rng);
    if (!d) continue;
    const double b = impact_param(v, d->v_plus)[0];
    counts[std::clamp(static_cast<int>((b + 1) / 2 * 16), 0, 15)] += 1;
  }
  double total = 0;
  for (double c : counts) total += c;
  EXPECT_GT(chi_square_gof(counts, probs).p_value, 0.001);
  EXPECT_GT(total, 1000);
}

TEST(Evolve, ShortStepIsTranslation) {
  const Scene scene = poisson_tiling(2);
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  Rng rng(10);
  ExtendedState s = fp.sample_initial(Vec{0.5, 0.5}, Vec{0.6, 0.8}, rng);
  const ExtendedState before = s;
  const double dt = 0.5 * s.xi;
  fp.evolve(s, dt, rng);
  EXPECT_EQ(s.collisions, 0);
  EXPECT_NEAR(s.xi, before.xi - dt, 1e-15);
  EXPECT_LT((s.x - (before.x + before.v * dt)).norm(), 1e-15);
  EXPECT_EQ(s.v_plus, before.v_plus);
  EXPECT_THROW(fp.evolve(s, -1.0, rng), std::domain_error);
}

TEST(Evolve, CollisionCountIsPoissonOnPoissonTiling) {
  const Scene scene = poisson_tiling(2);
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  EnsembleRequest req;
  req.particles = 20000;
  req.seed = 11;
  const double t = 1.5;
  const auto ensemble = run_ensemble(fp, req, {t});
  const auto h = n_collision_histogram(ensemble);
  EXPECT_EQ(h.escaped, 0u);
  EXPECT_EQ(h.total, req.particles);
  const double mean = 2.0 * t;
  std::vector<double> observed(h.counts.begin(), h.counts.end()), probs;
  double p = std::exp(-mean);
  for (std::size_t n = 0; n < observed.size(); ++n) {
    probs.push_back(p);
    p *= mean / static_cast<double>(n + 1);
  }
  double tail = 1.0;
  for (double q : probs) tail -= q;
  observed.push_back(0.0);
  probs.push_back(std::max(tail, 0.0));
  EXPECT_GT(chi_square_gof(observed, probs).p_value, 0.001);
}

TEST(Evolve, ZeroTimeLeavesEveryoneUncollided) {
  const Scene scene = planar_crystal_pair();
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  EnsembleRequest req;
  req.particles = 500;
  const auto h = n_collision_histogram(run_ensemble(fp, req, {}));
  ASSERT_FALSE(h.counts.empty());
  EXPECT_EQ(h.counts[0], 500u);
}

TEST(Ensemble, DeterministicAcrossThreadCounts) {
  const Scene scene(2, {ConvexGrain::box(0, Vec{0, 0}, Vec{0.3, 0.3}), ConvexGrain::box(1, Vec{0.3, 0}, Vec{0.6, 0.3})},
                    {crystal_medium(2), poisson_medium()}, PeriodicBox{Vec{0, 0}, Vec{0.6, 0.3}});
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  EnsembleRequest req;
  req.particles = 2000;
  req.seed = 12;
  const auto a = run_ensemble(fp, req, {1.0, 0.5});
  req.threads = 3;
  const auto b = run_ensemble(fp, req, {1.0, 0.5});
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].xi, b[i].xi);
    EXPECT_EQ(a[i].collisions, b[i].collisions);
  }
}

TEST(Ensemble, WrapPosition) {
  const Scene scene = poisson_tiling(2);
  const Vec w = wrap_position(scene, Vec{2.25, -0.25});
  EXPECT_NEAR(w[0], 0.25, 1e-15);
  EXPECT_NEAR(w[1], 0.75, 1e-15);
}

}  // namespace
}  // namespace polyxport
