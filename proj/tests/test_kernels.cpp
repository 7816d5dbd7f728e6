#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "polyxport/kernels.hpp"
#include "polyxport/rng.hpp"

namespace polyxport {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;

TEST(Upsilon, PiecewiseValues) {
  EXPECT_EQ(upsilon(-1.0), 0.0);
  EXPECT_EQ(upsilon(0.5), 0.5);
  EXPECT_EQ(upsilon(2.0), 1.0);
  EXPECT_EQ(upsilon(0.0), 0.0);
  EXPECT_EQ(upsilon(1.0), 1.0);
}

TEST(Phi0Planar, ConstantOnExplicitRange) {
  EXPECT_NEAR(phi0_2d(0.4, 0.9, -0.3), 6.0 / kPi2, 1e-15);
  EXPECT_NEAR(phi0_2d(0.4, 0.9, -0.3), 0.607927, 1e-6);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double xi = 0.5 * rng.uniform_pos();
    EXPECT_NEAR(phi0_2d(xi, rng.uniform(-1, 1), rng.uniform(-1, 1)), 6.0 / kPi2, 1e-15);
  }
}

TEST(Phi0Planar, BeyondExplicitRange) {
  EXPECT_NEAR(phi0_2d(1.0, 0.5, 0.1), 6.0 / kPi2 / 6.0, 1e-15);
  EXPECT_NEAR(phi0_2d(1.0, 0.5, 0.1), 0.101321, 1e-6);
  EXPECT_EQ(phi0_2d(10.0, 0.5, 0.4), 0.0);
}

TEST(Phi0Planar, SwapSymmetry) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double xi = rng.uniform(0.01, 3.0), w = rng.uniform(-1, 1), z = rng.uniform(-1, 1);
    EXPECT_EQ(phi0_2d(xi, w, z), phi0_2d(xi, z, w));
  }
}

TEST(Phi0Planar, OppositeParametersUseNumeratorSign) {
  // For w + z = 0 the ratio tends to +infinity or -infinity with the numerator.
  EXPECT_NEAR(phi0_2d(0.6, 0.3, -0.3), 6.0 / kPi2, 1e-15);
  EXPECT_EQ(phi0_2d(0.9, 0.3, -0.3), 0.0);
  EXPECT_NEAR(phi0_2d(0.9, 0.3, -0.3 + 1e-13), 0.0, 1e-10);
  EXPECT_THROW(phi0_2d(0.0, 0.1, 0.1), std::domain_error);
}

TEST(DiskCutArea, KnownValues) {
  EXPECT_NEAR(disk_cut_area(0.0), kPi / 2, 1e-15);
  EXPECT_NEAR(disk_cut_area(1.0 - 1e-12), kPi, 1e-5);
  EXPECT_NEAR(disk_cut_area(0.5), kPi - kPi / 3 + 0.5 * std::sqrt(0.75), 1e-15);
  EXPECT_NEAR(disk_cut_area(0.5), 2.527408, 1e-6);
  EXPECT_THROW(disk_cut_area(-0.1), std::domain_error);
  EXPECT_THROW(disk_cut_area(1.5), std::domain_error);
}

TEST(DiskCutArea, MatchesChordIntegral) {
  for (double t : {0.0, 0.1, 0.37, 0.5, 0.81, 0.99}) {
    const double area =
        testing::integrate_1d([](double s) { return 2.0 * std::sqrt(std::max(0.0, 1.0 - s * s)); }, -1.0, t);
    EXPECT_NEAR(disk_cut_area(t), area, 1e-9) << t;
  }
}

TEST(CutAreaIntegral, Endpoints) {
  EXPECT_NEAR(cut_area_integral(0.0), kPi * (4 * kPi + 3 * std::sqrt(3.0)) / 16, 1e-9);
  EXPECT_NEAR(cut_area_integral(1.0), 5 * kPi2 / 16 + 1, 1e-9);
  EXPECT_NEAR(cut_area_integral(0.0), 3.487663, 1e-6);
  EXPECT_NEAR(cut_area_integral(1.0), 4.084251, 1e-6);
}

TEST(CutAreaIntegral, StrictlyIncreasing) {
  double prev = cut_area_integral(0.0);
  for (int i = 1; i <= 200; ++i) {
    const double g = cut_area_integral(i / 200.0);
    EXPECT_GT(g, prev);
    prev = g;
  }
}

TEST(CutAreaIntegral, HalfDiskIntegralOfCutArea) {
  Rng rng(3);
  for (int i = 0; i < 6; ++i) {
    const double r = i == 0 ? 1.0 : rng.uniform();
    const Vec w{r, 0.0};
    const double oracle =
        testing::integrate_disk([&](const Vec& z) { return disk_cut_area(std::min((w - z).norm() / 2, 1.0)); });
    EXPECT_NEAR(2.0 * cut_area_integral(r), oracle, 1e-8) << r;
  }
}

TEST(CutAreaIntegral, BallAverageMatchesPathDensityCoefficient) {
  // Integrating the exit survival over the disk gives the cubic free path density,
  // which fixes the disk integral of G.
  const double integral = testing::integrate_1d(
      [](double rho) { return 2.0 * kPi * rho * cut_area_integral(rho); }, 0.0, 1.0, 1e-11);
  EXPECT_NEAR(integral, kPi * (3 * kPi2 + 16) / 12, 1e-8);
}

TEST(Phi0Spatial, Values) {
  const Vec o{0.0, 0.0};
  EXPECT_NEAR(phi0_3d(1e-14, o, Vec{0.3, 0.4}), 1.0 / kZeta3, 1e-13);
  EXPECT_NEAR(1.0 / kZeta3, 0.831907, 1e-6);
  EXPECT_NEAR(phi0_3d(0.25, Vec{0.2, 0.1}, Vec{0.2, 0.1}), (1 - 6 / kPi2 * (kPi / 2) * 0.25) / kZeta3, 1e-15);
  EXPECT_NEAR(phi0_3d(0.25, Vec{0.2, 0.1}, Vec{0.2, 0.1}), 0.633304, 1e-6);
  EXPECT_THROW(phi0_3d(0.3, o, o), std::domain_error);
}

TEST(KernelModelTest, PlanarPolynomials) {
  const auto m = KernelModel::crystal(2);
  EXPECT_EQ(m.sigma_bar(), 2.0);
  EXPECT_EQ(m.path_density(0.0), 2.0);
  EXPECT_EQ(m.survival(0.0), 1.0);
  EXPECT_EQ(m.exit_survival(0.0, Vec{0.3}), 1.0);
  EXPECT_NEAR(m.survival(0.5), 3 / kPi2, 1e-15);
  EXPECT_NEAR(m.survival(0.5), 0.303964, 1e-6);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double xi = 0.5 * rng.uniform();
    EXPECT_DOUBLE_EQ(m.path_density(xi), 2 - 24 / kPi2 * xi);
    EXPECT_DOUBLE_EQ(m.survival(xi), 1 - 2 * xi + 12 / kPi2 * xi * xi);
    EXPECT_DOUBLE_EQ(m.exit_survival(xi, Vec{rng.uniform(-1, 1)}), 1 - 12 / kPi2 * xi);
  }
}

TEST(KernelModelTest, SpatialPolynomials) {
  const auto m = KernelModel::crystal(3);
  EXPECT_NEAR(m.sigma_bar(), kPi, 0);
  EXPECT_NEAR(m.path_density(0.0), kPi, 1e-15);
  const double g1 = 5 * kPi2 / 16 + 1;
  EXPECT_NEAR(m.exit_survival(0.25, Vec{1.0, 0.0}), 1 - kPi * 0.25 / kZeta3 + 6 * g1 * 0.0625 / (kPi2 * kZeta3),
              1e-10);
  EXPECT_NEAR(m.exit_survival(0.25, Vec{1.0, 0.0}), 0.475719, 1e-6);
  EXPECT_THROW(m.survival(0.26), std::domain_error);
  EXPECT_THROW(m.exit_survival(0.1, Vec{1.0, 0.5}), std::domain_error);
  EXPECT_THROW(m.exit_survival(0.1, Vec{0.5}), std::invalid_argument);
}

TEST(KernelModelTest, DerivativeChains) {
  // path density = -d survival, exit path density = -d exit survival,
  // path density = disk integral of exit survival.
  Rng rng(5);
  for (int d : {2, 3}) {
    const auto m = KernelModel::crystal(d);
    for (int i = 0; i < 20; ++i) {
      const double xi = m.max_xi() * rng.uniform(0.05, 0.95);
      const Vec w = rng.in_ball(d - 1);
      EXPECT_NEAR(-testing::derivative([&](double s) { return m.survival(s); }, xi, 1e-3), m.path_density(xi), 1e-9);
      EXPECT_NEAR(-testing::derivative([&](double s) { return m.exit_survival(s, w); }, xi, 1e-3),
                  m.exit_path_density(xi, w), 1e-8);
    }
    const double xi = 0.6 * m.max_xi();
    EXPECT_NEAR(testing::integrate_ball(d - 1, [&](const Vec& w) { return m.exit_survival(xi, w); }),
                m.path_density(xi), 1e-8);
  }
}

TEST(KernelModelTest, TransitionIntegratesToExitPathDensity) {
  Rng rng(6);
  for (int d : {2, 3}) {
    const auto m = KernelModel::crystal(d);
    for (int i = 0; i < 4; ++i) {
      const double xi = m.max_xi() * rng.uniform_pos();
      const Vec w = rng.in_ball(d - 1);
      EXPECT_NEAR(testing::integrate_ball(d - 1, [&](const Vec& z) { return m.transition_density(xi, w, z); }),
                  m.exit_path_density(xi, w), 1e-7);
    }
  }
}

TEST(KernelModelTest, PoissonKernels) {
  for (int d : {2, 3}) {
    const auto m = KernelModel::poisson(d);
    const double sb = m.sigma_bar();
    for (double xi : {0.0, 0.3, 2.0, 17.0}) {
      const Vec w(d - 1), z = Vec::unit(d - 1, 0) * 0.5;
      EXPECT_DOUBLE_EQ(m.transition_density(xi, w, z), std::exp(-sb * xi));
      EXPECT_DOUBLE_EQ(m.exit_survival(xi, w), std::exp(-sb * xi));
      EXPECT_DOUBLE_EQ(m.exit_path_density(xi, w), sb * std::exp(-sb * xi));
      EXPECT_DOUBLE_EQ(m.path_density(xi), sb * std::exp(-sb * xi));
      EXPECT_DOUBLE_EQ(m.survival(xi), std::exp(-sb * xi));
    }
    EXPECT_TRUE(m.parameter_free());
  }
}

TEST(KernelModelTest, TailBound) {
  for (int d : {2, 3}) {
    const auto m = KernelModel::crystal(d);
    EXPECT_EQ(m.tail_bound(0.0), 1.0);
    double prev = 1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double xi = m.max_xi() * i / 1000.0;
      EXPECT_LE(m.survival(xi), m.tail_bound(xi));
      EXPECT_LE(m.tail_bound(xi), prev);
      prev = m.tail_bound(xi);
    }
  }
  EXPECT_NEAR(KernelModel::crystal(2).tail_bound(0.5), std::exp(-0.5), 1e-15);
}

TEST(KernelModelTest, ParameterFreedom) {
  EXPECT_TRUE(KernelModel::crystal(2).parameter_free());
  EXPECT_FALSE(KernelModel::crystal(3).parameter_free());
}

}  // namespace
}  // namespace polyxport
