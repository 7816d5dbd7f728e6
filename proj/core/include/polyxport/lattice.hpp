#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "polyxport/vec.hpp"

namespace polyxport {

/// Exact rational number with 64-bit numerator and positive denominator.
/// Arithmetic is checked; overflow throws std::overflow_error.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t p, std::int64_t q);
  /// Parses "p/q", an integer, or a finite decimal such as "-0.625".
  static Rational parse(std::string_view text);

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_zero() const { return num == 0; }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

Rational operator+(const Rational& a, const Rational& b);
Rational operator-(const Rational& a, const Rational& b);
Rational operator*(const Rational& a, const Rational& b);
Rational operator/(const Rational& a, const Rational& b);

/// A matrix given as scale * R with R rational. `scale` is the real
/// normalising factor (for SL(d,R) input, det(R)^(-1/d) up to sign).
struct ExactMatrix {
  int dim = 0;
  std::vector<Rational> entries;  // row-major, dim*dim
  double scale = 1.0;

  const Rational& at(int i, int j) const { return entries[static_cast<std::size_t>(i * dim + j)]; }
  Rational determinant() const;
  /// Exact inverse of the rational part.
  ExactMatrix rational_inverse() const;
  Mat to_real() const;
};

/// Thrown when a commensurability question cannot be answered from the
/// available (floating-point) data.
class UndecidableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Affine lattice (Z^d + omega) M with det M = 1.
class AffineLattice {
 public:
  AffineLattice() = default;
  AffineLattice(Mat m, Vec omega, std::optional<ExactMatrix> exact = std::nullopt);

  static AffineLattice integer(int dim) { return AffineLattice(Mat::identity(dim), Vec::zero(dim)); }

  int dim() const { return m_.dim(); }
  const Mat& matrix() const { return m_; }
  const Mat& inverse() const { return minv_; }
  const Vec& offset() const { return omega_; }
  const std::optional<ExactMatrix>& exact() const { return exact_; }

  AffineLattice with_offset(const Vec& omega) const { return AffineLattice(m_, omega, exact_); }

 private:
  Mat m_;
  Mat minv_;
  Vec omega_;
  std::optional<ExactMatrix> exact_;
};

/// Body-centred cubic lattice basis of covolume one.
Mat bcc_matrix();

/// Membership of M1 M2^-1 in the commensurator of SL(d,Z). Requires exact
/// rational representations; throws UndecidableError otherwise.
bool is_commensurable(const ExactMatrix& m1, const ExactMatrix& m2);
bool is_commensurable(const AffineLattice& a, const AffineLattice& b);

/// How per-grain lattice offsets are chosen for the microscopic scatterer set.
enum class OffsetMode {
  anchored,      ///< centres at anchor + eps (Z^d + omega) M
  random_offset  ///< omega drawn uniformly from [0,1)^d per grain, no anchor shift
};

using LatticeIndex = std::array<std::int64_t, kMaxDim>;

struct LatticePoint {
  LatticeIndex index{};
  Vec position;
};

/// Scatterer centres anchor + eps (Z^d + omega) M of one grain.
class ScaledGrainLattice {
 public:
  ScaledGrainLattice(AffineLattice lattice, double epsilon, Vec anchor);

  const AffineLattice& lattice() const { return lattice_; }
  double epsilon() const { return eps_; }
  const Vec& anchor() const { return anchor_; }
  int dim() const { return lattice_.dim(); }

  Vec point(const LatticeIndex& k) const;
  /// Continuous lattice coordinates of a point, so that point(k) maps to k.
  Vec coordinates(const Vec& p) const;

  /// Calls f(const LatticePoint&) for every lattice point within `radius`
  /// of the segment x + [t0, t1] v. Each point is reported once.
  template <class F>
  void for_each_in_tube(const Vec& x, const Vec& v, double t0, double t1, double radius, F&& f) const;

  std::vector<LatticePoint> points_in_tube(const Vec& x, const Vec& v, double t0, double t1,
                                           double radius) const;

 private:
  AffineLattice lattice_;
  double eps_;
  Vec anchor_;
  double inv_stretch_;  // Frobenius norm of M^-1, bounds the lattice-coordinate stretch
};

/// Positions-only variant of ScaledGrainLattice::points_in_tube.
std::vector<Vec> points_in_tube(const ScaledGrainLattice& sgl, const Vec& x, const Vec& v, double t0,
                                double t1, double radius);

// ---------------------------------------------------------------------------

template <class F>
void ScaledGrainLattice::for_each_in_tube(const Vec& x, const Vec& v, double t0, double t1,
                                          double radius, F&& f) const {
  const int d = dim();
  const Vec p0 = coordinates(x + v * t0);
  const Vec dir = (v / eps_) * lattice_.inverse();
  const double reach = radius / eps_ * inv_stretch_;
  const double span = t1 - t0;

  int axis = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(dir[i]) > std::abs(dir[axis])) axis = i;

  const double a0 = p0[axis];
  const double a1 = p0[axis] + dir[axis] * span;
  const auto k_lo = static_cast<std::int64_t>(std::ceil(std::min(a0, a1) - reach));
  const auto k_hi = static_cast<std::int64_t>(std::floor(std::max(a0, a1) + reach));
  const double r2 = radius * radius;

  auto emit = [&](const LatticeIndex& k) {
    const Vec p = point(k);
    const Vec rel = p - x;
    double s = rel.dot(v);
    s = std::clamp(s, t0, t1);
    if ((rel - v * s).norm2() <= r2) f(LatticePoint{k, p});
  };

  for (std::int64_t ka = k_lo; ka <= k_hi; ++ka) {
    // Parameter window (relative to t0) where the axis coordinate is within reach of ka.
    double s_lo = (static_cast<double>(ka) - reach - a0) / dir[axis];
    double s_hi = (static_cast<double>(ka) + reach - a0) / dir[axis];
    if (s_lo > s_hi) std::swap(s_lo, s_hi);
    s_lo = std::max(s_lo, 0.0);
    s_hi = std::min(s_hi, span);
    if (s_lo > s_hi) continue;

    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int i = 0; i < d; ++i) {
      if (i == axis) continue;
      const double c0 = p0[i] + dir[i] * s_lo;
      const double c1 = p0[i] + dir[i] * s_hi;
      lo[i] = static_cast<std::int64_t>(std::ceil(std::min(c0, c1) - reach));
      hi[i] = static_cast<std::int64_t>(std::floor(std::max(c0, c1) + reach));
    }

    LatticeIndex k{};
    k[axis] = ka;
    if (d == 1) {
      emit(k);
    } else if (d == 2) {
      const int o = 1 - axis;
      for (std::int64_t a = lo[o]; a <= hi[o]; ++a) {
        k[o] = a;
        emit(k);
      }
    } else {
      const int o1 = axis == 0 ? 1 : 0;
      const int o2 = axis == 2 ? 1 : 2;
      for (std::int64_t a = lo[o1]; a <= hi[o1]; ++a)
        for (std::int64_t b = lo[o2]; b <= hi[o2]; ++b) {
          k[o1] = a;
          k[o2] = b;
          emit(k);
        }
    }
  }
}

}  // namespace polyxport
