#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <stdexcept>

namespace polyxport {

inline constexpr int kMaxDim = 3;

/// Fixed-capacity real vector of dimension 1..3. Points and velocities are
/// row vectors; lattices act on the right, as in (k + omega) M.
class Vec {
 public:
  Vec() = default;
  explicit Vec(int dim) : dim_(dim) { check_dim(dim); }
  Vec(std::initializer_list<double> xs) : dim_(static_cast<int>(xs.size())) {
    check_dim(dim_);
    int i = 0;
    for (double x : xs) c_[i++] = x;
  }

  static Vec zero(int dim) { return Vec(dim); }
  static Vec unit(int dim, int axis) {
    Vec e(dim);
    e[axis] = 1.0;
    return e;
  }

  int dim() const { return dim_; }
  double operator[](int i) const { return c_[i]; }
  double& operator[](int i) { return c_[i]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (int i = 0; i < dim_; ++i) c_[i] *= s;
    return *this;
  }
  Vec& operator/=(double s) { return *this *= (1.0 / s); }

  double dot(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += c_[i] * o.c_[i];
    return s;
  }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  Vec normalized() const {
    Vec r = *this;
    r /= norm();
    return r;
  }

  bool operator==(const Vec& o) const {
    if (dim_ != o.dim_) return false;
    for (int i = 0; i < dim_; ++i)
      if (c_[i] != o.c_[i]) return false;
    return true;
  }

 private:
  static void check_dim(int d) {
    if (d < 0 || d > kMaxDim) throw std::invalid_argument("Vec: dimension must be in [0,3]");
  }

  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator-(Vec a) { return a *= -1.0; }
inline Vec operator*(Vec a, double s) { return a *= s; }
inline Vec operator*(double s, Vec a) { return a *= s; }
inline Vec operator/(Vec a, double s) { return a /= s; }

/// The component orthogonal to e1, as a (d-1)-vector.
inline Vec perp(const Vec& x) {
  Vec r(x.dim() - 1);
  for (int i = 1; i < x.dim(); ++i) r[i - 1] = x[i];
  return r;
}

/// Square matrix of size 1..3, row-major.
class Mat {
 public:
  Mat() = default;
  explicit Mat(int dim) : dim_(dim) {}

  static Mat identity(int dim) {
    Mat m(dim);
    for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat from_rows(std::initializer_list<Vec> rows) {
    Mat m(static_cast<int>(rows.size()));
    int i = 0;
    for (const Vec& r : rows) {
      if (r.dim() != m.dim_) throw std::invalid_argument("Mat: ragged rows");
      for (int j = 0; j < m.dim_; ++j) m(i, j) = r[j];
      ++i;
    }
    return m;
  }

  int dim() const { return dim_; }
  double operator()(int i, int j) const { return a_[i * kMaxDim + j]; }
  double& operator()(int i, int j) { return a_[i * kMaxDim + j]; }

  Vec row(int i) const {
    Vec r(dim_);
    for (int j = 0; j < dim_; ++j) r[j] = (*this)(i, j);
    return r;
  }

  Mat transpose() const {
    Mat t(dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) t(i, j) = (*this)(j, i);
    return t;
  }

  double det() const {
    const Mat& m = *this;
    switch (dim_) {
      case 1: return m(0, 0);
      case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
      case 3:
        return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
               m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
               m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
      default: return 1.0;
    }
  }

  Mat inverse() const {
    const double dt = det();
    if (dt == 0.0) throw std::domain_error("Mat::inverse: singular matrix");
    const Mat& m = *this;
    Mat r(dim_);
    if (dim_ == 1) {
      r(0, 0) = 1.0 / m(0, 0);
    } else if (dim_ == 2) {
      r(0, 0) = m(1, 1) / dt;
      r(0, 1) = -m(0, 1) / dt;
      r(1, 0) = -m(1, 0) / dt;
      r(1, 1) = m(0, 0) / dt;
    } else {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int i1 = (j + 1) % 3, i2 = (j + 2) % 3;
          const int j1 = (i + 1) % 3, j2 = (i + 2) % 3;
          r(i, j) = (m(i1, j1) * m(i2, j2) - m(i1, j2) * m(i2, j1)) / dt;
        }
    }
    return r;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) s += (*this)(i, j) * (*this)(i, j);
    return std::sqrt(s);
  }

 private:
  std::array<double, kMaxDim * kMaxDim> a_{};
  int dim_ = 0;
};

inline Mat operator*(const Mat& a, const Mat& b) {
  Mat r(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.dim(); ++k) s += a(i, k) * b(k, j);
      r(i, j) = s;
    }
  return r;
}

/// Row vector times matrix: (x M)_j = sum_i x_i M_ij.
inline Vec operator*(const Vec& x, const Mat& m) {
  Vec r(m.dim());
  for (int j = 0; j < m.dim(); ++j) {
    double s = 0.0;
    for (int i = 0; i < m.dim(); ++i) s += x[i] * m(i, j);
    r[j] = s;
  }
  return r;
}

/// Rotation by `angle` in the plane of axes (i, j).
inline Mat plane_rotation(int dim, int i, int j, double angle) {
  Mat r = Mat::identity(dim);
  const double c = std::cos(angle), s = std::sin(angle);
  r(i, i) = c;
  r(i, j) = -s;
  r(j, i) = s;
  r(j, j) = c;
  return r;
}

}  // namespace polyxport
