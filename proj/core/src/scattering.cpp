#include "polyxport/scattering.hpp"

#include <cmath>
#include <stdexcept>

namespace polyxport {

Mat frame(const Vec& v) {
  const int d = v.dim();
  const double c = v[0];
  Mat k(d);
  if (d == 2) {
    // Rotation by minus the polar angle of v.
    return Mat::from_rows({Vec{c, -v[1]}, Vec{v[1], c}});
  }
  if (d != 3) throw std::invalid_argument("frame: dimension must be 2 or 3");
  const double p2 = v[1] * v[1] + v[2] * v[2];
  if (p2 == 0.0 && c < 0.0) return Mat::from_rows({Vec{-1.0, 0.0, 0.0}, Vec{0.0, -1.0, 0.0}, Vec{0.0, 0.0, 1.0}});
  // 1 + c computed without cancellation when v is close to -e1.
  const double one_plus_c = c >= 0.0 ? 1.0 + c : p2 / (1.0 - c);
  const double p[2] = {v[1], v[2]};
  k(0, 0) = c;
  for (int j = 0; j < 2; ++j) {
    k(0, j + 1) = -p[j];
    k(j + 1, 0) = p[j];
    for (int i = 0; i < 2; ++i) k(i + 1, j + 1) = (i == j ? 1.0 : 0.0) - p[i] * p[j] / one_plus_c;
  }
  return k;
}

Vec reflect(const Vec& v, const Vec& w) {
  const double vw = v.dot(w);
  if (!(vw < 0.0)) throw std::domain_error("reflect: impact point must face the incoming velocity");
  return v - w * (2.0 * vw);
}

Vec impact_point(const Vec& v, const Vec& v_plus) {
  const Vec diff = v_plus - v;
  const double n = diff.norm();
  if (!(n > 0.0)) throw std::domain_error("impact_point: no deflection");
  return diff / n;
}

Vec impact_param(const Vec& v, const Vec& v_plus) { return perp(impact_point(v, v_plus) * frame(v)); }

Vec exit_param(const Vec& v, const Vec& v_prev) { return perp(impact_point(v_prev, v) * frame(v)); }

Vec impact_point_from_param(const Vec& v, const Vec& b) {
  const int d = v.dim();
  if (b.dim() != d - 1) throw std::invalid_argument("impact_point_from_param: parameter dimension");
  const double b2 = b.norm2();
  if (b2 > 1.0) throw std::domain_error("impact_point_from_param: |b| > 1");
  Vec local(d);
  local[0] = -std::sqrt(1.0 - b2);
  for (int i = 1; i < d; ++i) local[i] = b[i - 1];
  return local * frame(v).transpose();
}

Vec outgoing_velocity(const Vec& v, const Vec& b) {
  if (!(b.norm2() < 1.0)) throw std::domain_error("outgoing_velocity: |b| must be below 1");
  const Vec w = impact_point_from_param(v, b);
  const Vec out = reflect(v, w);
  return out / out.norm();
}

double cross_section(const Vec& v, const Vec& v_plus) {
  const int d = v.dim();
  const double half = (v - v_plus).norm() / 2.0;
  if (d == 2) return 0.5 * half;
  if (d == 3) return 0.25;
  throw std::invalid_argument("cross_section: dimension must be 2 or 3");
}

}  // namespace polyxport
