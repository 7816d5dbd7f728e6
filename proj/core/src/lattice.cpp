#include "polyxport/lattice.hpp"

#include <charconv>
#include <numeric>
#include <string>

namespace polyxport {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("Rational: multiplication overflow");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("Rational: addition overflow");
  return r;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || first == s.data() + s.size())
    throw std::invalid_argument("Rational: not an integer: '" + std::string(s) + "'");
  return v;
}

}  // namespace

Rational Rational::make(std::int64_t p, std::int64_t q) {
  if (q == 0) throw std::domain_error("Rational: zero denominator");
  if (q < 0) {
    p = -p;
    q = -q;
  }
  const std::int64_t g = std::gcd(p < 0 ? -p : p, q);
  return Rational{p / (g == 0 ? 1 : g), q / (g == 0 ? 1 : g)};
}

Rational Rational::parse(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) throw std::invalid_argument("Rational: empty string");

  if (const auto slash = text.find('/'); slash != std::string_view::npos)
    return make(parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1)));

  if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const bool negative = text.front() == '-';
    std::string_view int_part = text.substr(0, dot);
    std::string_view frac_part = text.substr(dot + 1);
    if (frac_part.find_first_not_of("0123456789") != std::string_view::npos)
      throw std::invalid_argument("Rational: not an exact decimal: '" + std::string(text) + "'");
    std::int64_t scale = 1;
    std::int64_t frac = 0;
    for (char c : frac_part) {
      scale = checked_mul(scale, 10);
      frac = checked_add(checked_mul(frac, 10), c - '0');
    }
    std::int64_t whole = 0;
    if (!int_part.empty() && int_part != "-" && int_part != "+") whole = parse_int(int_part);
    std::int64_t mag = checked_add(checked_mul(whole < 0 ? -whole : whole, scale), frac);
    return make(negative ? -mag : mag, scale);
  }
  return make(parse_int(text), 1);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Rational::make(checked_add(checked_mul(a.num, b.den), checked_mul(b.num, a.den)),
                        checked_mul(a.den, b.den));
}
Rational operator-(const Rational& a, const Rational& b) { return a + Rational{-b.num, b.den}; }
Rational operator*(const Rational& a, const Rational& b) {
  return Rational::make(checked_mul(a.num, b.num), checked_mul(a.den, b.den));
}
Rational operator/(const Rational& a, const Rational& b) {
  if (b.num == 0) throw std::domain_error("Rational: division by zero");
  return Rational::make(checked_mul(a.num, b.den), checked_mul(a.den, b.num));
}

Rational ExactMatrix::determinant() const {
  switch (dim) {
    case 1: return at(0, 0);
    case 2: return at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0);
    case 3:
      return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
             at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
             at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
    default: throw std::invalid_argument("ExactMatrix: unsupported dimension");
  }
}

ExactMatrix ExactMatrix::rational_inverse() const {
  const Rational det = determinant();
  if (det.is_zero()) throw std::domain_error("ExactMatrix: singular rational part");
  ExactMatrix r{dim, std::vector<Rational>(entries.size()), 1.0 / scale};
  auto set = [&](int i, int j, Rational v) { r.entries[static_cast<std::size_t>(i * dim + j)] = v / det; };
  if (dim == 1) {
    set(0, 0, Rational{1, 1});
  } else if (dim == 2) {
    set(0, 0, at(1, 1));
    set(0, 1, Rational{-at(0, 1).num, at(0, 1).den});
    set(1, 0, Rational{-at(1, 0).num, at(1, 0).den});
    set(1, 1, at(0, 0));
  } else {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const int i1 = (j + 1) % 3, i2 = (j + 2) % 3;
        const int j1 = (i + 1) % 3, j2 = (i + 2) % 3;
        set(i, j, at(i1, j1) * at(i2, j2) - at(i1, j2) * at(i2, j1));
      }
  }
  return r;
}

Mat ExactMatrix::to_real() const {
  Mat m(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = scale * at(i, j).to_double();
  return m;
}

AffineLattice::AffineLattice(Mat m, Vec omega, std::optional<ExactMatrix> exact)
    : m_(m), omega_(omega), exact_(std::move(exact)) {
  if (m_.dim() < 1 || m_.dim() > kMaxDim) throw std::invalid_argument("AffineLattice: bad dimension");
  if (omega_.dim() != m_.dim()) throw std::invalid_argument("AffineLattice: offset dimension mismatch");
  if (std::abs(m_.det() - 1.0) > 1e-12)
    throw std::invalid_argument("AffineLattice: matrix must have determinant 1 (got " +
                                std::to_string(m_.det()) + ")");
  minv_ = m_.inverse();
}

Mat bcc_matrix() {
  const double a = std::cbrt(2.0);
  const double b = 1.0 / std::cbrt(4.0);
  return Mat::from_rows({{a, 0.0, 0.0}, {0.0, a, 0.0}, {b, b, b}});
}

bool is_commensurable(const ExactMatrix& m1, const ExactMatrix& m2) {
  if (m1.dim != m2.dim) throw std::invalid_argument("is_commensurable: dimension mismatch");
  const int d = m1.dim;
  // M1 M2^-1 = (s1/s2) T with T rational. Since both sides have det 1, c^d det T = 1
  // and +-T (whichever has positive determinant) exhibits membership.
  const ExactMatrix inv = m2.rational_inverse();
  ExactMatrix t{d, std::vector<Rational>(static_cast<std::size_t>(d * d)), 1.0};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Rational s{0, 1};
      for (int k = 0; k < d; ++k) s = s + m1.at(i, k) * inv.at(k, j);
      t.entries[static_cast<std::size_t>(i * d + j)] = s;
    }
  const double c = m1.scale / m2.scale;
  const Rational det_t = t.determinant();
  if (det_t.is_zero()) throw std::domain_error("is_commensurable: singular input");
  const double unit = std::pow(c, d) * det_t.to_double();
  if (std::abs(unit - 1.0) > 1e-9)
    throw std::invalid_argument("is_commensurable: inputs are not in SL(d,R)");
  const bool flip = c < 0.0;
  const double det_sign = (flip && d % 2 == 1) ? -det_t.to_double() : det_t.to_double();
  return det_sign > 0.0;
}

bool is_commensurable(const AffineLattice& a, const AffineLattice& b) {
  if (!a.exact() || !b.exact())
    throw UndecidableError(
        "commensurability is undecidable on floating-point matrices; supply exact rational "
        "entries or set assume_incommensurable");
  return is_commensurable(*a.exact(), *b.exact());
}

ScaledGrainLattice::ScaledGrainLattice(AffineLattice lattice, double epsilon, Vec anchor)
    : lattice_(std::move(lattice)), eps_(epsilon), anchor_(anchor) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("ScaledGrainLattice: epsilon must be positive");
  if (anchor_.dim() != lattice_.dim()) throw std::invalid_argument("ScaledGrainLattice: anchor dimension");
  inv_stretch_ = lattice_.inverse().frobenius_norm();
}

Vec ScaledGrainLattice::point(const LatticeIndex& k) const {
  Vec kv(dim());
  for (int i = 0; i < dim(); ++i) kv[i] = static_cast<double>(k[static_cast<std::size_t>(i)]);
  return anchor_ + ((kv + lattice_.offset()) * lattice_.matrix()) * eps_;
}

Vec ScaledGrainLattice::coordinates(const Vec& p) const {
  return ((p - anchor_) / eps_) * lattice_.inverse() - lattice_.offset();
}

std::vector<LatticePoint> ScaledGrainLattice::points_in_tube(const Vec& x, const Vec& v, double t0,
                                                             double t1, double radius) const {
  if (!(t1 > t0) || t0 < 0.0) throw std::invalid_argument("points_in_tube: need 0 <= t0 < t1");
  if (!(radius > 0.0)) throw std::invalid_argument("points_in_tube: radius must be positive");
  std::vector<LatticePoint> out;
  for_each_in_tube(x, v, t0, t1, radius, [&](const LatticePoint& p) { out.push_back(p); });
  return out;
}

std::vector<Vec> points_in_tube(const ScaledGrainLattice& sgl, const Vec& x, const Vec& v, double t0,
                                double t1, double radius) {
  std::vector<Vec> out;
  for (const auto& p : sgl.points_in_tube(x, v, t0, t1, radius)) out.push_back(p.position);
  return out;
}

}  // namespace polyxport
