#include "polyxport/polykernel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace polyxport {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double just_after(double xi) { return std::nextafter(xi, kInf); }

// Product of per-segment factors up to the segment containing xi. From a
// scatterer the first segment must start at 0 and uses its own factors.
template <class FirstBranch, class FirstPassed, class Last>
double itinerary_product(const PolyKernel& k, const Vec& x, const Vec& v, double xi, bool from_scatterer,
                         FirstBranch first_branch, FirstPassed first_passed, Last last) {
  if (!(xi >= 0.0) || std::isinf(xi)) throw std::domain_error("path density: xi must be finite and non-negative");
  ItineraryCursor cursor(k.scene(), x, v, just_after(xi));
  double prod = 1.0;
  bool first = true;
  while (auto s = cursor.next()) {
    const KernelModel& m = k.model(s->grain_id);
    if (from_scatterer && first && s->entry != 0.0) return 0.0;
    if (xi < s->exit) {
      if (from_scatterer && first) return first_branch(m, xi);
      return prod * last(m, xi - s->entry);
    }
    prod *= (from_scatterer && first) ? first_passed(m, s->length()) : m.survival(s->length());
    first = false;
  }
  return 0.0;
}

template <class FirstSurvival>
double survival_walk(const PolyKernel& k, const Vec& x, const Vec& v, double xi, bool from_scatterer,
                     FirstSurvival first_survival) {
  if (!(xi >= 0.0)) throw std::domain_error("survival: xi must be non-negative");
  double horizon;
  if (std::isinf(xi))
    horizon = k.scene().periodic() ? k.walk_cutoff() : kInf;
  else
    horizon = just_after(xi);
  ItineraryCursor cursor(k.scene(), x, v, horizon);
  double prod = 1.0;
  bool first = true;
  while (auto s = cursor.next()) {
    const KernelModel& m = k.model(s->grain_id);
    if (from_scatterer && first && s->entry != 0.0) return 1.0;
    const bool partial = xi < s->exit;
    const double len = partial ? xi - s->entry : s->length();
    prod *= (from_scatterer && first) ? first_survival(m, len) : m.survival(len);
    if (partial) return prod;
    if (prod < 1e-300) return 0.0;
    first = false;
  }
  if (from_scatterer && first) return 1.0;
  return prod;
}

}  // namespace

PolyKernel::PolyKernel(const Scene& scene) : scene_(&scene) {
  bool any_crystal = false;
  for (const auto& m : scene.media()) {
    if (m.kind == MediumKind::crystal) {
      models_.push_back(KernelModel::crystal(scene.dim()));
      any_crystal = true;
    } else {
      models_.push_back(KernelModel::poisson(scene.dim()));
    }
    if (!models_.back().parameter_free()) parameter_free_ = false;
  }
  if (any_crystal) scene.require_explicit_kernel_range();
  cutoff_ = 1e3 * std::max(scene.extent(), 1.0);
  build_envelope();
}

void PolyKernel::check_param(const Vec& w) const {
  if (w.dim() != dim() - 1) throw std::invalid_argument("PolyKernel: parameter must have dimension d-1");
  if (w.norm2() > 1.0 + 1e-12) throw std::domain_error("PolyKernel: parameter outside the unit ball");
}

void PolyKernel::build_envelope() {
  const int d = dim();
  const double sb = sigma_bar();
  const double ell = scene_->max_crystal_diameter();
  rate_ = ell > 0.0 ? std::min(sb / 2.0, zeta_of_dim(d) / (2.0 * ell)) : sb / 2.0;
  double first = 1.0;  // bound on exit_survival(s, .) exp(rate s)
  double last = 0.0;   // bound on every final factor times exp(rate s)
  bool any_poisson = false, any_crystal = false;
  for (const auto& m : models_) (m.is_poisson() ? any_poisson : any_crystal) = true;
  if (any_poisson) last = sb;
  if (any_crystal) {
    const KernelModel m = KernelModel::crystal(d);
    const Vec centre(d - 1);
    const double cut_centre = d == 3 ? cut_area_integral(0.0) : 0.0;
    const double cut_rim = d == 3 ? cut_area_integral(1.0) : 0.0;
    const int n = 4000;
    for (int i = 0; i <= n; ++i) {
      const double s = ell * i / n;
      const double e = std::exp(rate_ * s);
      if (m.survival(s) * e > 1.0 + 1e-12)
        throw std::logic_error("PolyKernel: survival exceeds the exponential envelope");
      // In d = 3 the exit survival grows and the impact density falls with |w|;
      // the transition density is largest at w = z.
      const double exit = d == 3 ? m.exit_survival_from_cut(s, cut_rim) : m.exit_survival(s, centre);
      const double impact = d == 3 ? m.exit_path_density_from_cut(s, cut_centre) : m.exit_path_density(s, centre);
      const double trans = m.transition_density(s, centre, centre);
      first = std::max(first, exit * e);
      last = std::max({last, m.path_density(s) * e, impact * e, trans * e, exit * e});
    }
  }
  constant_ = first * last * (1.0 + 1e-3);
}

double PolyKernel::psi(const Vec& x, const Vec& v, double xi) const {
  return itinerary_product(
      *this, x, v, xi, false, [](const KernelModel&, double) { return 0.0; },
      [](const KernelModel&, double) { return 1.0; },
      [](const KernelModel& m, double s) { return m.path_density(s); });
}

double PolyKernel::psi_w(const Vec& x, const Vec& v, double xi, const Vec& w) const {
  check_param(w);
  return itinerary_product(
      *this, x, v, xi, false, [](const KernelModel&, double) { return 0.0; },
      [](const KernelModel&, double) { return 1.0; },
      [&](const KernelModel& m, double s) { return m.exit_survival(s, w); });
}

double PolyKernel::psi0(const Vec& x, const Vec& v, double xi, const Vec& w) const {
  check_param(w);
  return itinerary_product(
      *this, x, v, xi, true, [&](const KernelModel& m, double s) { return m.exit_path_density(s, w); },
      [&](const KernelModel& m, double len) { return m.exit_survival(len, w); },
      [](const KernelModel& m, double s) { return m.path_density(s); });
}

double PolyKernel::psi0_full(const Vec& x, const Vec& v, double xi, const Vec& w, const Vec& z) const {
  check_param(w);
  check_param(z);
  return itinerary_product(
      *this, x, v, xi, true,
      [&](const KernelModel& m, double s) { return m.transition_density(s, w, z); },
      [&](const KernelModel& m, double len) { return m.exit_survival(len, z); },
      [&](const KernelModel& m, double s) { return m.exit_survival(s, w); });
}

double PolyKernel::survival(const Vec& x, const Vec& v, double xi) const {
  return survival_walk(*this, x, v, xi, false, [](const KernelModel&, double) { return 1.0; });
}

double PolyKernel::survival_from_exit(const Vec& x, const Vec& v, double xi, const Vec& z) const {
  check_param(z);
  return survival_walk(*this, x, v, xi, true,
                       [&](const KernelModel& m, double len) { return m.exit_survival(len, z); });
}

std::vector<double> PolyKernel::survival_profile(const Vec& x, const Vec& v, const std::vector<double>& grid,
                                                 const std::optional<Vec>& z) const {
  if (z) check_param(*z);
  std::vector<double> out(grid.size(), 1.0);
  if (grid.empty()) return out;
  if (!(grid.front() >= 0.0) || std::isinf(grid.back()))
    throw std::domain_error("survival_profile: grid must be finite and non-negative");
  auto factor = [&](const KernelModel& m, bool first, double len) {
    return z && first ? m.exit_survival(len, *z) : m.survival(len);
  };
  ItineraryCursor cursor(*scene_, x, v, just_after(grid.back()));
  std::size_t i = 0;
  double prod = 1.0;
  bool first = true;
  while (auto s = cursor.next()) {
    if (z && first && s->entry != 0.0) return out;
    const KernelModel& m = model(s->grain_id);
    for (; i < grid.size() && grid[i] < s->entry; ++i) out[i] = prod;
    for (; i < grid.size() && grid[i] < s->exit; ++i) out[i] = prod * factor(m, first, grid[i] - s->entry);
    prod *= factor(m, first, s->length());
    first = false;
  }
  if (z && first) return out;
  for (; i < grid.size(); ++i) out[i] = prod;
  return out;
}

double PolyKernel::psi_tail_bound(const Vec& x, const Vec& v, double xi) const {
  const double covered = xi - scene_->gap(x, v, xi);
  return constant_ * std::exp(-rate_ * covered);
}

PoissonPsi poisson_psi(const Scene& scene, const Vec& x, const Vec& v, double xi) {
  for (const auto& m : scene.media())
    if (m.kind != MediumKind::poisson) throw std::invalid_argument("poisson_psi: scene has crystal grains");
  if (!(xi >= 0.0)) throw std::domain_error("poisson_psi: xi must be non-negative");
  const double sb = unit_ball_volume(scene.dim());
  const double decay = std::exp(-sb * (xi - scene.gap(x, v, xi)));
  const double start = scene.inside_indicator(x, v) ? 1.0 : 0.0;
  const double end = scene.inside_indicator(x + v * xi, v) ? 1.0 : 0.0;
  PoissonPsi out;
  out.psi_w = decay * end;
  out.psi = sb * out.psi_w;
  out.psi0_full = decay * start * end;
  out.psi0 = sb * out.psi0_full;
  return out;
}

namespace {

double integrate_over_ball(int dim, const std::function<double(const Vec&)>& f) {
  using boost::math::quadrature::gauss;
  if (dim == 2) return gauss<double, 20>::integrate([&](double w) { return f(Vec{w}); }, -1.0, 1.0);
  const int n_phi = 16;
  double total = 0.0;
  for (int j = 0; j < n_phi; ++j) {
    const double phi = 2.0 * std::numbers::pi * (j + 0.5) / n_phi;
    total += gauss<double, 20>::integrate(
        [&](double rho) { return f(Vec{rho * std::cos(phi), rho * std::sin(phi)}) * rho; }, 0.0, 1.0);
  }
  return total * 2.0 * std::numbers::pi / n_phi;
}

}  // namespace

TransportIdentityReport check_transport_identity(const PolyKernel& kernel, const std::vector<PathProbe>& probes) {
  TransportIdentityReport report;
  const Scene& scene = kernel.scene();
  const int d = scene.dim();
  for (const auto& p : probes) {
    const double h = 1e-6 * (1.0 + p.xi);
    bool near_kink = p.xi < 100.0 * h;
    for (const auto& s : scene.itinerary(p.x, p.v, p.xi + 200.0 * h)) {
      for (double e : {s.entry, s.exit}) {
        if (e == 0.0 && e == s.entry) continue;
        if (std::abs(e) < 100.0 * h || std::abs(e - p.xi) < 100.0 * h) near_kink = true;
      }
    }
    if (near_kink) {
      ++report.skipped;
      continue;
    }
    const double fd = (kernel.psi(p.x + p.v * h, p.v, p.xi - h) - kernel.psi(p.x, p.v, p.xi)) / h;
    const double integral =
        integrate_over_ball(d, [&](const Vec& w) { return kernel.psi0(p.x, p.v, p.xi, w); });
    report.max_residual = std::max(report.max_residual, std::abs(fd - integral));

    const double inside = scene.inside_indicator(p.x, p.v) ? 1.0 : 0.0;
    Vec w(d - 1);
    w[0] = 0.5;
    report.max_boundary_error = std::max(
        {report.max_boundary_error, std::abs(kernel.psi(p.x, p.v, 0.0) - kernel.sigma_bar() * inside),
         std::abs(kernel.psi_w(p.x, p.v, 0.0, w) - inside), std::abs(kernel.psi_w(p.x, p.v, 0.0, Vec(d - 1)) - inside)});
    ++report.checked;
  }
  return report;
}

}  // namespace polyxport
