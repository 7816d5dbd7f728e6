// Prints one PASS/FAIL line per acceptance criterion. Exits nonzero only when a
// criterion fails that was not listed with --expect-fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "polyxport/harness.hpp"
#include "polyxport/kernels.hpp"
#include "polyxport/polykernel.hpp"
#include "polyxport/scattering.hpp"
#include "support.hpp"

using namespace polyxport;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;
constexpr double kZeta2 = kPi2 / 6.0;
constexpr double kZeta3 = 1.2020569031595942;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

// Tracks the worst deviation seen against a tolerance.
struct Worst {
  double value = 0.0;
  void see(double x) { value = std::max(value, std::isnan(x) ? INFINITY : x); }
};

Outcome kernel_values() {
  Rng rng(101);
  Worst phi0, planar, spatial;
  for (int i = 0; i < 1000; ++i) {
    const double xi = 0.5 * rng.uniform_pos();
    phi0.see(std::abs(phi0_2d(xi, rng.uniform(-1, 1), rng.uniform(-1, 1)) - 6.0 / kPi2));
  }
  const auto m2 = KernelModel::crystal(2), m3 = KernelModel::crystal(3);
  for (int i = 0; i <= 1000; ++i) {
    const double xi = 0.5 * i / 1000.0;
    planar.see(std::abs(m2.path_density(xi) - (2.0 - 24.0 / kPi2 * xi)));
    planar.see(std::abs(m2.survival(xi) - (1.0 - 2.0 * xi + 12.0 / kPi2 * xi * xi)));
    const double s = 0.25 * i / 1000.0;
    const double c = 3.0 * kPi2 + 16.0;
    spatial.see(std::abs(m3.path_density(s) - (kPi - kPi2 * s / kZeta3 + c * s * s / (2.0 * kPi * kZeta3))));
    spatial.see(std::abs(m3.survival(s) - (1.0 - kPi * s + kPi2 * s * s / (2.0 * kZeta3) -
                                           c * s * s * s / (6.0 * kPi * kZeta3))));
  }
  return {phi0.value <= 1e-12 && planar.value <= 1e-14 && spatial.value <= 1e-14,
          "phi0 dev " + fmt(phi0.value) + ", d=2 poly dev " + fmt(planar.value) + ", d=3 poly dev " + fmt(spatial.value)};
}

Outcome cut_area_endpoints() {
  const double e0 = std::abs(cut_area_integral(0.0) - kPi * (4.0 * kPi + 3.0 * std::sqrt(3.0)) / 16.0);
  const double e1 = std::abs(cut_area_integral(1.0) - (5.0 * kPi2 / 16.0 + 1.0));
  bool increasing = true;
  double prev = cut_area_integral(0.0);
  for (int i = 1; i < 1000; ++i) {
    const double g = cut_area_integral(i / 999.0);
    increasing = increasing && g > prev;
    prev = g;
  }
  return {e0 < 1e-8 && e1 < 1e-8 && increasing,
          "|G(0) err| " + fmt(e0) + ", |G(1) err| " + fmt(e1) + (increasing ? ", increasing" : ", NOT increasing")};
}

Outcome spatial_chain() {
  Rng rng(103);
  const auto m = KernelModel::crystal(3);
  Worst chain;
  for (int i = 0; i < 100; ++i) {
    const double xi = 0.25 * rng.uniform_pos();
    const Vec w = rng.in_ball(2);
    // Second-order backward difference, staying inside the explicit range.
    const double h = std::min(1e-3, 0.25 * xi);
    const double slope =
        (3.0 * m.exit_survival(xi, w) - 4.0 * m.exit_survival(xi - h, w) + m.exit_survival(xi - 2.0 * h, w)) / (2.0 * h);
    const double mass = testing::integrate_disk([&](const Vec& z) { return phi0_3d(xi, w, z); }, 1e-9);
    chain.see(std::abs(slope + mass));
  }
  return {chain.value < 1e-5, "max residual " + fmt(chain.value)};
}

Outcome bounds_and_tails() {
  Rng rng(104);
  bool bracket = true;
  for (int i = 0; i < 10000; ++i) {
    const int d = i % 2 ? 3 : 2;
    const double zeta = d == 2 ? kZeta2 : kZeta3, sb = d == 2 ? 2.0 : kPi;
    const double xi = (d == 2 ? 0.5 : 0.25) * rng.uniform_pos();
    const double value = d == 2 ? phi0_2d(xi, rng.uniform(-1, 1), rng.uniform(-1, 1))
                                : phi0_3d(xi, rng.in_ball(2), rng.in_ball(2));
    const double lower = (1.0 - std::pow(2.0, d - 1) * sb * xi) / zeta;
    bracket = bracket && value >= lower - 1e-15 && value <= 1.0 / zeta + 1e-15;
  }
  bool tail = true;
  for (int d : {2, 3}) {
    const auto m = KernelModel::crystal(d);
    const double zeta = d == 2 ? kZeta2 : kZeta3;
    for (int i = 0; i <= 100000; ++i) {
      const double xi = m.max_xi() * i / 100000.0;
      tail = tail && m.survival(xi) <= std::max(std::exp(-m.sigma_bar() * xi / 2), std::exp(-zeta / 2));
    }
  }
  bool envelope = true;
  for (int i = 0; i < 1000; ++i) {
    const int d = i % 2 ? 3 : 2;
    const auto scene = testing::random_scene(rng, d);
    const PolyKernel k(*scene);
    const Vec x = testing::point_in_grains(rng, *scene), v = rng.unit_vector(d);
    const Vec w = rng.in_ball(d - 1), z = rng.in_ball(d - 1);
    for (int j = 0; j < 20; ++j) {
      const double xi = 0.1 * j;
      const double bound = k.psi_tail_bound(x, v, xi);
      envelope = envelope && k.psi(x, v, xi) <= bound && k.psi_w(x, v, xi, w) <= bound &&
                 k.psi0(x, v, xi, w) <= bound && k.psi0_full(x, v, xi, w, z) <= bound;
    }
  }
  return {bracket && tail && envelope, std::string("bracket ") + (bracket ? "ok" : "violated") + ", tail " +
                                           (tail ? "ok" : "violated") + ", envelope " + (envelope ? "ok" : "violated")};
}

Outcome symmetries() {
  Rng rng(105);
  Worst swap, orth, reversal;
  for (int i = 0; i < 1000; ++i) {
    const double xi = 0.25 * rng.uniform_pos();
    const Vec w = rng.in_ball(2), z = rng.in_ball(2);
    swap.see(std::abs(phi0_3d(xi, w, z) - phi0_3d(xi, z, w)));
    const double xi2 = 2.0 * rng.uniform_pos();
    const double w1 = rng.uniform(-1, 1), z1 = rng.uniform(-1, 1);
    swap.see(std::abs(phi0_2d(xi2, w1, z1) - phi0_2d(xi2, z1, w1)));
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    const bool mirror = rng.uniform() < 0.5;
    orth.see(std::abs(phi0_3d(xi, testing::orthogonal_image(w, angle, mirror), testing::orthogonal_image(z, angle, mirror)) -
                      phi0_3d(xi, w, z)));
    orth.see(std::abs(phi0_2d(xi2, -w1, -z1) - phi0_2d(xi2, w1, z1)));
  }
  for (int i = 0; i < 1000; ++i) {
    const int d = i % 2 ? 3 : 2;
    const auto scene = testing::random_scene(rng, d);
    const PolyKernel k(*scene);
    const Vec x = testing::point_in_grains(rng, *scene), v = rng.unit_vector(d);
    const double xi = rng.uniform(0.0, 1.2);
    const Vec w = rng.in_ball(d - 1), z = rng.in_ball(d - 1);
    reversal.see(std::abs(k.psi0_full(x + v * xi, -v, xi, z, w) - k.psi0_full(x, v, xi, w, z)));
  }
  return {swap.value <= 1e-10 && orth.value <= 1e-10 && reversal.value <= 1e-10,
          "swap " + fmt(swap.value) + ", orthogonal " + fmt(orth.value) + ", time reversal " + fmt(reversal.value)};
}

Vec polar(double t) { return Vec{std::cos(t), std::sin(t)}; }

Outcome cross_sections() {
  const Vec e1{1, 0}, f1{1, 0, 0};
  const double planar = testing::integrate_1d([&](double t) { return cross_section(e1, polar(t)); }, 0.0, 2 * kPi);
  const double spatial = testing::integrate_1d(
      [&](double t) {
        return std::sin(t) *
               testing::integrate_1d(
                   [&](double p) {
                     return cross_section(f1, Vec{std::cos(t), std::sin(t) * std::cos(p), std::sin(t) * std::sin(p)});
                   },
                   0.0, 2 * kPi);
      },
      0.0, kPi);
  const double err = std::max(std::abs(planar - 2.0), std::abs(spatial - kPi));

  Rng rng(106);
  const int bins = 32;
  const std::size_t n = 100000;
  std::vector<double> counts(bins, 0.0), probs(bins);
  const Vec v2 = rng.unit_vector(2);
  const double base = std::atan2(v2[1], v2[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec b = rng.in_ball(1);
    const Vec w = impact_point_from_param(v2, b);
    const Vec out = reflect(v2, w);
    double theta = std::atan2(out[1], out[0]) - base;
    theta = std::fmod(theta + 4 * kPi, 2 * kPi);
    counts[std::min(bins - 1, static_cast<int>(theta / (2 * kPi) * bins))] += 1;
  }
  for (int k = 0; k < bins; ++k) probs[k] = 0.5 * (std::cos(kPi * k / bins) - std::cos(kPi * (k + 1) / bins));
  const double p2 = chi_square_gof(counts, probs).p_value;

  std::fill(counts.begin(), counts.end(), 0.0);
  std::fill(probs.begin(), probs.end(), 1.0 / bins);
  const Vec v3 = rng.unit_vector(3);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec out = reflect(v3, impact_point_from_param(v3, rng.in_ball(2)));
    counts[std::clamp(static_cast<int>((out.dot(v3) + 1) / 2 * bins), 0, bins - 1)] += 1;
  }
  const double p3 = chi_square_gof(counts, probs).p_value;
  return {err < 1e-6 && p2 >= 0.01 && p3 >= 0.01,
          "integral err " + fmt(err) + ", pushforward p (d=2) " + fmt(p2) + ", p (d=3) " + fmt(p3)};
}

Outcome freepath(const fs::path& configs) {
  const auto c = load_config(configs / "freepath_two_squares.json");
  const auto report = run_freepath(c);
  std::string ks;
  for (const auto& run : report.runs) ks += (ks.empty() ? "" : ", ") + std::string("r=") + fmt(run.r) + ": " + fmt(run.ks.statistic);
  return {report.decreasing && report.below_threshold,
          "KS " + ks + (report.decreasing ? "; decreasing" : "; not decreasing") + ", threshold " + fmt(c.thresholds.ks)};
}

Outcome transition(const fs::path& configs) {
  const auto c = load_config(configs / "transition_two_squares.json");
  const auto report = run_transition(c);
  const auto& last = report.runs.back();
  return {last.chi.p_value >= c.thresholds.alpha,
          "r=" + fmt(last.r) + ": chi2 " + fmt(last.chi.statistic) + " on " + fmt(last.chi.dof) + " dof, p " +
              fmt(last.chi.p_value)};
}

Outcome poisson(const fs::path& configs) {
  const auto c = load_config(configs / "poisson_baseline.json");
  const auto r = run_poisson_baseline(c);
  const bool ok = r.exponential.statistic < c.thresholds.poisson_ks && r.memoryless.p_value >= c.thresholds.alpha &&
                  r.gap.statistic < c.thresholds.gap_ks;
  return {ok, "exponential KS " + fmt(r.exponential.statistic) + ", memoryless p " + fmt(r.memoryless.p_value) +
                  ", gap KS " + fmt(r.gap.statistic)};
}

Outcome stationarity(const fs::path& configs) {
  const auto c = load_config(configs / "stationarity_tiled.json");
  const auto s = run_stationarity(c);
  bool ok = true;
  double worst = 1.0;
  for (const auto* group : {&s.combined_stationarity, &s.combined_semigroup})
    for (const auto& m : *group) {
      if (m.name != "xi" && m.name.rfind("v_plus", 0) != 0) continue;
      worst = std::min(worst, m.p_value);
      ok = ok && m.p_value >= c.thresholds.alpha;
    }
  return {ok, "smallest combined p over xi and v_plus marginals " + fmt(worst) + " across " +
                  std::to_string(s.seeds.size()) + " seeds"};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility(const fs::path& configs) {
  std::vector<ExperimentConfig> runs;
  auto fp = load_config(configs / "freepath_two_squares.json");
  fp.samples = 5000;
  runs.push_back(fp);
  auto st = load_config(configs / "stationarity_tiled.json");
  st.flight.particles = 2000;
  st.flight.seeds = 2;
  runs.push_back(st);
  runs.push_back(parse_config(R"({"experiment": "kernel-tables", "kernel_tables": {"dims": [3], "xi": [0.1, 0.2],
                                  "w": [[0.3, 0.4]], "z": [[-0.1, 0.5]]}})"));
  std::size_t files = 0;
  for (auto& c : runs) {
    c.threads = 1;
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = fs::temp_directory_path() / ("polyxport_acceptance_" + c.experiment + std::to_string(rep));
      fs::remove_all(dir);
      fs::create_directories(dir);
      write_report(run_experiment(c), dir);
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const std::string name = entry.path().filename().string();
      if (name.find("_timings") != std::string::npos) continue;
      if (slurp(entry.path()) != slurp(dirs[1] / name)) return {false, name + " differs between reruns"};
      ++files;
    }
    for (const auto& d : dirs) fs::remove_all(d);
  }
  return {files > 0, std::to_string(files) + " CSV/JSON files byte-identical across reruns"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string configs = POLYXPORT_CONFIG_DIR;
  std::vector<int> expect_fail, only;
  app.add_option("--configs", configs, "directory holding the experiment configs");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail")->delimiter(',');
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"kernel unit values", kernel_values},
      {"cut-area integral endpoints and monotonicity", cut_area_endpoints},
      {"spatial consistency chain", spatial_chain},
      {"bounds and tails", bounds_and_tails},
      {"symmetry suite", symmetries},
      {"cross-section integrals and pushforward", cross_sections},
      {"free path convergence", [&] { return freepath(configs); }},
      {"joint transition convergence", [&] { return transition(configs); }},
      {"Poisson baseline", [&] { return poisson(configs); }},
      {"stationarity of the flight process", [&] { return stationarity(configs); }},
      {"reproducibility", [&] { return reproducibility(configs); }},
  };
  const std::set<int> expected(expect_fail.begin(), expect_fail.end()), selected(only.begin(), only.end());
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool known = expected.count(id) > 0;
    if (!o.pass && !known) ++unexpected;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " (" << o.detail
              << "; " << fmt(secs) << " s)" << (!o.pass && known ? " [expected failure]" : "") << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
