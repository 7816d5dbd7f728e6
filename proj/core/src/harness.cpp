#include "polyxport/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include "polyxport/scattering.hpp"

namespace polyxport {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSystemStream = 0x5157;
constexpr std::uint64_t kOffsetDrawStream = 0x0FF5;
constexpr std::uint64_t kPoissonRunStream = 0x9015;
constexpr std::uint64_t kFlightSeedStream = 0xF11E;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const Scene& require_scene(const ExperimentConfig& c) {
  if (!c.scene) throw ConfigError(c.experiment + ": config has no scene");
  return *c.scene;
}

void require_schedule(const ExperimentConfig& c) {
  if (c.r_schedule.empty()) throw ConfigError(c.experiment + ": microsim.r schedule is empty");
}

ojson vec_json(const Vec& v) {
  ojson a = ojson::array();
  for (int i = 0; i < v.dim(); ++i) a.push_back(v[i]);
  return a;
}

ojson summary_header(const ExperimentConfig& c, const std::string& experiment) {
  ojson s;
  s["experiment"] = experiment;
  s["config_hash"] = config_hash(c);
  s["seed"] = c.seed;
  s["config"] = ojson::parse(c.canonical);
  return s;
}

void finish(RunReport& out, ojson& summary) {
  ojson v = ojson::object();
  for (const auto& verdict : out.verdicts) v[verdict.name] = verdict.pass;
  summary["verdicts"] = v;
  out.summary = summary.dump(2);
}

std::vector<std::string> indexed(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

void append(std::vector<std::string>& row, const Vec& v) {
  for (int i = 0; i < v.dim(); ++i) row.push_back(format_number(v[i]));
}

MicroSystem make_system(const ExperimentConfig& c, const Scene& scene, std::size_t run, double r) {
  MicroConfig mc;
  mc.r = r;
  mc.offset_mode = c.offset_mode;
  mc.seed = Rng::substream(c.seed, kSystemStream, run).bits();
  mc.escape_cutoff = c.escape_cutoff;
  mc.chunk_length = c.chunk_length;
  return MicroSystem(scene, mc);
}

struct MicroRun {
  double r = 0.0;
  Vec q;
  std::vector<FreePathSample> samples;
};

MicroRun micro_run(const ExperimentConfig& c, const Scene& scene, std::size_t run, double r) {
  const MicroSystem system = make_system(c, scene, run, r);
  MicroRun out;
  out.r = r;
  out.q = c.q ? *c.q : generic_offset(system, c, run);
  FreePathRequest req;
  req.base = c.base;
  req.q = out.q;
  req.law = c.law;
  req.samples = c.samples;
  req.on_scatterer = c.on_scatterer;
  req.start = c.start;
  req.fresh_poisson = c.fresh_poisson;
  req.stream = run + 1;
  req.threads = c.threads;
  out.samples = sample_tau1_distribution(system, req);
  return out;
}

Table samples_table(const std::vector<MicroRun>& runs, int dim) {
  Table t{"samples", {"sample_id", "r", "tau1", "hit_grain"}, {}};
  for (const auto& c : indexed("wK_", dim)) t.columns.push_back(c);
  t.columns.push_back("escaped");
  for (const auto& run : runs)
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
      const auto& s = run.samples[i];
      std::vector<std::string> row{std::to_string(i), format_number(run.r), format_number(s.tau),
                                   std::to_string(s.grain)};
      append(row, s.impact);
      row.push_back(s.escaped ? "1" : "0");
      t.add(std::move(row));
    }
  return t;
}

// Exit parameter of the on-scatterer start for direction v, if any.
std::optional<Vec> start_parameter(const ExperimentConfig& c, const Vec& v) {
  if (!c.on_scatterer) return std::nullopt;
  return c.start.exit_parameter(v);
}

double average_survival(const PolyKernel& k, const ExperimentConfig& c,
                        const std::vector<std::pair<Vec, double>>& dirs, double xi) {
  double s = 0.0;
  for (const auto& [v, w] : dirs) {
    const auto z = start_parameter(c, v);
    s += w * (z ? k.survival_from_exit(c.base, v, xi, *z) : k.survival(c.base, v, xi));
  }
  return s;
}

std::vector<double> collect_taus(const std::vector<FreePathSample>& samples, std::size_t& escaped) {
  std::vector<double> taus;
  escaped = 0;
  for (const auto& s : samples) {
    if (s.escaped)
      ++escaped;
    else
      taus.push_back(s.tau);
  }
  return taus;
}

}  // namespace

LimitCdf::LimitCdf(const PolyKernel& kernel, const ExperimentConfig& c) {
  const Scene& scene = kernel.scene();
  const auto dirs = c.law.quadrature(scene.dim(), c.directions);
  escape_ = average_survival(kernel, c, dirs, kInf);
  double horizon = 0.0;
  if (!scene.periodic()) {
    for (const auto& g : scene.grains())
      for (const auto& p : g.vertices()) horizon = std::max(horizon, (p - c.base).norm());
    horizon = horizon * (1.0 + 1e-9) + 1e-9;
  } else {
    horizon = 10.0 / kernel.sigma_bar();
    while (average_survival(kernel, c, dirs, horizon) - escape_ > 1e-10 && horizon < kernel.walk_cutoff())
      horizon *= 2.0;
  }
  const int n = c.grid_points;
  grid_.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) grid_[static_cast<std::size_t>(i)] = horizon * i / n;
  std::vector<double> surv(grid_.size(), 0.0);
  for (const auto& [v, w] : dirs) {
    const auto profile = kernel.survival_profile(c.base, v, grid_, start_parameter(c, v));
    for (std::size_t i = 0; i < grid_.size(); ++i) surv[i] += w * profile[i];
  }
  cdf_.resize(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) cdf_[i] = 1.0 - surv[i];
}

double LimitCdf::operator()(double xi) const {
  if (!(xi > 0.0)) return 0.0;
  if (std::isinf(xi)) return 1.0 - escape_;
  if (xi >= grid_.back()) return cdf_.back();
  const double h = grid_[1] - grid_[0];
  const auto i = std::min(static_cast<std::size_t>(xi / h), grid_.size() - 2);
  const double f = (xi - grid_[i]) / h;
  return cdf_[i] + f * (cdf_[i + 1] - cdf_[i]);
}

Vec generic_offset(const MicroSystem& system, const ExperimentConfig& c, std::size_t run) {
  Rng rng = Rng::substream(c.seed, kOffsetDrawStream, run);
  const int d = system.dim();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec q(d);
    for (int i = 0; i < d; ++i) q[i] = rng.uniform() - 0.5;
    if (c.on_scatterer || !system.covered(c.base + q * system.epsilon())) return q;
  }
  throw std::runtime_error("generic_offset: start point is covered for every draw");
}

FreePathReport run_freepath(const ExperimentConfig& c, RunReport* out) {
  const Scene& scene = require_scene(c);
  require_schedule(c);
  Stopwatch total;
  const PolyKernel kernel(scene);
  Stopwatch limit_clock;
  const LimitCdf cdf(kernel, c);
  const double limit_seconds = limit_clock.seconds();

  FreePathReport report;
  report.limit_escape_mass = cdf.escape_mass();
  std::vector<MicroRun> runs;
  std::vector<std::pair<std::string, double>> timings{{"limit_cdf", limit_seconds}};
  for (std::size_t k = 0; k < c.r_schedule.size(); ++k) {
    Stopwatch clock;
    runs.push_back(micro_run(c, scene, k, c.r_schedule[k]));
    std::size_t escaped = 0;
    const auto taus = collect_taus(runs.back().samples, escaped);
    FreePathRun fr;
    fr.r = c.r_schedule[k];
    fr.q = runs.back().q;
    fr.escaped = escaped;
    fr.ks = ks_one_sample(taus, [&](double x) { return cdf(x); }, escaped);
    report.runs.push_back(fr);
    timings.emplace_back("r=" + format_number(fr.r), clock.seconds());
  }
  report.decreasing = true;
  for (std::size_t k = 1; k < report.runs.size(); ++k)
    report.decreasing = report.decreasing && report.runs[k].ks.statistic < report.runs[k - 1].ks.statistic;
  report.below_threshold = report.runs.back().ks.statistic < c.thresholds.ks;

  if (out) {
    const int d = scene.dim();
    out->experiment = "freepath";
    Table ks{"ks", {"r", "samples", "escaped", "ks", "p_value"}, {}};
    for (const auto& col : indexed("q_", d)) ks.columns.push_back(col);
    for (const auto& r : report.runs) {
      std::vector<std::string> row{format_number(r.r), std::to_string(r.ks.n), std::to_string(r.escaped),
                                   format_number(r.ks.statistic), format_number(r.ks.p_value)};
      append(row, r.q);
      ks.add(std::move(row));
    }
    Table curve{"cdf", {"xi", "limit"}, {}};
    std::vector<std::vector<double>> sorted;
    for (const auto& run : runs) {
      curve.columns.push_back("empirical_r=" + format_number(run.r));
      std::size_t esc = 0;
      auto t = collect_taus(run.samples, esc);
      std::sort(t.begin(), t.end());
      sorted.push_back(std::move(t));
    }
    const std::size_t stride = std::max<std::size_t>(1, cdf.grid().size() / 400);
    for (std::size_t i = 0; i < cdf.grid().size(); i += stride) {
      const double xi = cdf.grid()[i];
      std::vector<std::string> row{format_number(xi), format_number(cdf.values()[i])};
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto le = std::upper_bound(sorted[k].begin(), sorted[k].end(), xi) - sorted[k].begin();
        row.push_back(format_number(static_cast<double>(le) / static_cast<double>(runs[k].samples.size())));
      }
      curve.add(std::move(row));
    }
    out->tables = {ks, curve};
    if (c.write_samples) out->tables.push_back(samples_table(runs, d));
    out->verdicts = {{"ks_decreasing", report.decreasing}, {"ks_below_threshold", report.below_threshold}};
    ojson s = summary_header(c, "freepath");
    s["limit_escape_mass"] = report.limit_escape_mass;
    ojson arr = ojson::array();
    for (const auto& r : report.runs) {
      ojson e;
      e["r"] = r.r;
      e["q"] = vec_json(r.q);
      e["samples"] = r.ks.n;
      e["escaped"] = r.escaped;
      e["escape_fraction"] = static_cast<double>(r.escaped) / static_cast<double>(r.ks.n);
      e["ks"] = r.ks.statistic;
      e["p_value"] = r.ks.p_value;
      arr.push_back(e);
    }
    s["runs"] = arr;
    s["ks_threshold"] = c.thresholds.ks;
    finish(*out, s);
    timings.emplace_back("total", total.seconds());
    out->timings = timings;
  }
  return report;
}

std::size_t transition_cell(const ExperimentConfig& c, double tau, const Vec& w) {
  const std::size_t nx = c.xi_edges.size() - 1, nw = c.w_edges.size() - 1;
  const std::size_t remainder = nx * nw;
  if (!(tau >= c.xi_edges.front() && tau < c.xi_edges.back())) return remainder;
  const double coord = w.dim() == 1 ? w[0] : w.norm();
  if (!(coord >= c.w_edges.front() && coord < c.w_edges.back())) return remainder;
  const auto i = static_cast<std::size_t>(std::upper_bound(c.xi_edges.begin(), c.xi_edges.end(), tau) -
                                          c.xi_edges.begin()) - 1;
  const auto j = static_cast<std::size_t>(std::upper_bound(c.w_edges.begin(), c.w_edges.end(), coord) -
                                          c.w_edges.begin()) - 1;
  return i * nw + j;
}

std::vector<double> transition_cell_probabilities(const PolyKernel& kernel, const ExperimentConfig& c) {
  using boost::math::quadrature::gauss;
  const Scene& scene = kernel.scene();
  const int d = scene.dim();
  const std::size_t nx = c.xi_edges.size() - 1, nw = c.w_edges.size() - 1;
  std::vector<double> mass(nx * nw + 1, 0.0);
  const auto dirs = c.law.quadrature(d, c.directions);
  for (const auto& [v, weight] : dirs) {
    const auto z = start_parameter(c, v);
    auto density = [&](double xi, const Vec& w) {
      return z ? kernel.psi0_full(c.base, v, xi, w, *z) : kernel.psi_w(c.base, v, xi, w);
    };
    // Integral over the w cell [lo, hi) (signed interval in d = 2, annulus in d = 3).
    auto over_w = [&](double xi, double lo, double hi) {
      if (d == 2) return gauss<double, 10>::integrate([&](double w) { return density(xi, Vec{w}); }, lo, hi);
      const int n_phi = 24;
      double total = 0.0;
      for (int k = 0; k < n_phi; ++k) {
        const double phi = 2.0 * std::numbers::pi * (k + 0.5) / n_phi;
        total += gauss<double, 8>::integrate(
            [&](double rho) { return density(xi, Vec{rho * std::cos(phi), rho * std::sin(phi)}) * rho; }, lo, hi);
      }
      return total * 2.0 * std::numbers::pi / n_phi;
    };
    const auto segments = scene.itinerary(c.base, v, c.xi_edges.back());
    for (std::size_t i = 0; i < nx; ++i) {
      const double a = c.xi_edges[i], b = c.xi_edges[i + 1];
      for (const auto& s : segments) {
        const double lo = std::max(a, s.entry), hi = std::min(b, s.exit);
        if (!(hi > lo)) continue;
        for (std::size_t j = 0; j < nw; ++j) {
          const double m = gauss<double, 10>::integrate(
              [&](double xi) { return over_w(xi, c.w_edges[j], c.w_edges[j + 1]); }, lo, hi);
          mass[i * nw + j] += weight * m;
        }
      }
    }
  }
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < mass.size(); ++k) sum += mass[k];
  mass.back() = std::max(0.0, 1.0 - sum);
  return mass;
}

TransitionReport run_transition(const ExperimentConfig& c, RunReport* out) {
  const Scene& scene = require_scene(c);
  require_schedule(c);
  Stopwatch total;
  const PolyKernel kernel(scene);
  TransitionReport report;
  Stopwatch limit_clock;
  report.cell_probabilities = transition_cell_probabilities(kernel, c);
  std::vector<std::pair<std::string, double>> timings{{"limit_cells", limit_clock.seconds()}};
  std::vector<MicroRun> runs;
  for (std::size_t k = 0; k < c.r_schedule.size(); ++k) {
    Stopwatch clock;
    runs.push_back(micro_run(c, scene, k, c.r_schedule[k]));
    TransitionRun tr;
    tr.r = c.r_schedule[k];
    tr.observed.assign(report.cell_probabilities.size(), 0.0);
    for (const auto& s : runs.back().samples) {
      const std::size_t cell = s.escaped ? tr.observed.size() - 1 : transition_cell(c, s.tau, perp(s.impact));
      tr.observed[cell] += 1.0;
    }
    for (double p : report.cell_probabilities) tr.expected.push_back(p * static_cast<double>(c.samples));
    tr.chi = chi_square_gof(tr.observed, report.cell_probabilities);
    report.runs.push_back(tr);
    timings.emplace_back("r=" + format_number(tr.r), clock.seconds());
  }
  if (out) {
    out->experiment = "transition";
    const std::size_t nw = c.w_edges.size() - 1;
    Table cells{"cells", {"r", "xi_lo", "xi_hi", "w_lo", "w_hi", "observed", "expected"}, {}};
    for (const auto& tr : report.runs)
      for (std::size_t k = 0; k < tr.observed.size(); ++k) {
        const bool rest = k + 1 == tr.observed.size();
        const std::size_t i = k / nw, j = k % nw;
        cells.add({format_number(tr.r), rest ? "" : format_number(c.xi_edges[i]),
                   rest ? "" : format_number(c.xi_edges[i + 1]), rest ? "" : format_number(c.w_edges[j]),
                   rest ? "" : format_number(c.w_edges[j + 1]), format_number(tr.observed[k]),
                   format_number(tr.expected[k])});
      }
    Table chi{"chi_square", {"r", "statistic", "dof", "p_value"}, {}};
    for (const auto& tr : report.runs)
      chi.add({format_number(tr.r), format_number(tr.chi.statistic), format_number(tr.chi.dof),
               format_number(tr.chi.p_value)});
    out->tables = {cells, chi};
    if (c.write_samples) out->tables.push_back(samples_table(runs, scene.dim()));
    out->verdicts = {{"smallest_r_not_rejected", report.runs.back().chi.p_value >= c.thresholds.alpha}};
    ojson s = summary_header(c, "transition");
    s["cell_probabilities"] = report.cell_probabilities;
    ojson arr = ojson::array();
    for (const auto& tr : report.runs) {
      ojson e;
      e["r"] = tr.r;
      e["chi_square"] = tr.chi.statistic;
      e["dof"] = tr.chi.dof;
      e["p_value"] = tr.chi.p_value;
      e["escape_fraction"] = tr.observed.back() / static_cast<double>(c.samples);
      arr.push_back(e);
    }
    s["runs"] = arr;
    s["alpha"] = c.thresholds.alpha;
    finish(*out, s);
    timings.emplace_back("total", total.seconds());
    out->timings = timings;
  }
  return report;
}

namespace {

double poisson_pmf(double mean, int n) { return std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0)); }

// Bin of an exit parameter: signed coordinate in d = 2, squared norm in d = 3.
std::size_t exit_bin(const Vec& s, std::size_t bins) {
  const double u = s.dim() == 1 ? (s[0] + 1.0) / 2.0 : s.norm2();
  return std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, u) * static_cast<double>(bins)));
}

}  // namespace

PoissonBaselineReport run_poisson_baseline(const ExperimentConfig& c, RunReport* out) {
  const Scene& scene = require_scene(c);
  require_schedule(c);
  for (const auto& m : scene.media())
    if (m.kind != MediumKind::poisson) throw ConfigError("poisson-baseline: every grain must be a Poisson medium");
  if (!scene.periodic()) throw ConfigError("poisson-baseline: the main scene must be a periodic tiling");
  Stopwatch total;
  const int d = scene.dim();
  const double sb = unit_ball_volume(d);
  const double r = c.r_schedule.back();
  PoissonBaselineReport report;
  std::vector<std::pair<std::string, double>> timings;

  // Exponential free paths from the configured start.
  Stopwatch clock;
  ExperimentConfig fc = c;
  fc.fresh_poisson = true;
  fc.on_scatterer = false;
  const MicroRun run = micro_run(fc, scene, 0, r);
  std::size_t escaped = 0;
  const auto taus = collect_taus(run.samples, escaped);
  report.exponential = ks_one_sample(taus, [&](double x) { return x > 0.0 ? -std::expm1(-sb * x) : 0.0; }, escaped);
  timings.emplace_back("exponential", clock.seconds());

  // Next free path against the exit parameter of the first collision, and
  // collision counts up to three mean free paths.
  clock = Stopwatch();
  const MicroSystem system = make_system(fc, scene, 1, r);
  const std::size_t n_traj = std::max<std::size_t>(1000, c.samples / 5);
  const std::size_t exit_bins = 8, path_bins = 5;
  const double t_count = 3.0 / sb;
  std::vector<int> exit_of(n_traj, -1), path_of(n_traj, -1), counts(n_traj, 0);
  parallel_for(n_traj, c.threads, [&](std::size_t i) {
    Rng rng = Rng::substream(c.seed, kPoissonRunStream, i);
    std::optional<MicroSystem> local;
    do local.emplace(system.with_poisson_seed(rng.bits()));
    while (local->covered(c.base));
    const Vec v0 = rng.unit_vector(d);
    counts[i] = static_cast<int>(local->trajectory(c.base, v0, t_count).events.size());
    const auto first = local->first_collision(c.base, v0);
    if (!first) return;
    const auto second = local->first_collision(first->position, first->v_out, first->id);
    const double xi = second ? second->time : kInf;
    exit_of[i] = static_cast<int>(exit_bin(exit_param(first->v_out, v0), exit_bins));
    const double u = -std::expm1(-sb * xi);
    path_of[i] = static_cast<int>(std::min(path_bins - 1, static_cast<std::size_t>(u * path_bins)));
  });
  std::vector<std::vector<double>> table(exit_bins, std::vector<double>(path_bins, 0.0));
  for (std::size_t i = 0; i < n_traj; ++i)
    if (exit_of[i] >= 0) table[static_cast<std::size_t>(exit_of[i])][static_cast<std::size_t>(path_of[i])] += 1.0;
  report.memoryless = chi_square_independence(table);
  const double mean = sb * t_count;
  int max_n = 0;
  for (int n : counts) max_n = std::max(max_n, n);
  std::vector<double> observed(static_cast<std::size_t>(max_n) + 2, 0.0), probs(observed.size(), 0.0);
  for (int n : counts) observed[static_cast<std::size_t>(n)] += 1.0;
  double acc = 0.0;
  for (std::size_t n = 0; n + 1 < probs.size(); ++n) acc += probs[n] = poisson_pmf(mean, static_cast<int>(n));
  probs.back() = std::max(0.0, 1.0 - acc);
  report.counts = chi_square_gof(observed, probs);
  timings.emplace_back("memoryless_and_counts", clock.seconds());

  // Survival with gaps.
  if (c.gap_scene) {
    clock = Stopwatch();
    ExperimentConfig gc = fc;
    gc.scene = c.gap_scene;
    gc.base = c.gap_start.dim() == c.gap_scene->dim() ? c.gap_start : Vec::zero(c.gap_scene->dim());
    gc.q = Vec::zero(c.gap_scene->dim());
    const PolyKernel kernel(*c.gap_scene);
    const LimitCdf cdf(kernel, gc);
    const MicroRun gap_run = micro_run(gc, *c.gap_scene, 2, r);
    std::size_t gap_escaped = 0;
    const auto gap_taus = collect_taus(gap_run.samples, gap_escaped);
    report.gap = ks_one_sample(gap_taus, [&](double x) { return cdf(x); }, gap_escaped);
    report.gap_escape_mass = cdf.escape_mass();
    timings.emplace_back("gap", clock.seconds());
  }

  if (out) {
    out->experiment = "poisson";
    Table t{"tests", {"test", "statistic", "dof", "p_value", "threshold", "pass"}, {}};
    const bool exp_ok = report.exponential.statistic < c.thresholds.poisson_ks;
    const bool mem_ok = report.memoryless.p_value >= c.thresholds.alpha;
    const bool cnt_ok = report.counts.p_value >= c.thresholds.alpha;
    t.add({"exponential_ks", format_number(report.exponential.statistic), "", format_number(report.exponential.p_value),
           format_number(c.thresholds.poisson_ks), exp_ok ? "1" : "0"});
    t.add({"memoryless_chi_square", format_number(report.memoryless.statistic), format_number(report.memoryless.dof),
           format_number(report.memoryless.p_value), format_number(c.thresholds.alpha), mem_ok ? "1" : "0"});
    t.add({"counts_chi_square", format_number(report.counts.statistic), format_number(report.counts.dof),
           format_number(report.counts.p_value), format_number(c.thresholds.alpha), cnt_ok ? "1" : "0"});
    out->verdicts = {{"exponential", exp_ok}, {"memoryless", mem_ok}, {"counts", cnt_ok}};
    if (c.gap_scene) {
      const bool gap_ok = report.gap.statistic < c.thresholds.gap_ks;
      t.add({"gap_ks", format_number(report.gap.statistic), "", format_number(report.gap.p_value),
             format_number(c.thresholds.gap_ks), gap_ok ? "1" : "0"});
      out->verdicts.push_back({"gap", gap_ok});
    }
    Table ct{"counts", {"collisions", "observed", "expected"}, {}};
    for (std::size_t n = 0; n < observed.size(); ++n)
      ct.add({n + 1 == observed.size() ? ">=" + std::to_string(n) : std::to_string(n), format_number(observed[n]),
              format_number(probs[n] * static_cast<double>(n_traj))});
    out->tables = {t, ct};
    ojson s = summary_header(c, "poisson");
    s["r"] = r;
    s["samples"] = report.exponential.n;
    s["exponential_ks"] = report.exponential.statistic;
    s["memoryless_p_value"] = report.memoryless.p_value;
    s["counts_p_value"] = report.counts.p_value;
    if (c.gap_scene) {
      s["gap_ks"] = report.gap.statistic;
      s["gap_escape_mass"] = report.gap_escape_mass;
    }
    finish(*out, s);
    timings.emplace_back("total", total.seconds());
    out->timings = timings;
  }
  return report;
}

namespace {

std::vector<MarginalComparison> fisher_combine(const std::vector<StationaritySeed>& seeds, bool semigroup) {
  std::vector<MarginalComparison> out;
  if (seeds.empty()) return out;
  const auto& first = semigroup ? seeds[0].report.semigroup : seeds[0].report.stationarity;
  for (std::size_t m = 0; m < first.size(); ++m) {
    double stat = 0.0, worst = 0.0;
    for (const auto& s : seeds) {
      const auto& c = (semigroup ? s.report.semigroup : s.report.stationarity)[m];
      stat += -2.0 * std::log(std::max(c.p_value, 1e-300));
      worst = std::max(worst, c.statistic);
    }
    out.push_back({first[m].name, worst, chi_square_survival(stat, 2.0 * static_cast<double>(seeds.size()))});
  }
  return out;
}

bool gated(const std::string& name) { return name == "xi" || name.rfind("v_plus", 0) == 0; }

}  // namespace

StationaritySummary run_stationarity(const ExperimentConfig& c, RunReport* out) {
  const Scene& scene = require_scene(c);
  if (!scene.periodic()) throw ConfigError("stationarity: needs a periodic scene");
  Stopwatch total;
  const PolyKernel kernel(scene);
  const FlightProcess process(kernel, c.flight.sampler);
  const double mfp = 1.0 / kernel.sigma_bar();
  StationaritySummary summary;
  for (std::size_t k = 0; k < c.flight.seeds; ++k) {
    EnsembleRequest req;
    req.particles = c.flight.particles;
    req.seed = Rng::substream(c.seed, kFlightSeedStream, k).bits();
    req.threads = c.threads;
    summary.seeds.push_back({req.seed, stationarity_test(process, req, c.flight.time * mfp, c.flight.split * mfp)});
  }
  summary.combined_stationarity = fisher_combine(summary.seeds, false);
  summary.combined_semigroup = fisher_combine(summary.seeds, true);
  if (out) {
    out->experiment = "stationarity";
    Table per{"per_seed", {"seed", "test", "marginal", "ks", "p_value"}, {}};
    for (const auto& s : summary.seeds) {
      for (const auto& m : s.report.stationarity)
        per.add({std::to_string(s.seed), "stationarity", m.name, format_number(m.statistic), format_number(m.p_value)});
      for (const auto& m : s.report.semigroup)
        per.add({std::to_string(s.seed), "semigroup", m.name, format_number(m.statistic), format_number(m.p_value)});
    }
    Table comb{"combined", {"test", "marginal", "max_ks", "fisher_p_value", "gating"}, {}};
    bool stat_ok = true, semi_ok = true;
    for (const auto& m : summary.combined_stationarity) {
      comb.add({"stationarity", m.name, format_number(m.statistic), format_number(m.p_value), gated(m.name) ? "1" : "0"});
      if (gated(m.name)) stat_ok = stat_ok && m.p_value >= c.thresholds.alpha;
    }
    for (const auto& m : summary.combined_semigroup) {
      comb.add({"semigroup", m.name, format_number(m.statistic), format_number(m.p_value), gated(m.name) ? "1" : "0"});
      if (gated(m.name)) semi_ok = semi_ok && m.p_value >= c.thresholds.alpha;
    }
    out->tables = {per, comb};
    out->verdicts = {{"stationarity", stat_ok}, {"semigroup", semi_ok}};
    ojson s = summary_header(c, "stationarity");
    s["factorized_sampler"] = process.factorized();
    s["time"] = c.flight.time * mfp;
    s["split"] = c.flight.split * mfp;
    s["particles"] = c.flight.particles;
    ojson seeds = ojson::array();
    for (const auto& sd : summary.seeds) seeds.push_back(sd.seed);
    s["seeds"] = seeds;
    ojson comb_json = ojson::object();
    for (const auto& m : summary.combined_stationarity) comb_json["stationarity_" + m.name] = m.p_value;
    for (const auto& m : summary.combined_semigroup) comb_json["semigroup_" + m.name] = m.p_value;
    s["fisher_p_values"] = comb_json;
    finish(*out, s);
    out->timings = {{"total", total.seconds()}};
  }
  return summary;
}

double no_collision_fraction(const PolyKernel& kernel, double t, int position_nodes, int direction_nodes) {
  const Scene& scene = kernel.scene();
  const int d = scene.dim();
  Vec lo(d), hi(d);
  if (scene.periodic()) {
    lo = scene.box()->lo;
    hi = scene.box()->hi;
  } else {
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
  }
  const auto dirs = DirectionLaw{}.quadrature(d, direction_nodes);
  double total = 0.0, weight = 0.0;
  const int n = position_nodes;
  const int cells = d == 2 ? n * n : n * n * n;
  for (int idx = 0; idx < cells; ++idx) {
    Vec x(d);
    int code = idx;
    for (int i = 0; i < d; ++i) {
      x[i] = lo[i] + (hi[i] - lo[i]) * ((code % n) + 0.5) / n;
      code /= n;
    }
    if (!scene.periodic() && std::none_of(scene.grains().begin(), scene.grains().end(),
                                          [&](const ConvexGrain& g) { return g.contains(x); }))
      continue;
    weight += 1.0;
    for (const auto& [v, w] : dirs) total += w * kernel.survival(x, v, t);
  }
  return weight > 0.0 ? total / weight : 0.0;
}

RunReport run_flight(const ExperimentConfig& c) {
  if (c.flight.report == "stationarity") {
    RunReport out;
    run_stationarity(c, &out);
    out.experiment = "flight";
    return out;
  }
  const Scene& scene = require_scene(c);
  Stopwatch total;
  const PolyKernel kernel(scene);
  const FlightProcess process(kernel, c.flight.sampler);
  const double t = c.flight.time / kernel.sigma_bar();
  EnsembleRequest req;
  req.particles = c.flight.particles;
  req.seed = c.seed;
  req.threads = c.threads;
  const auto ensemble = run_ensemble(process, req, {t});
  RunReport out;
  out.experiment = "flight";
  ojson s = summary_header(c, "flight");
  s["time"] = t;
  s["particles"] = c.flight.particles;
  s["factorized_sampler"] = process.factorized();
  const int d = scene.dim();
  if (c.flight.report == "ncollision") {
    const auto h = n_collision_histogram(ensemble);
    Table tab{"ncollision", {"collisions", "count", "fraction"}, {}};
    for (std::size_t n = 0; n < h.counts.size(); ++n)
      tab.add({std::to_string(n), std::to_string(h.counts[n]),
               format_number(static_cast<double>(h.counts[n]) / static_cast<double>(h.total))});
    out.tables = {tab};
    const double empirical = h.counts.empty() ? 0.0 : static_cast<double>(h.counts[0]) / static_cast<double>(h.total);
    const double expected = no_collision_fraction(kernel, t, d == 2 ? 64 : 16, d == 2 ? 256 : 512);
    const double rel = expected > 0.0 ? std::abs(empirical - expected) / expected : std::abs(empirical);
    s["escaped"] = h.escaped;
    s["no_collision_fraction"] = empirical;
    s["no_collision_limit"] = expected;
    s["relative_error"] = rel;
    out.verdicts = {{"no_collision_fraction", rel < 0.02}};
  } else {
    Table tab{"marginals", {"particle"}, {}};
    for (const auto& col : indexed("x_", d)) tab.columns.push_back(col);
    for (const auto& col : indexed("v_", d)) tab.columns.push_back(col);
    tab.columns.push_back("xi");
    for (const auto& col : indexed("v_plus_", d)) tab.columns.push_back(col);
    tab.columns.push_back("collisions");
    tab.columns.push_back("escaped");
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
      const auto& e = ensemble[i];
      std::vector<std::string> row{std::to_string(i)};
      append(row, wrap_position(scene, e.x));
      append(row, e.v);
      row.push_back(format_number(e.xi));
      append(row, e.v_plus);
      row.push_back(std::to_string(e.collisions));
      row.push_back(e.escaped ? "1" : "0");
      tab.add(std::move(row));
    }
    out.tables = {tab};
  }
  finish(out, s);
  out.timings = {{"total", total.seconds()}};
  return out;
}

RunReport run_microsim(const ExperimentConfig& c) {
  const Scene& scene = require_scene(c);
  require_schedule(c);
  Stopwatch total;
  std::vector<MicroRun> runs;
  for (std::size_t k = 0; k < c.r_schedule.size(); ++k) runs.push_back(micro_run(c, scene, k, c.r_schedule[k]));
  RunReport out;
  out.experiment = "microsim";
  out.tables = {samples_table(runs, scene.dim())};
  ojson s = summary_header(c, "microsim");
  ojson arr = ojson::array();
  for (const auto& run : runs) {
    std::size_t escaped = 0;
    const auto taus = collect_taus(run.samples, escaped);
    double mean = 0.0;
    for (double t : taus) mean += t;
    ojson e;
    e["r"] = run.r;
    e["q"] = vec_json(run.q);
    e["samples"] = run.samples.size();
    e["escaped"] = escaped;
    e["mean_tau1"] = taus.empty() ? 0.0 : mean / static_cast<double>(taus.size());
    arr.push_back(e);
  }
  s["runs"] = arr;
  finish(out, s);
  out.timings = {{"total", total.seconds()}};
  return out;
}

RunReport run_kernel_tables(const ExperimentConfig& c) {
  RunReport out;
  out.experiment = "kernels";
  ojson s = summary_header(c, "kernels");
  std::size_t skipped = 0;
  for (int d : c.kernels.dims) {
    const int p = d - 1;
    Table t{"d" + std::to_string(d), {"function", "medium", "d", "xi"}, {}};
    for (const auto& col : indexed("w_", p)) t.columns.push_back(col);
    for (const auto& col : indexed("z_", p)) t.columns.push_back(col);
    t.columns.push_back("value");
    auto param = [&](const std::vector<double>& xs) {
      if (static_cast<int>(xs.size()) != p) throw ConfigError("kernel_tables: parameter dimension must be d-1");
      Vec v(p);
      for (int i = 0; i < p; ++i) v[i] = xs[static_cast<std::size_t>(i)];
      return v;
    };
    for (const auto& medium : c.kernels.media) {
      const KernelModel m = medium == "poisson" ? KernelModel::poisson(d) : KernelModel::crystal(d);
      auto emit = [&](const std::string& fn, double xi, const Vec* w, const Vec* z, double value) {
        std::vector<std::string> row{fn, medium, std::to_string(d), format_number(xi)};
        for (const Vec* par : {w, z})
          for (int i = 0; i < p; ++i) row.push_back(par ? format_number((*par)[i]) : "");
        row.push_back(format_number(value));
        t.add(std::move(row));
      };
      for (double xi : c.kernels.xi) {
        if (!(xi >= 0.0 && xi <= m.max_xi())) {
          ++skipped;
          continue;
        }
        emit("path_density", xi, nullptr, nullptr, m.path_density(xi));
        emit("survival", xi, nullptr, nullptr, m.survival(xi));
        for (std::size_t k = 0; k < c.kernels.w.size(); ++k) {
          const Vec w = param(c.kernels.w[k]);
          emit("exit_survival", xi, &w, nullptr, m.exit_survival(xi, w));
          emit("exit_path_density", xi, &w, nullptr, m.exit_path_density(xi, w));
          if (k < c.kernels.z.size()) {
            const Vec z = param(c.kernels.z[k]);
            emit("transition_density", xi, &w, &z, m.transition_density(xi, w, z));
          }
        }
      }
    }
    out.tables.push_back(std::move(t));
  }
  s["skipped_out_of_range"] = skipped;
  finish(out, s);
  return out;
}

RunReport run_psi(const ExperimentConfig& c) {
  const Scene& scene = require_scene(c);
  if (!c.psi) throw ConfigError("psi: config has no psi query");
  const PolyKernel kernel(scene);
  const PsiQuery& q = *c.psi;
  const int d = scene.dim();
  Table t{"values", {"function"}, {}};
  for (const auto& col : indexed("x_", d)) t.columns.push_back(col);
  for (const auto& col : indexed("v_", d)) t.columns.push_back(col);
  t.columns.push_back("xi");
  for (const auto& col : indexed("w_", d - 1)) t.columns.push_back(col);
  for (const auto& col : indexed("z_", d - 1)) t.columns.push_back(col);
  t.columns.push_back("value");
  auto emit = [&](const std::string& fn, double xi, bool with_w, bool with_z, double value) {
    std::vector<std::string> row{fn};
    append(row, q.x);
    append(row, q.v);
    row.push_back(format_number(xi));
    for (int i = 0; i < d - 1; ++i) row.push_back(with_w ? format_number((*q.w)[i]) : "");
    for (int i = 0; i < d - 1; ++i) row.push_back(with_z ? format_number((*q.z)[i]) : "");
    row.push_back(format_number(value));
    t.add(std::move(row));
  };
  for (double xi : q.xi) {
    emit("psi", xi, false, false, kernel.psi(q.x, q.v, xi));
    emit("survival", xi, false, false, kernel.survival(q.x, q.v, xi));
    if (q.w) {
      emit("psi_w", xi, true, false, kernel.psi_w(q.x, q.v, xi, *q.w));
      emit("psi0", xi, true, false, kernel.psi0(q.x, q.v, xi, *q.w));
    }
    if (q.z) emit("survival_from_exit", xi, false, true, kernel.survival_from_exit(q.x, q.v, xi, *q.z));
    if (q.w && q.z) emit("psi0_full", xi, true, true, kernel.psi0_full(q.x, q.v, xi, *q.w, *q.z));
  }
  RunReport out;
  out.experiment = "psi";
  out.tables = {t};
  ojson s = summary_header(c, "psi");
  finish(out, s);
  return out;
}

RunReport run_experiment(const ExperimentConfig& c) {
  RunReport out;
  if (c.experiment == "freepath") {
    run_freepath(c, &out);
  } else if (c.experiment == "transition") {
    run_transition(c, &out);
  } else if (c.experiment == "poisson-baseline") {
    run_poisson_baseline(c, &out);
  } else if (c.experiment == "stationarity") {
    run_stationarity(c, &out);
  } else if (c.experiment == "flight") {
    out = run_flight(c);
  } else if (c.experiment == "microsim") {
    out = run_microsim(c);
  } else if (c.experiment == "kernel-tables") {
    out = run_kernel_tables(c);
  } else if (c.experiment == "psi") {
    out = run_psi(c);
  } else {
    throw ConfigError("no experiment kind given");
  }
  return out;
}

}  // namespace polyxport
