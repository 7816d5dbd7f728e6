#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polyxport/flight.hpp"
#include "polyxport/microsim.hpp"
#include "polyxport/polykernel.hpp"
#include "polyxport/stats.hpp"

namespace polyxport {

/// Error in an experiment configuration (unknown key, wrong type, bad value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Thresholds {
  double ks = 0.02;           // free path KS distance at the smallest r
  double alpha = 0.01;        // significance level of chi-square and two-sample tests
  double poisson_ks = 0.005;  // exponential free paths
  double gap_ks = 0.01;       // gap scene survival
};

struct FlightSettings {
  std::size_t particles = 100000;
  double time = 5.0;   // in mean free paths
  double split = 2.0;  // first step of the semigroup test, in mean free paths
  std::size_t seeds = 1;
  SamplerKind sampler = SamplerKind::automatic;
  std::string report = "stationarity";
};

struct KernelTableSettings {
  std::vector<std::string> media{"crystal"};
  std::vector<int> dims{2};
  std::vector<double> xi;
  std::vector<std::vector<double>> w;  // impact parameters, one per row
  std::vector<std::vector<double>> z;  // exit parameters, one per row
};

struct PsiQuery {
  Vec x;
  Vec v;
  std::vector<double> xi;
  std::optional<Vec> w;
  std::optional<Vec> z;
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::shared_ptr<const Scene> scene;
  std::shared_ptr<const Scene> gap_scene;  // poisson-baseline only
  Vec gap_start;
  bool assume_incommensurable = false;

  std::vector<double> r_schedule;
  std::size_t samples = 1000;
  OffsetMode offset_mode = OffsetMode::anchored;
  double chunk_length = 0.25;
  double escape_cutoff = 0.0;
  bool fresh_poisson = true;

  Vec base;
  std::optional<Vec> q;  // nullopt: random per run
  bool on_scatterer = false;
  StartOffset start;
  DirectionLaw law;

  int directions = 1024;   // quadrature nodes over the direction law
  int grid_points = 4000;  // xi grid of the limit CDF
  std::vector<double> xi_edges{0.0, 0.1, 0.2, 0.35, 0.6};
  std::vector<double> w_edges{-1.0, -0.5, 0.0, 0.5, 1.0};
  bool write_samples = false;

  FlightSettings flight;
  KernelTableSettings kernels;
  std::optional<PsiQuery> psi;
  Thresholds thresholds;

  /// Canonical (sorted, compact) JSON text of the input document.
  std::string canonical;
};

/// Parses a JSON experiment document. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Scene description alone (the "scene" object of a config).
std::shared_ptr<const Scene> parse_scene(std::string_view text, bool assume_incommensurable = false);

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a(std::string_view text);
std::string config_hash(const ExperimentConfig& config);

/// Shortest round-trip decimal form of a double ("inf", "-inf", "nan" for
/// non-finite values).
std::string format_number(double x);
/// Field quoted per RFC 4180 when it contains a comma, quote or line break.
std::string csv_field(std::string_view field);

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  void add(std::vector<std::string> row);
  std::string to_csv() const;
};

struct Verdict {
  std::string name;
  bool pass = false;
};

struct RunReport {
  std::string experiment;
  std::vector<Table> tables;
  std::string summary;  // JSON text, deterministic for given (config, seed)
  std::vector<Verdict> verdicts;
  std::vector<std::pair<std::string, double>> timings;  // seconds
  bool passed() const;
};

/// Writes <experiment>_<table>.csv, <experiment>_summary.json and the
/// <experiment>_timings.json sidecar into dir.
void write_report(const RunReport& report, const std::filesystem::path& dir);

struct FreePathRun {
  double r = 0.0;
  Vec q;
  KsResult ks;
  std::size_t escaped = 0;
};

struct FreePathReport {
  std::vector<FreePathRun> runs;
  double limit_escape_mass = 0.0;
  bool decreasing = false;
  bool below_threshold = false;
};

/// Limit distribution function of the free path over the direction law.
class LimitCdf {
 public:
  LimitCdf(const PolyKernel& kernel, const ExperimentConfig& config);
  double operator()(double xi) const;
  double escape_mass() const { return escape_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return cdf_; }

 private:
  std::vector<double> grid_;
  std::vector<double> cdf_;
  double escape_ = 0.0;
};

struct TransitionRun {
  double r = 0.0;
  ChiSquareResult chi;
  std::vector<double> observed;
  std::vector<double> expected;
};

struct TransitionReport {
  std::vector<TransitionRun> runs;
  std::vector<double> cell_probabilities;  // row-major (xi, w) cells, then the remainder
};

struct PoissonBaselineReport {
  KsResult exponential;
  ChiSquareResult memoryless;
  ChiSquareResult counts;
  KsResult gap;
  double gap_escape_mass = 0.0;
};

struct StationaritySeed {
  std::uint64_t seed = 0;
  StationarityReport report;
};

struct StationaritySummary {
  std::vector<StationaritySeed> seeds;
  /// Fisher combination over seeds of the p-values of each compared marginal.
  std::vector<MarginalComparison> combined_stationarity;
  std::vector<MarginalComparison> combined_semigroup;
};

/// Impact parameter cell probabilities of the limit law, row-major over
/// (xi_edges intervals) x (w_edges intervals), followed by the remainder
/// (later collisions and escape).
std::vector<double> transition_cell_probabilities(const PolyKernel& kernel, const ExperimentConfig& config);
/// Cell index of a sample in the same layout (remainder cell for misses).
std::size_t transition_cell(const ExperimentConfig& config, double tau, const Vec& impact_param);

/// Random q in the centred unit cell, redrawn while the start lies inside a
/// scatterer.
Vec generic_offset(const MicroSystem& system, const ExperimentConfig& config, std::size_t run);

FreePathReport run_freepath(const ExperimentConfig& config, RunReport* out = nullptr);
TransitionReport run_transition(const ExperimentConfig& config, RunReport* out = nullptr);
PoissonBaselineReport run_poisson_baseline(const ExperimentConfig& config, RunReport* out = nullptr);
StationaritySummary run_stationarity(const ExperimentConfig& config, RunReport* out = nullptr);
/// Collision-count histogram of an ensemble and the no-collision fraction of the limit law.
RunReport run_flight(const ExperimentConfig& config);
RunReport run_microsim(const ExperimentConfig& config);
RunReport run_kernel_tables(const ExperimentConfig& config);
RunReport run_psi(const ExperimentConfig& config);

/// Dispatches on config.experiment.
RunReport run_experiment(const ExperimentConfig& config);

/// Expected fraction of particles without collision up to time t for the
/// stationary start with uniform f0, by quadrature over position and direction.
double no_collision_fraction(const PolyKernel& kernel, double t, int position_nodes, int direction_nodes);

}  // namespace polyxport
