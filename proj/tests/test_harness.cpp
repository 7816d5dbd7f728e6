#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "polyxport/harness.hpp"
#include "support.hpp"

namespace polyxport {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("polyxport_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

constexpr const char* kTwoSquares = R"({
  "dim": 2,
  "grains": [
    {"box": {"lo": [0, 0], "hi": [0.3, 0.3]}, "medium": "crystal", "lattice": {"basis": "cubic"}},
    {"box": {"lo": [0.3, 0], "hi": [0.6, 0.3]}, "medium": "crystal", "lattice": {"basis": "cubic", "rotation": 0.5}}
  ]
})";

std::string freepath_config(const std::string& extra = "") {
  return std::string(R"({"experiment": "freepath", "seed": 5, "assume_incommensurable": true, "scene": )") +
         kTwoSquares + R"(, "microsim": {"r": [0.02, 0.01], "samples": 2000}, "start": {"x": [0.15, 0.15]})" + extra +
         "}";
}

TEST(ConfigParsing, AcceptsShippedConfigs) {
  for (const auto& entry : fs::directory_iterator(POLYXPORT_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
  }
}

TEST(ConfigParsing, RejectsMalformedDocuments) {
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "freepath", "colour": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"experiment": "teleport"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seed": "seven"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"microsim": {"r": [0.01, 0.02]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"microsim": {"r": [0.01], "samples": 999}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"microsim": {"radius": 0.01}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"transition": {"xi_edges": [0, 0.2, 0.1]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"flight": {"time": 1, "split": 2}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"directions": {"law": "cap", "axis": [1, 0]}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scene": {"dim": 2, "grains": [
                                 {"box": {"lo": [0, 0], "hi": [0.3, 0.3]}, "medium": "poisson"},
                                 {"box": {"lo": [0.2, 0], "hi": [0.5, 0.3]}, "medium": "poisson"}]}})"),
               ConfigError);
}

TEST(ConfigParsing, LatticeCheckNeedsExactDataUnlessAssumed) {
  const std::string doc = std::string(R"({"experiment": "freepath", "scene": )") + kTwoSquares + "}";
  EXPECT_THROW(parse_config(doc), ConfigError);
  EXPECT_NO_THROW(parse_config(freepath_config()));
}

TEST(ConfigHash, IgnoresKeyOrderAndThreads) {
  const auto a = parse_config(R"({"experiment": "kernel-tables", "seed": 3, "threads": 1})");
  const auto b = parse_config(R"({"threads": 4, "seed": 3, "experiment": "kernel-tables"})");
  const auto c = parse_config(R"({"experiment": "kernel-tables", "seed": 4})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(c));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Fnv1a, ReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(FormatNumber, RoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform(-60, 60)));
    const std::string s = format_number(x);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    EXPECT_EQ(back, x) << s;
  }
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Csv, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  Table t{"t", {"k", "v"}, {}};
  t.add({"x", "1,5"});
  EXPECT_EQ(t.to_csv(), "k,v\r\nx,\"1,5\"\r\n");
  EXPECT_THROW(t.add({"only"}), std::logic_error);
}

TEST(KernelTables, MatchFrozenGolden) {
  for (const std::string d : {"d2", "d3"}) {
    const fs::path dir = fs::path(POLYXPORT_GOLDEN_DIR);
    const auto report = run_experiment(load_config(dir / ("kernel_tables_" + d + ".json")));
    ASSERT_EQ(report.tables.size(), 1u);
    EXPECT_EQ(report.tables[0].to_csv(), slurp(dir / ("kernel_tables_" + d + ".csv"))) << d;
  }
}

TEST(Determinism, RerunIsByteIdentical) {
  const auto config = parse_config(freepath_config(R"(, "threads": 1)"));
  auto threaded = config;
  threaded.threads = 3;
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  write_report(run_experiment(config), a);
  write_report(run_experiment(threaded), b);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name.find("timings") != std::string::npos) continue;
    EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << name;
    ++compared;
  }
  EXPECT_GE(compared, 2u);
  EXPECT_TRUE(fs::exists(a / "freepath_timings.json"));
  auto reseeded = config;
  reseeded.seed = 6;
  EXPECT_NE(run_experiment(reseeded).tables[0].to_csv(), run_experiment(config).tables[0].to_csv());
}

TEST(NoCollisionFraction, ExactOnPoissonTiling) {
  const Scene scene(2, {ConvexGrain::box(0, Vec{0, 0}, Vec{1, 1})}, {testing::poisson_medium()},
                    PeriodicBox{Vec{0, 0}, Vec{1, 1}});
  const PolyKernel k(scene);
  EXPECT_NEAR(no_collision_fraction(k, 0.7, 8, 16), std::exp(-2 * 0.7), 1e-14);
}

TEST(NoCollisionFraction, MatchesEnsemble) {
  const Scene scene(2, {ConvexGrain::box(0, Vec{0, 0}, Vec{0.3, 0.3}), ConvexGrain::box(1, Vec{0.3, 0}, Vec{0.6, 0.3})},
                    {testing::crystal_medium(2), testing::poisson_medium()}, PeriodicBox{Vec{0, 0}, Vec{0.6, 0.3}});
  const PolyKernel k(scene);
  const FlightProcess fp(k);
  EnsembleRequest req;
  req.particles = 40000;
  req.seed = 2;
  const double t = 0.4;
  const auto h = n_collision_histogram(run_ensemble(fp, req, {t}));
  const double empirical = static_cast<double>(h.counts[0]) / static_cast<double>(h.total);
  const double expected = no_collision_fraction(k, t, 64, 256);
  EXPECT_NEAR(empirical, expected, 4 * std::sqrt(expected * (1 - expected) / req.particles));
}

}  // namespace
}  // namespace polyxport
