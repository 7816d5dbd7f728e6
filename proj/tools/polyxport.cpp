#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "polyxport/harness.hpp"
#include "polyxport/kernels.hpp"
#include "polyxport/polykernel.hpp"

using nlohmann::json;
using namespace polyxport;

namespace {

struct CommonFlags {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required = true) {
  auto* opt = app->add_option("--config", f.config, "JSON experiment document");
  if (config_required) opt->required();
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "master seed (overrides the config)");
  app->add_option("--threads", f.threads, "worker threads (default: POLYXPORT_THREADS, else 1)");
}

json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

unsigned resolve_threads(const CommonFlags& f) {
  if (f.threads) return std::max(1u, *f.threads);
  if (const char* env = std::getenv("POLYXPORT_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return 1;
}

// Loads the config, checks its experiment kind against the subcommand and
// applies command line overrides before validation.
ExperimentConfig prepare(const CommonFlags& f, const std::string& kind, const std::function<void(json&)>& patch = {}) {
  json doc = read_document(f.config);
  if (!doc.is_object()) throw ConfigError(f.config + ": expected a JSON object");
  if (doc.contains("experiment") && doc["experiment"] != kind)
    throw ConfigError(f.config + ": experiment is \"" + doc["experiment"].dump() + "\", subcommand expects \"" + kind +
                      "\"");
  doc["experiment"] = kind;
  if (f.seed) doc["seed"] = *f.seed;
  if (patch) patch(doc);
  ExperimentConfig c = parse_config(doc.dump());
  c.threads = resolve_threads(f);
  return c;
}

int finish(const RunReport& report, const std::string& out) {
  write_report(report, out);
  for (const auto& v : report.verdicts) std::cout << v.name << ": " << (v.pass ? "PASS" : "FAIL") << "\n";
  return 0;
}

Vec to_vec(const std::vector<double>& xs) {
  Vec v(static_cast<int>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<int>(i)] = xs[i];
  return v;
}

void print_row(std::vector<std::string> cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + csv_field(cells[i]);
  std::cout << line << "\n";
}

void append(std::vector<std::string>& row, const std::vector<double>& xs) {
  for (double x : xs) row.push_back(format_number(x));
}

std::vector<std::string> names(const std::string& stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyxport: polycrystal Lorentz gas toolkit"};
  app.require_subcommand(1);

  CommonFlags kernels_flags;
  auto* kernels = app.add_subcommand("kernels", "tabulate single-medium kernels");
  add_common(kernels, kernels_flags, false);
  auto* kernels_eval = kernels->add_subcommand("eval", "print one kernel value as CSV");
  kernels_eval->fallthrough();
  std::string k_medium = "crystal", k_function;
  int k_dim = 2;
  double k_xi = 0.0;
  std::vector<double> k_w, k_z;
  kernels_eval->add_option("--medium", k_medium)->check(CLI::IsMember({"crystal", "poisson"}));
  kernels_eval->add_option("--d", k_dim)->check(CLI::IsMember({2, 3}));
  kernels_eval->add_option("--xi", k_xi)->required();
  kernels_eval->add_option("--w", k_w, "impact parameter (d-1 components)");
  kernels_eval->add_option("--z", k_z, "exit parameter (d-1 components)");
  kernels_eval->add_option("--function", k_function, "transition, exit_survival, exit_path_density, path_density, survival")
      ->check(CLI::IsMember({"transition", "exit_survival", "exit_path_density", "path_density", "survival"}));

  CommonFlags psi_flags;
  auto* psi = app.add_subcommand("psi", "evaluate polycrystal densities for a scene");
  add_common(psi, psi_flags);
  auto* psi_eval = psi->add_subcommand("eval", "print one density value as CSV");
  psi_eval->fallthrough();
  std::vector<double> p_x, p_v, p_w, p_z;
  double p_xi = 0.0;
  std::string p_function;
  psi_eval->add_option("--x", p_x)->required();
  psi_eval->add_option("--v", p_v)->required();
  psi_eval->add_option("--xi", p_xi)->required();
  psi_eval->add_option("--w", p_w);
  psi_eval->add_option("--z", p_z);
  psi_eval->add_option("--function", p_function, "psi, survival, psi_w, psi0, psi0_full, survival_from_exit")
      ->check(CLI::IsMember({"psi", "survival", "psi_w", "psi0", "psi0_full", "survival_from_exit"}));

  CommonFlags micro_flags;
  std::optional<std::size_t> m_samples;
  std::vector<double> m_r;
  auto* microsim = app.add_subcommand("microsim", "sample first free paths of the Lorentz gas");
  add_common(microsim, micro_flags);
  microsim->add_option("--samples", m_samples);
  microsim->add_option("--r", m_r, "radius schedule");

  CommonFlags flight_flags;
  std::optional<std::size_t> f_particles;
  std::optional<double> f_time;
  std::optional<std::string> f_report;
  auto* flight = app.add_subcommand("flight", "simulate the limiting random flight");
  add_common(flight, flight_flags);
  flight->add_option("--particles", f_particles);
  flight->add_option("--time", f_time, "in mean free paths");
  flight->add_option("--report", f_report)->check(CLI::IsMember({"stationarity", "ncollision", "marginals"}));

  std::map<std::string, std::pair<CLI::App*, CommonFlags>> experiments;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"freepath", "free path convergence study"},
           {"transition", "joint free path and impact parameter convergence study"},
           {"poisson", "Poisson medium baseline checks"},
           {"stationarity", "stationarity and semigroup tests of the flight"}}) {
    auto& entry = experiments[name];
    entry.first = app.add_subcommand(name, help);
  }
  for (auto& [name, entry] : experiments) add_common(entry.first, entry.second);

  CLI11_PARSE(app, argc, argv);

  try {
    if (kernels->parsed()) {
      if (kernels_eval->parsed()) {
        const KernelModel m = k_medium == "poisson" ? KernelModel::poisson(k_dim) : KernelModel::crystal(k_dim);
        std::string fn = k_function;
        if (fn.empty()) fn = !k_w.empty() && !k_z.empty() ? "transition" : !k_w.empty() ? "exit_path_density" : "path_density";
        const bool uses_w = fn == "transition" || fn == "exit_survival" || fn == "exit_path_density";
        const bool uses_z = fn == "transition";
        const auto p = static_cast<std::size_t>(k_dim - 1);
        if ((uses_w && k_w.size() != p) || (uses_z && k_z.size() != p))
          throw ConfigError("kernels eval: parameters need d-1 components");
        double value = 0.0;
        if (fn == "transition") value = m.transition_density(k_xi, to_vec(k_w), to_vec(k_z));
        if (fn == "exit_survival") value = m.exit_survival(k_xi, to_vec(k_w));
        if (fn == "exit_path_density") value = m.exit_path_density(k_xi, to_vec(k_w));
        if (fn == "path_density") value = m.path_density(k_xi);
        if (fn == "survival") value = m.survival(k_xi);
        std::vector<std::string> header{"medium", "d", "xi"};
        for (const auto& n : names("w_", p)) header.push_back(n);
        for (const auto& n : names("z_", p)) header.push_back(n);
        header.push_back("value");
        print_row(header);
        std::vector<std::string> row{k_medium, std::to_string(k_dim), format_number(k_xi)};
        for (std::size_t i = 0; i < p; ++i) row.push_back(uses_w ? format_number(k_w[i]) : "");
        for (std::size_t i = 0; i < p; ++i) row.push_back(uses_z ? format_number(k_z[i]) : "");
        row.push_back(format_number(value));
        print_row(row);
        return 0;
      }
      if (kernels_flags.config.empty()) throw ConfigError("kernels: --config is required");
      return finish(run_kernel_tables(prepare(kernels_flags, "kernel-tables")), kernels_flags.out);
    }
    if (psi->parsed()) {
      if (psi_eval->parsed()) {
        json doc = read_document(psi_flags.config);
        if (!doc.contains("scene")) throw ConfigError(psi_flags.config + ": no scene");
        const auto scene = parse_scene(doc["scene"].dump(), true);
        const PolyKernel kernel(*scene);
        const Vec x = to_vec(p_x), v = to_vec(p_v);
        std::string fn = p_function;
        if (fn.empty()) fn = !p_w.empty() && !p_z.empty() ? "psi0_full" : !p_w.empty() ? "psi_w" : "psi";
        const bool uses_w = fn == "psi_w" || fn == "psi0" || fn == "psi0_full";
        const bool uses_z = fn == "psi0_full" || fn == "survival_from_exit";
        const auto d = static_cast<std::size_t>(scene->dim());
        if (p_x.size() != d || p_v.size() != d) throw ConfigError("psi eval: x and v need d components");
        if ((uses_w && p_w.size() != d - 1) || (uses_z && p_z.size() != d - 1))
          throw ConfigError("psi eval: parameters need d-1 components");
        double value = 0.0;
        if (fn == "psi") value = kernel.psi(x, v, p_xi);
        if (fn == "survival") value = kernel.survival(x, v, p_xi);
        if (fn == "psi_w") value = kernel.psi_w(x, v, p_xi, to_vec(p_w));
        if (fn == "psi0") value = kernel.psi0(x, v, p_xi, to_vec(p_w));
        if (fn == "psi0_full") value = kernel.psi0_full(x, v, p_xi, to_vec(p_w), to_vec(p_z));
        if (fn == "survival_from_exit") value = kernel.survival_from_exit(x, v, p_xi, to_vec(p_z));
        std::vector<std::string> header{"function"};
        for (const auto& n : names("x_", d)) header.push_back(n);
        for (const auto& n : names("v_", d)) header.push_back(n);
        header.push_back("xi");
        for (const auto& n : names("w_", d - 1)) header.push_back(n);
        for (const auto& n : names("z_", d - 1)) header.push_back(n);
        header.push_back("value");
        print_row(header);
        std::vector<std::string> row{fn};
        append(row, p_x);
        append(row, p_v);
        row.push_back(format_number(p_xi));
        for (std::size_t i = 0; i + 1 < d; ++i) row.push_back(uses_w ? format_number(p_w[i]) : "");
        for (std::size_t i = 0; i + 1 < d; ++i) row.push_back(uses_z ? format_number(p_z[i]) : "");
        row.push_back(format_number(value));
        print_row(row);
        return 0;
      }
      return finish(run_psi(prepare(psi_flags, "psi")), psi_flags.out);
    }
    if (microsim->parsed()) {
      const auto c = prepare(micro_flags, "microsim", [&](json& doc) {
        if (m_samples) doc["microsim"]["samples"] = *m_samples;
        if (!m_r.empty()) doc["microsim"]["r"] = m_r;
      });
      const RunReport report = run_microsim(c);
      const std::filesystem::path out = micro_flags.out;
      if (out.extension() == ".csv") {
        if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
        std::ofstream file(out, std::ios::binary);
        file << report.tables.front().to_csv();
        if (!file) throw std::runtime_error("cannot write " + out.string());
        return 0;
      }
      return finish(report, micro_flags.out);
    }
    if (flight->parsed()) {
      const auto c = prepare(flight_flags, "flight", [&](json& doc) {
        if (f_particles) doc["flight"]["particles"] = *f_particles;
        if (f_time) doc["flight"]["time"] = *f_time;
        if (f_report) doc["flight"]["report"] = *f_report;
      });
      return finish(run_flight(c), flight_flags.out);
    }
    for (auto& [name, entry] : experiments)
      if (entry.first->parsed()) {
        const std::string kind = name == "poisson" ? "poisson-baseline" : name;
        return finish(run_experiment(prepare(entry.second, kind)), entry.second.out);
      }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
