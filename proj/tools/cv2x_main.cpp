// Command-line front end for the C-V2X sidelink simulation pipeline:
// simulate -> regress -> optimize -> report. All stages communicate via
// files and are deterministic for fixed (config, seed).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cv2x/batch.hpp"
#include "cv2x/config.hpp"
#include "cv2x/gbmu.hpp"
#include "cv2x/io.hpp"
#include "cv2x/link_sample.hpp"
#include "cv2x/regression.hpp"
#include "cv2x/sim_engine.hpp"
#include "cv2x/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  bool verbose = false;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

cv2x::ScenarioConfig load_scenario(const GlobalOpts& g) {
  cv2x::ScenarioConfig config;
  if (!g.config_path.empty()) {
    if (!fs::exists(g.config_path))
      throw std::runtime_error("config file not found: " + g.config_path);
    config = cv2x::ScenarioConfig::load(g.config_path);
  }
  if (g.seed_set) config.seed = g.seed;
  return config;
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

void write_manifest(const GlobalOpts& g, const std::string& command,
                    const json& config_snapshot,
                    const std::vector<std::uint64_t>& seeds,
                    const std::map<std::string, std::string>& outputs,
                    const std::map<std::string, long>& timings_ms) {
  json m;
  m["command"] = command;
  m["version"] = cv2x::kVersion;
  m["config"] = config_snapshot;
  m["seeds"] = seeds;
  json out = json::object();
  for (const auto& [name, path] : outputs) out[name] = path;
  m["outputs"] = out;
  json t = json::object();
  for (const auto& [stage, ms] : timings_ms) t[stage] = ms;
  m["timings_ms"] = t;
  cv2x::write_file(out_path(g, "manifest_" + command + ".json"), m.dump(2) + "\n");
}

int cmd_simulate(const GlobalOpts& g, std::optional<long> subframes) {
  Stopwatch total;
  cv2x::ScenarioConfig config = load_scenario(g);
  if (subframes) config.sim.total_subframes = *subframes;
  config.validate();

  Stopwatch sim_watch;
  const cv2x::RealizationResult result = cv2x::run_realization(config, config.seed);
  const long sim_ms = sim_watch.ms();

  std::map<std::string, std::string> outputs;
  outputs["samples"] = out_path(g, "samples.csv");
  outputs["prr"] = out_path(g, "prr.json");
  cv2x::save_samples(outputs["samples"], result.samples);
  cv2x::write_file(outputs["prr"], result.prr.to_json().dump(2) + "\n");

  if (result.snapshot.valid) {
    const cv2x::OptimizerSnapshot snap = cv2x::build_receiver_views(
        result.snapshot, config.gbmu.interferer_threshold_m,
        config.geometry.grid().diagonal());
    outputs["snapshot"] = out_path(g, "snapshot.json");
    cv2x::write_file(outputs["snapshot"], snap.to_json().dump(2) + "\n");
  } else if (g.verbose) {
    std::cerr << "note: designated transmitter never transmitted; no snapshot\n";
  }

  write_manifest(g, "simulate", config.to_json(), {config.seed}, outputs,
                 {{"simulate", sim_ms}, {"total", total.ms()}});
  if (g.verbose)
    std::cout << "simulate: " << result.samples.size() << " samples, aggregate PRR "
              << result.prr.aggregate << "\n";
  return 0;
}

int cmd_regress(const GlobalOpts& g, const std::vector<std::string>& logs,
                int nsv_max) {
  Stopwatch total;
  if (logs.empty()) throw std::runtime_error("regress: need at least one --log file");
  std::vector<cv2x::LinkSample> samples;
  for (const std::string& path : logs) {
    if (!fs::exists(path)) throw std::runtime_error("log file not found: " + path);
    const auto part = cv2x::load_samples(path);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  if (samples.empty())
    throw std::runtime_error("regress: sample logs are empty, nothing to fit");

  const cv2x::CoefficientTable table = cv2x::fit(samples, nsv_max);

  std::map<std::string, std::string> outputs;
  outputs["coefficients"] = out_path(g, "coefficients.csv");
  cv2x::save_table(outputs["coefficients"], table);

  json rows = json::array();
  for (const cv2x::CoefficientRow& r : table.rows()) {
    json row = {{"nsv", r.nsv},
                {"instances", r.n_instances},
                {"r_square", r.r_square},
                {"fitted", r.fitted()}};
    if (!r.fitted()) row["diagnostic"] = r.diagnostic;
    rows.push_back(row);
  }
  outputs["fit_report"] = out_path(g, "fit_report.json");
  cv2x::write_file(outputs["fit_report"],
                   json{{"rows", rows}, {"n_samples", samples.size()}}.dump(2) + "\n");

  write_manifest(g, "regress", json::object(), {}, outputs,
                 {{"total", total.ms()}});
  if (g.verbose) {
    for (const cv2x::CoefficientRow& r : table.rows())
      std::cout << "nsv " << r.nsv << ": n=" << r.n_instances
                << " r2=" << r.r_square << "\n";
  }
  return 0;
}

int cmd_optimize(const GlobalOpts& g, const std::string& snapshot_path,
                 const std::string& coefficients_path, int batch,
                 const cv2x::GbmuConfig& flags) {
  Stopwatch total;
  if (!fs::exists(coefficients_path))
    throw std::runtime_error("coefficients file not found: " + coefficients_path);
  const cv2x::CoefficientTable table = cv2x::load_table(coefficients_path);

  std::map<std::string, std::string> outputs;
  std::vector<std::uint64_t> seeds;
  json config_snapshot = json::object();

  if (batch > 0) {
    cv2x::ScenarioConfig config = load_scenario(g);
    config.gbmu = flags;
    config.validate();
    config_snapshot = config.to_json();
    seeds = cv2x::batch_seeds(config.seed, batch);
    const cv2x::BatchReport report = cv2x::run_batch(config, table, seeds);
    outputs["batch_report"] = out_path(g, "batch_report.json");
    cv2x::write_file(outputs["batch_report"], report.to_json().dump(2) + "\n");
    if (g.verbose)
      std::cout << "batch: effectiveness " << report.effectiveness_rate
                << ", mean utility gain " << report.mean_utility_gain
                << ", mean PRR gain " << report.mean_prr_gain << "\n";
  } else {
    if (!fs::exists(snapshot_path))
      throw std::runtime_error("snapshot file not found: " + snapshot_path);
    const cv2x::OptimizerSnapshot snap =
        cv2x::OptimizerSnapshot::from_json(json::parse(cv2x::read_file(snapshot_path)));
    if (snap.receivers.empty())
      throw std::runtime_error("optimize: snapshot has no receivers");
    const cv2x::GbmuResult result =
        cv2x::run_gbmu(snap.tx_pos, snap.receivers, table, flags);

    outputs["trace"] = out_path(g, "trace.csv");
    cv2x::write_file(outputs["trace"], cv2x::trace_to_csv(result.trace));
    const double gain = result.trace.front().utility == 0.0
                            ? 0.0
                            : cv2x::utility_gain(result.trace);
    json summary = {{"converged", result.converged},
                    {"iterations", result.iterations},
                    {"utility_initial", result.trace.front().utility},
                    {"utility_final", result.trace.back().utility},
                    {"utility_gain", gain},
                    {"final_pos", {{"x", result.final_pos.x}, {"y", result.final_pos.y}}},
                    {"initial_pos", {{"x", snap.tx_pos.x}, {"y", snap.tx_pos.y}}}};
    outputs["summary"] = out_path(g, "summary.json");
    cv2x::write_file(outputs["summary"], summary.dump(2) + "\n");
    if (g.verbose)
      std::cout << "optimize: converged=" << result.converged << " gain=" << gain
                << "\n";
  }

  write_manifest(g, "optimize", config_snapshot, seeds, outputs,
                 {{"total", total.ms()}});
  return 0;
}

int cmd_report(const GlobalOpts& g, const std::string& coefficients_path,
               const std::string& trace_path, const std::string& batch_path,
               int grid_points) {
  Stopwatch total;
  std::map<std::string, std::string> outputs;

  if (!coefficients_path.empty()) {
    if (!fs::exists(coefficients_path))
      throw std::runtime_error("coefficients file not found: " + coefficients_path);
    const cv2x::CoefficientTable table = cv2x::load_table(coefficients_path);
    // success-probability surface over (d, l) per NSV row
    std::ostringstream out;
    out << "nsv,d_m,l_m,p\n";
    const double lo = 1.0, hi = 400.0;
    for (const cv2x::CoefficientRow& row : table.rows()) {
      if (!row.fitted()) continue;
      for (int i = 0; i < grid_points; ++i) {
        const double d = lo + (hi - lo) * i / (grid_points - 1);
        for (int j = 0; j < grid_points; ++j) {
          const double l = lo + (hi - lo) * j / (grid_points - 1);
          out << row.nsv << ',' << cv2x::format_double(d) << ','
              << cv2x::format_double(l) << ','
              << cv2x::format_double(cv2x::predict_p(table, row.nsv, d, l)) << '\n';
        }
      }
    }
    outputs["surface"] = out_path(g, "surface.csv");
    cv2x::write_file(outputs["surface"], out.str());
  }

  if (!trace_path.empty()) {
    if (!fs::exists(trace_path))
      throw std::runtime_error("trace file not found: " + trace_path);
    const auto lines = cv2x::read_lines(trace_path);
    if (lines.empty() || lines[0] != cv2x::kTraceCsvHeader)
      throw std::runtime_error("report: bad trace header in " + trace_path);
    std::ostringstream out;
    out << "iteration,utility,gain\n";
    double u0 = 0.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto cells = cv2x::split_csv_line(lines[i]);
      const double u = cv2x::parse_double(cells.at(1), "utility");
      if (i == 1) u0 = u;
      const double gain = u0 == 0.0 ? 0.0 : (u - u0) / std::abs(u0);
      out << cells.at(0) << ',' << cells.at(1) << ',' << cv2x::format_double(gain)
          << '\n';
    }
    outputs["convergence"] = out_path(g, "convergence.csv");
    cv2x::write_file(outputs["convergence"], out.str());
  }

  if (!batch_path.empty()) {
    if (!fs::exists(batch_path))
      throw std::runtime_error("batch report not found: " + batch_path);
    const json report = json::parse(cv2x::read_file(batch_path));
    auto histogram = [&](const char* field, auto value_of) {
      struct Bin {
        double lo, hi;
        long count;
      };
      const double width = 0.05;
      std::map<long, long> bins;
      for (const auto& row : report.at("realizations"))
        bins[long(std::floor(value_of(row) / width))]++;
      std::ostringstream out;
      out << "bin_lo,bin_hi,count\n";
      for (const auto& [k, count] : bins)
        out << cv2x::format_double(double(k) * width) << ','
            << cv2x::format_double(double(k + 1) * width) << ',' << count << '\n';
      (void)field;
      return out.str();
    };
    outputs["gain_histogram"] = out_path(g, "gain_histogram.csv");
    cv2x::write_file(outputs["gain_histogram"],
                     histogram("utility_gain", [](const json& row) {
                       return row.at("utility_gain").get<double>();
                     }));
    outputs["prr_histogram"] = out_path(g, "prr_histogram.csv");
    cv2x::write_file(outputs["prr_histogram"],
                     histogram("prr", [](const json& row) {
                       return row.at("prr_after").get<double>() -
                              row.at("prr_before").get<double>();
                     }));
  }

  write_manifest(g, "report", json::object(), {}, outputs, {{"total", total.ms()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"C-V2X sidelink mode-4 broadcast simulator and mobility optimizer"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Scenario config JSON")->envname("CV2X_CONFIG");
  app.add_option("--seed", g.seed, "Override the scenario seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--out-dir", g.out_dir, "Output directory (created if missing)");
  app.add_flag("--verbose", g.verbose, "Chatty progress output");

  auto* sim = app.add_subcommand("simulate", "Run one network-level realization");
  sim->fallthrough();
  std::optional<long> subframes;
  sim->add_option("--subframes", subframes, "Override sim.total_subframes");

  auto* reg = app.add_subcommand("regress", "Fit the two-distance model from sample logs");
  reg->fallthrough();
  std::vector<std::string> logs;
  int nsv_max = 6;
  reg->add_option("--log", logs, "Sample log CSV (repeatable)")->required();
  reg->add_option("--nsv-max", nsv_max, "Highest NSV bucket to fit");

  auto* opt = app.add_subcommand("optimize", "Run the mobility optimizer");
  opt->fallthrough();
  std::string snapshot_path = "snapshot.json";
  std::string coefficients_path;
  int batch = 0;
  cv2x::GbmuConfig gbmu_flags;
  opt->add_option("--snapshot", snapshot_path, "Optimizer snapshot JSON");
  opt->add_option("--coefficients", coefficients_path, "Coefficient table CSV")->required();
  opt->add_option("--batch", batch, "Run N seeded realizations instead of one snapshot");
  opt->add_option("--step-size", gbmu_flags.step_size, "Update step size (m)");
  opt->add_option("--pos-threshold", gbmu_flags.pos_threshold, "Stop displacement (m)");
  opt->add_option("--max-iterations", gbmu_flags.max_iterations, "Iteration cap");
  opt->add_option("--interferer-threshold", gbmu_flags.interferer_threshold_m,
                  "NSV awareness range (m)");
  opt->add_flag("--road-snap", gbmu_flags.road_snap, "Keep the iterate on roads");

  auto* rep = app.add_subcommand("report", "Emit plot-ready CSV data");
  rep->fallthrough();
  std::string rep_coefficients, rep_trace, rep_batch;
  int grid_points = 50;
  rep->add_option("--coefficients", rep_coefficients, "Coefficient table CSV");
  rep->add_option("--trace", rep_trace, "Utility trace CSV");
  rep->add_option("--batch-report", rep_batch, "Batch report JSON");
  rep->add_option("--grid-points", grid_points, "Surface grid resolution per axis");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(g, subframes);
    if (reg->parsed()) return cmd_regress(g, logs, nsv_max);
    if (opt->parsed())
      return cmd_optimize(g, snapshot_path, coefficients_path, batch, gbmu_flags);
    if (rep->parsed())
      return cmd_report(g, rep_coefficients, rep_trace, rep_batch, grid_points);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
