#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfuse/harness.hpp"
#include "sfuse/vo_align.hpp"
#include "sfuse/vo_scene.hpp"

using namespace sfuse;

namespace {

Scenario load_scenario(const std::string& path, bool have_seed, std::uint64_t seed,
                       int threads) {
  Scenario sc = read_scenario(path);
  if (have_seed) {
    sc.seed = seed;
    sc.filter.seed = seed;
  }
  if (threads > 0) sc.filter.threads = threads;
  return sc;
}

void print_metrics(const MetricsReport& report) {
  std::printf("%-18s %14s %13s %13s %9s\n", "estimator", "trans_rmse_mm", "rot_rmse_deg",
              "false_alarms", "diverged");
  for (const auto& m : report.estimators)
    std::printf("%-18s %14.4f %13.5f %13.5f %9s\n", m.name.c_str(), m.trans_rmse_mm,
                m.rot_rmse_deg, m.false_alarm_rate, m.diverged ? "yes" : "no");
  for (const auto& f : report.faults) {
    std::printf("fault sensor %d [%.2f, %.2f): ", f.sensor_id, f.start, f.end);
    if (f.detected)
      std::printf("detected after %.3f s, ", f.onset_latency_s);
    else
      std::printf("not detected, ");
    if (f.cleared)
      std::printf("cleared after %.3f s\n", f.clear_latency_s);
    else
      std::printf("not cleared\n");
  }
  std::printf("runtime: %.3f s\n", report.runtime_s);
}

int cmd_simulate(const std::string& config, const std::string& out, bool have_seed,
                 std::uint64_t seed) {
  const Scenario sc = load_scenario(config, have_seed, seed, 0);
  const ExperimentInputs in = simulate_inputs(sc);
  const std::vector<std::string> files = write_inputs(out, sc, in);
  write_manifest(out, sc, files);
  std::printf("simulated '%s' (seed %llu): %zu samples, %zu sensors -> %s\n", sc.name.c_str(),
              static_cast<unsigned long long>(sc.seed), in.truth.size(), in.observations.size(),
              out.c_str());
  return 0;
}

int cmd_fuse(const std::string& config, const std::string& inputs, const std::string& out,
             bool have_seed, std::uint64_t seed, int threads) {
  const Scenario sc = load_scenario(config, have_seed, seed, threads);
  const ExperimentInputs in =
      inputs.empty() ? simulate_inputs(sc) : read_inputs(inputs, sc);
  const ExperimentResult r = fuse_inputs(sc, in, out);
  print_metrics(r.report);
  if (!out.empty()) std::printf("outputs -> %s\n", out.c_str());
  return 0;
}

int cmd_train(const std::string& config, const std::string& out, bool have_seed,
              std::uint64_t seed) {
  TrainSpec spec = read_train_spec(config);
  if (have_seed) spec.training.seed = seed;
  const TrainResult r = run_training(spec);
  save_lstm_parameters(out, r.params);
  std::printf("trained %d epochs: validation loss %.6f -> %.6f, parameters -> %s\n",
              r.epochs_run, r.initial_val_loss, r.best_val_loss, out.c_str());
  return 0;
}

int cmd_align(const std::string& scene_path, const std::string& out, double sparse_weight,
              double photo_weight, double geo_weight, double dense_start, double dense_end,
              int ramp_iterations, int max_iterations) {
  const SceneDescriptor desc = read_scene_descriptor(scene_path);
  const SyntheticScene scene = build_scene(desc);

  AlignmentConfig cfg;
  cfg.weights.sparse = sparse_weight;
  cfg.weights.photo = photo_weight;
  cfg.weights.geo = geo_weight;
  cfg.weights.dense_start = dense_start;
  cfg.weights.dense_end = dense_end;
  cfg.weights.dense_ramp_iterations = ramp_iterations;
  cfg.max_iterations = max_iterations;

  const AlignmentParams initial = AlignmentParams::identity(scene.frames.size());
  const AlignmentResult r =
      gauss_newton_align(scene.frames, scene.correspondences, initial, cfg);

  std::filesystem::create_directories(out);
  write_alignment_report_csv(out + "/alignment_report.csv", r.trace);
  std::vector<TrajectorySample> estimated;
  for (size_t i = 0; i < r.params.tau.size(); ++i)
    estimated.push_back({static_cast<double>(i), to_pose(r.params.tau[i])});
  write_trajectory_csv(out + "/estimated_poses.csv", estimated);

  const auto& last = r.trace.back();
  std::printf("%s after %d iterations, total energy %.3e -> %s\n",
              r.converged ? "converged" : "stopped", last.iteration + 1, last.total, out.c_str());
  return r.converged ? 0 : 2;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out) {
  CsvWriter w(out, {"run", "name", "seed", "config_hash", "fusion_trans_rmse_mm",
                    "fusion_rot_rmse_deg", "fusion_false_alarm_rate", "best_baseline_trans_rmse_mm",
                    "diverged_runs"});
  for (const auto& dir : run_dirs) {
    const nlohmann::json manifest = detail::load_json_file(dir + "/manifest.json", "run manifest");
    const CsvTable metrics = read_csv(dir + "/metrics.csv");
    const int c_trans = metrics.column_index("trans_rmse_mm");
    const int c_rot = metrics.column_index("rot_rmse_deg");
    const int c_false = metrics.column_index("false_alarm_rate");
    const int c_div = metrics.column_index("diverged");
    double fusion_trans = 0.0, fusion_rot = 0.0, fusion_false = 0.0;
    double best_baseline = std::numeric_limits<double>::infinity();
    int diverged = 0;
    for (size_t r = 0; r < metrics.rows.size(); ++r) {
      const bool is_fusion = metrics.rows[r][0] == "fusion";
      if (is_fusion) {
        fusion_trans = metrics.number(r, c_trans);
        fusion_rot = metrics.number(r, c_rot);
        fusion_false = metrics.number(r, c_false);
      } else {
        best_baseline = std::min(best_baseline, metrics.number(r, c_trans));
      }
      if (metrics.number(r, c_div) != 0.0) ++diverged;
    }
    w.raw_row({dir, manifest.at("name").get<std::string>(),
               std::to_string(manifest.at("seed").get<std::uint64_t>()),
               manifest.at("config_hash").get<std::string>(), format_double(fusion_trans),
               format_double(fusion_rot), format_double(fusion_false),
               format_double(best_baseline), std::to_string(diverged)});
  }
  std::printf("report over %zu runs -> %s\n", run_dirs.size(), out.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"capsule-robot sensor fusion harness"};
  app.require_subcommand(1);

  std::string config, inputs, out, scene_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> run_dirs;

  auto* sim = app.add_subcommand("simulate", "generate ground truth and sensor observations");
  sim->add_option("--config", config, "scenario file")->required();
  sim->add_option("--out", out, "output directory")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "override the scenario seed");

  auto* fuse = app.add_subcommand("fuse", "run the switching filter over a scenario");
  fuse->add_option("--config", config, "scenario file")->required();
  fuse->add_option("--inputs", inputs, "directory with truth.csv and obs_k<id>.csv");
  fuse->add_option("--out", out, "output directory");
  auto* fuse_seed = fuse->add_option("--seed", seed, "override the scenario seed");
  fuse->add_option("--threads", threads, "override the filter thread count");

  auto* train = app.add_subcommand("train", "train the learned motion model");
  train->add_option("--config", config, "train spec file")->required();
  train->add_option("--out", out, "parameter file to write")->required();
  auto* train_seed = train->add_option("--seed", seed, "override the training seed");

  double sparse_weight = 1.0, photo_weight = 1.0, geo_weight = 1.0;
  double dense_start = 0.0, dense_end = 1.0;
  int ramp_iterations = 10, max_iterations = 60;
  auto* align = app.add_subcommand("align", "align rendered frames by energy minimization");
  align->add_option("--scene", scene_path, "scene descriptor file")->required();
  align->add_option("--out", out, "output directory")->required();
  align->add_option("--sparse-weight", sparse_weight, "landmark term weight");
  align->add_option("--photo-weight", photo_weight, "photometric term weight");
  align->add_option("--geo-weight", geo_weight, "geometric term weight");
  align->add_option("--dense-start", dense_start, "dense weight at iteration 0");
  align->add_option("--dense-end", dense_end, "dense weight after the ramp");
  align->add_option("--ramp-iterations", ramp_iterations, "iterations to ramp the dense weight");
  align->add_option("--max-iterations", max_iterations, "iteration cap");

  auto* report = app.add_subcommand("report", "summarize experiment runs, one row per run");
  report->add_option("--out", out, "report csv to write")->required();
  report->add_option("runs", run_dirs, "run directories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config, out, !sim_seed->empty(), seed);
    if (fuse->parsed())
      return cmd_fuse(config, inputs, out, !fuse_seed->empty(), seed, threads);
    if (train->parsed()) return cmd_train(config, out, !train_seed->empty(), seed);
    if (align->parsed())
      return cmd_align(scene_path, out, sparse_weight, photo_weight, geo_weight, dense_start,
                       dense_end, ramp_iterations, max_iterations);
    if (report->parsed()) return cmd_report(run_dirs, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
