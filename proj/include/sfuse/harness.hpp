#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sfuse/motion.hpp"
#include "sfuse/scenario.hpp"

namespace sfuse {

struct EstimatorMetrics {
  std::string name;
  double trans_rmse_mm = 0.0;
  double rot_rmse_deg = 0.0;
  double false_alarm_rate = 0.0;  // alarm fraction outside fault windows + clear margin
  bool diverged = false;
};

struct FaultMetrics {
  int sensor_id = 0;
  double start = 0.0;
  double end = 0.0;
  bool detected = false;
  double onset_latency_s = -1.0;  // first Pr(failure) > 0.9 inside the window
  bool cleared = false;
  double clear_latency_s = -1.0;  // first Pr(failure) < 0.1 after the window
};

struct MetricsReport {
  std::vector<EstimatorMetrics> estimators;  // fusion first, then one per single-sensor baseline
  std::vector<FaultMetrics> faults;          // measured on the fusion run
  double runtime_s = 0.0;                    // wall time; never serialized, outputs stay seed-pure
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// Ground truth plus the simulated observation set it produced.
struct ExperimentInputs {
  std::vector<TrajectorySample> truth;
  std::map<int, std::vector<Observation>> observations;  // keyed by sensor id
};

struct EstimatorRun {
  std::string name;
  std::vector<SensorModel> sensors;
  std::vector<PosteriorSummary> summaries;  // summaries[j] estimates truth[j + 1]
  bool diverged = false;
};

struct ExperimentResult {
  std::vector<EstimatorRun> runs;  // fusion first, baselines after
  MetricsReport report;
};

namespace detail {

inline constexpr double kAlarmThreshold = 0.9;  // Pr(failure) above this raises an alarm
inline constexpr double kClearThreshold = 0.1;
inline constexpr double kClearMargin = 2.0;  // seconds after a window before alarms count as false

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

/// Per-sensor observation pointers indexed by trajectory step; null = dropout.
inline std::map<int, std::vector<const Observation*>> slot_observations(
    const std::vector<TrajectorySample>& truth,
    const std::map<int, std::vector<Observation>>& observations) {
  std::map<int, std::vector<const Observation*>> slots;
  for (const auto& [id, obs] : observations) {
    auto& column = slots[id];
    column.assign(truth.size(), nullptr);
    size_t ti = 0;
    for (const Observation& ob : obs) {
      while (ti < truth.size() && truth[ti].t != ob.t) ++ti;
      if (ti == truth.size())
        throw std::invalid_argument("observations for sensor " + std::to_string(id) +
                                    " are not on the trajectory time grid");
      column[ti] = &ob;
      ++ti;
    }
  }
  return slots;
}

inline bool in_window_or_margin(const FaultSchedule& faults, int sensor_id, double t) {
  for (const auto& w : faults.windows)
    if (w.sensor_id == sensor_id && t >= w.start && t < w.end + kClearMargin) return true;
  return false;
}

inline EstimatorMetrics estimator_metrics(const EstimatorRun& run,
                                          const std::vector<TrajectorySample>& truth,
                                          const FaultSchedule& faults) {
  EstimatorMetrics m;
  m.name = run.name;
  m.diverged = run.diverged;
  std::vector<double> te, re;
  for (size_t j = 0; j < run.summaries.size(); ++j) {
    te.push_back(translation_error(run.summaries[j].pose, truth[j + 1].pose));
    re.push_back(rotation_error_deg(run.summaries[j].pose, truth[j + 1].pose));
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.trans_rmse_mm = te.empty() ? nan : 1000.0 * rmse(te);
  m.rot_rmse_deg = re.empty() ? nan : rmse(re);

  long long alarms = 0, eligible = 0;
  for (size_t k = 0; k < run.sensors.size(); ++k)
    for (const auto& s : run.summaries) {
      if (in_window_or_margin(faults, run.sensors[k].id, s.t)) continue;
      ++eligible;
      if (s.fail_prob[k] > kAlarmThreshold) ++alarms;
    }
  m.false_alarm_rate = eligible > 0 ? static_cast<double>(alarms) / static_cast<double>(eligible)
                                    : 0.0;
  return m;
}

inline std::vector<FaultMetrics> fault_metrics(const EstimatorRun& fusion,
                                               const FaultSchedule& faults) {
  std::vector<FaultMetrics> out;
  for (const auto& w : faults.windows) {
    FaultMetrics fm;
    fm.sensor_id = w.sensor_id;
    fm.start = w.start;
    fm.end = w.end;
    size_t k = fusion.sensors.size();
    for (size_t i = 0; i < fusion.sensors.size(); ++i)
      if (fusion.sensors[i].id == w.sensor_id) k = i;
    if (k == fusion.sensors.size()) {
      out.push_back(fm);
      continue;
    }
    for (const auto& s : fusion.summaries) {
      if (!fm.detected && s.t >= w.start && s.t < w.end && s.fail_prob[k] > kAlarmThreshold) {
        fm.detected = true;
        fm.onset_latency_s = s.t - w.start;
      }
      if (!fm.cleared && s.t >= w.end && s.fail_prob[k] < kClearThreshold) {
        fm.cleared = true;
        fm.clear_latency_s = s.t - w.end;
      }
    }
    out.push_back(fm);
  }
  return out;
}

} // namespace detail

/// Deterministic forward simulation of a scenario: ground-truth trajectory
/// plus one observation sequence per sensor.
inline ExperimentInputs simulate_inputs(const Scenario& sc) {
  sc.validate();
  ExperimentInputs in;
  in.truth = generate_trajectory(archetype_from_name(sc.archetype), sc.trajectory, sc.seed);
  for (const auto& spec : sc.sensors) {
    const SensorModel sensor = spec.build();
    in.observations[sensor.id] = simulate(in.truth, sensor, sc.faults, sc.seed);
  }
  return in;
}

inline std::string observation_file(int sensor_id) {
  return "obs_k" + std::to_string(sensor_id) + ".csv";
}

/// Writes truth.csv and one obs_k<id>.csv per sensor into dir.
inline std::vector<std::string> write_inputs(const std::string& dir, const Scenario& sc,
                                             const ExperimentInputs& in) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  write_trajectory_csv(dir + "/truth.csv", in.truth);
  written.push_back("truth.csv");
  for (const auto& spec : sc.sensors) {
    const SensorModel sensor = spec.build();
    write_observation_csv(dir + "/" + observation_file(sensor.id),
                          in.observations.at(sensor.id), sensor.dim);
    written.push_back(observation_file(sensor.id));
  }
  return written;
}

/// Loads what write_inputs wrote. CSV serialization round-trips doubles
/// exactly, so a fuse over loaded inputs matches the in-process run bit for
/// bit.
inline ExperimentInputs read_inputs(const std::string& dir, const Scenario& sc) {
  ExperimentInputs in;
  in.truth = read_trajectory_csv(dir + "/truth.csv");
  for (const auto& spec : sc.sensors)
    in.observations[spec.id] = read_observation_csv(dir + "/" + observation_file(spec.id));
  return in;
}

inline void write_manifest(const std::string& dir, const Scenario& sc,
                           std::vector<std::string> outputs) {
  std::sort(outputs.begin(), outputs.end());
  nlohmann::json j;
  j["manifest_version"] = 1;
  j["scenario_version"] = sc.version;
  j["name"] = sc.name;
  j["config_hash"] = detail::hash_hex(scenario_hash(sc));
  j["seed"] = sc.seed;
  j["outputs"] = outputs;
  detail::dump_json_file(dir + "/manifest.json", j, "run manifest");
}

inline std::vector<std::string> metrics_columns() {
  return {"estimator", "trans_rmse_mm", "rot_rmse_deg", "false_alarm_rate", "diverged"};
}

inline std::vector<std::string> fault_columns() {
  return {"sensor_id", "start_s", "end_s", "detected", "onset_latency_s", "cleared",
          "clear_latency_s"};
}

/// Runs the switching filter over prepared inputs: one fusion pass with the
/// full sensor suite and one single-sensor baseline per sensor, all through
/// the identical code path (the baselines are just one-sensor suites). When
/// out_dir is non-empty, writes <name>_summary.csv per estimator, metrics.csv,
/// faults.csv and manifest.json. A filter divergence flags the run and keeps
/// the summaries produced so far.
inline ExperimentResult fuse_inputs(const Scenario& sc, const ExperimentInputs& in,
                                    const std::string& out_dir = "") {
  sc.validate();
  if (in.truth.size() < 2) throw std::invalid_argument("fuse: trajectory needs two samples");
  const auto t0 = std::chrono::steady_clock::now();
  const auto slots = detail::slot_observations(in.truth, in.observations);
  const std::unique_ptr<MotionModel> motion = make_motion_model(sc.motion_model, sc.motion_params);

  std::vector<SensorModel> suite;
  for (const auto& spec : sc.sensors) suite.push_back(spec.build());

  Vec6 prior_var;
  prior_var << sc.prior_pos_sd * sc.prior_pos_sd, sc.prior_pos_sd * sc.prior_pos_sd,
      sc.prior_pos_sd * sc.prior_pos_sd, sc.prior_rot_sd * sc.prior_rot_sd,
      sc.prior_rot_sd * sc.prior_rot_sd, sc.prior_rot_sd * sc.prior_rot_sd;
  GaussianBelief prior;
  prior.mean_pose = in.truth[0].pose;
  prior.cov = prior_var.asDiagonal();

  auto run_one = [&](const std::string& name, const std::vector<SensorModel>& sensors) {
    FilterConfig cfg = sc.filter;
    cfg.seed = sc.seed;
    SwitchingFilter f(cfg, sensors, motion.get());
    f.init(prior);
    EstimatorRun r;
    r.name = name;
    r.sensors = sensors;
    for (size_t i = 1; i < in.truth.size(); ++i) {
      std::vector<const Observation*> obs(sensors.size(), nullptr);
      for (size_t k = 0; k < sensors.size(); ++k) {
        auto it = slots.find(sensors[k].id);
        if (it != slots.end()) obs[k] = it->second[i];
      }
      try {
        r.summaries.push_back(f.step(obs, in.truth[i].t));
      } catch (const FilterDivergence&) {
        r.diverged = true;
        break;
      }
    }
    return r;
  };

  ExperimentResult out;
  out.runs.push_back(run_one("fusion", suite));
  std::map<std::string, int> name_count;
  for (const auto& s : suite) ++name_count[s.name];
  for (const auto& s : suite) {
    const std::string base =
        name_count[s.name] > 1 ? s.name + std::to_string(s.id) : s.name;
    out.runs.push_back(run_one(base + "_only", {s}));
  }

  for (const auto& r : out.runs)
    out.report.estimators.push_back(detail::estimator_metrics(r, in.truth, sc.faults));
  out.report.faults = detail::fault_metrics(out.runs.front(), sc.faults);
  out.report.config_hash = scenario_hash(sc);
  out.report.seed = sc.seed;
  out.report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& r : out.runs) {
      const std::string file = r.name + "_summary.csv";
      CsvWriter w(out_dir + "/" + file, summary_columns(r.sensors));
      for (const auto& s : r.summaries) append_summary_row(w, r.sensors, s);
      written.push_back(file);
    }
    {
      CsvWriter w(out_dir + "/metrics.csv", metrics_columns());
      for (const auto& m : out.report.estimators)
        w.raw_row({m.name, format_double(m.trans_rmse_mm), format_double(m.rot_rmse_deg),
                   format_double(m.false_alarm_rate), m.diverged ? "1" : "0"});
      written.push_back("metrics.csv");
    }
    {
      CsvWriter w(out_dir + "/faults.csv", fault_columns());
      for (const auto& fm : out.report.faults)
        w.row({static_cast<double>(fm.sensor_id), fm.start, fm.end, fm.detected ? 1.0 : 0.0,
               fm.onset_latency_s, fm.cleared ? 1.0 : 0.0, fm.clear_latency_s});
      written.push_back("faults.csv");
    }
    write_manifest(out_dir, sc, written);
  }
  return out;
}

/// Declarative LSTM training setup: trajectories generated from a contiguous
/// seed range [seed_lo, seed_hi), so train and evaluation data are split by
/// seed ranges rather than by slicing one trajectory.
struct TrainSpec {
  int version = 1;
  std::string archetype = "slow-incremental";
  TrajectoryParams trajectory;
  std::uint64_t seed_lo = 0;
  std::uint64_t seed_hi = 8;
  TrainingConfig training;

  void validate() const {
    archetype_from_name(archetype);
    trajectory.validate();
    if (seed_hi <= seed_lo) throw std::invalid_argument("train spec: seed range is empty");
    training.validate();
  }
};

inline nlohmann::json train_spec_to_json(const TrainSpec& s) {
  nlohmann::json j;
  j["version"] = s.version;
  j["archetype"] = s.archetype;
  j["trajectory"] = {{"duration", s.trajectory.duration},
                     {"rate", s.trajectory.rate},
                     {"speed", s.trajectory.speed},
                     {"workspace", s.trajectory.workspace},
                     {"rot_range_deg", s.trajectory.rot_range_deg},
                     {"loops", s.trajectory.loops}};
  j["seeds"] = {s.seed_lo, s.seed_hi};
  j["training"] = {{"sequence_length", s.training.sequence_length},
                   {"learning_rate", s.training.learning_rate},
                   {"max_epochs", s.training.max_epochs},
                   {"dropout_keep_prob", s.training.dropout_keep_prob},
                   {"early_stopping_patience", s.training.early_stopping_patience},
                   {"hidden_size", s.training.hidden_size},
                   {"seed", s.training.seed},
                   {"grad_clip", s.training.grad_clip}};
  return j;
}

inline TrainSpec train_spec_from_json(const nlohmann::json& j) {
  detail::require_keys(j, {"version", "archetype", "trajectory", "seeds", "training"},
                       "train spec");
  for (const char* key : {"version", "archetype", "seeds"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("train spec: missing required key '") + key + "'");
  TrainSpec s;
  s.version = j.at("version").get<int>();
  if (s.version != 1) throw std::invalid_argument("train spec: unsupported version");
  s.archetype = j.at("archetype").get<std::string>();
  if (j.contains("trajectory")) {
    const auto& tj = j.at("trajectory");
    detail::require_keys(tj, {"duration", "rate", "speed", "workspace", "rot_range_deg", "loops"},
                         "train spec trajectory");
    if (tj.contains("duration")) s.trajectory.duration = tj.at("duration").get<double>();
    if (tj.contains("rate")) s.trajectory.rate = tj.at("rate").get<double>();
    if (tj.contains("speed")) s.trajectory.speed = tj.at("speed").get<double>();
    if (tj.contains("workspace")) s.trajectory.workspace = tj.at("workspace").get<double>();
    if (tj.contains("rot_range_deg"))
      s.trajectory.rot_range_deg = tj.at("rot_range_deg").get<double>();
    if (tj.contains("loops")) s.trajectory.loops = tj.at("loops").get<int>();
  }
  if (j.at("seeds").size() != 2)
    throw std::invalid_argument("train spec: seeds needs [lo, hi)");
  s.seed_lo = j.at("seeds")[0].get<std::uint64_t>();
  s.seed_hi = j.at("seeds")[1].get<std::uint64_t>();
  if (j.contains("training")) {
    const auto& cj = j.at("training");
    detail::require_keys(cj,
                         {"sequence_length", "learning_rate", "max_epochs", "dropout_keep_prob",
                          "early_stopping_patience", "hidden_size", "seed", "grad_clip"},
                         "train spec training");
    if (cj.contains("sequence_length"))
      s.training.sequence_length = cj.at("sequence_length").get<int>();
    if (cj.contains("learning_rate")) s.training.learning_rate = cj.at("learning_rate").get<double>();
    if (cj.contains("max_epochs")) s.training.max_epochs = cj.at("max_epochs").get<int>();
    if (cj.contains("dropout_keep_prob"))
      s.training.dropout_keep_prob = cj.at("dropout_keep_prob").get<double>();
    if (cj.contains("early_stopping_patience"))
      s.training.early_stopping_patience = cj.at("early_stopping_patience").get<int>();
    if (cj.contains("hidden_size")) s.training.hidden_size = cj.at("hidden_size").get<int>();
    if (cj.contains("seed")) s.training.seed = cj.at("seed").get<std::uint64_t>();
    if (cj.contains("grad_clip")) s.training.grad_clip = cj.at("grad_clip").get<double>();
  }
  return s;
}

inline TrainSpec read_train_spec(const std::string& path) {
  TrainSpec s = train_spec_from_json(detail::load_json_file(path, "train spec"));
  s.validate();
  return s;
}

inline void write_train_spec(const std::string& path, const TrainSpec& s) {
  detail::dump_json_file(path, train_spec_to_json(s), "train spec");
}

/// Generates one trajectory per seed in the range and trains on all of them.
inline TrainResult run_training(const TrainSpec& spec) {
  spec.validate();
  const TrajectoryArchetype a = archetype_from_name(spec.archetype);
  std::vector<std::vector<Pose6D>> trajectories;
  for (std::uint64_t seed = spec.seed_lo; seed < spec.seed_hi; ++seed) {
    std::vector<Pose6D> poses;
    for (const auto& s : generate_trajectory(a, spec.trajectory, seed)) poses.push_back(s.pose);
    trajectories.push_back(std::move(poses));
  }
  return lstm_train(trajectories, spec.training);
}

/// Simulates a scenario then fuses it, writing inputs and outputs (plus the
/// manifest covering both) into out_dir when given.
inline ExperimentResult run_experiment(const Scenario& sc, const std::string& out_dir = "") {
  const ExperimentInputs in = simulate_inputs(sc);
  if (out_dir.empty()) return fuse_inputs(sc, in);
  const std::vector<std::string> input_files = write_inputs(out_dir, sc, in);
  ExperimentResult out = fuse_inputs(sc, in, out_dir);
  std::vector<std::string> all = input_files;
  for (const auto& r : out.runs) all.push_back(r.name + "_summary.csv");
  all.push_back("metrics.csv");
  all.push_back("faults.csv");
  write_manifest(out_dir, sc, all);
  return out;
}

} // namespace sfuse
