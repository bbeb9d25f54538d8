#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfuse/filter.hpp"
#include "sfuse/jsonio.hpp"
#include "sfuse/sensors.hpp"
#include "sfuse/trajectory.hpp"

namespace sfuse {

/// Declarative description of one sensor in a scenario file. noise_a/noise_b
/// map onto the two noise scales of the sensor factory for the given kind:
/// magnetic -> (position_sd, axis_sd), vo -> (trans_sd, rot_sd_deg).
struct SensorSpec {
  std::string kind = "magnetic";
  int id = 0;
  double noise_a = 0.01;
  double noise_b = 0.02;
  double box_lo = -0.1;
  double box_hi = 0.1;

  void validate() const {
    if (kind != "magnetic" && kind != "vo")
      throw std::invalid_argument("sensor kind must be 'magnetic' or 'vo', got '" + kind + "'");
    if (id < 0) throw std::invalid_argument("sensor id must be >= 0");
    if (!(noise_a > 0.0) || !(noise_b > 0.0))
      throw std::invalid_argument("sensor noise scales must be > 0");
    if (!(box_lo < box_hi)) throw std::invalid_argument("sensor box must have lo < hi");
  }

  SensorModel build() const {
    validate();
    const Vec3 lo = Vec3::Constant(box_lo);
    const Vec3 hi = Vec3::Constant(box_hi);
    if (kind == "magnetic") return make_magnetic_sensor(id, noise_a, noise_b, lo, hi);
    return make_vo_sensor(id, noise_a, noise_b, lo, hi);
  }
};

/// A complete, reproducible experiment description. Everything an experiment
/// depends on lives here (or in the referenced motion-parameter file), so a
/// scenario plus a seed pins the outputs bit for bit.
struct Scenario {
  int version = 1;
  std::string name = "scenario";
  std::string archetype = "slow-incremental";
  TrajectoryParams trajectory;
  std::vector<SensorSpec> sensors;
  FaultSchedule faults;
  FilterConfig filter;
  std::string motion_model = "cv";  // "cv" | "lstm"
  std::string motion_params;        // parameter file, required for lstm
  double prior_pos_sd = 0.005;      // initial belief sd, metres per axis
  double prior_rot_sd = 0.02;       // initial belief sd, radians per axis
  std::uint64_t seed = 0;

  void validate() const {
    archetype_from_name(archetype);
    trajectory.validate();
    if (trajectory.duration * trajectory.rate + 1.0 < static_cast<double>(filter.history_length))
      throw std::invalid_argument("scenario: duration * rate must cover the filter history window");
    if (sensors.empty()) throw std::invalid_argument("scenario: at least one sensor required");
    std::set<int> ids;
    for (const auto& s : sensors) {
      s.validate();
      if (!ids.insert(s.id).second)
        throw std::invalid_argument("scenario: duplicate sensor id " + std::to_string(s.id));
    }
    faults.validate();
    for (const auto& w : faults.windows) {
      if (!ids.count(w.sensor_id))
        throw std::invalid_argument("scenario: fault window references unknown sensor id " +
                                    std::to_string(w.sensor_id));
      if (w.start < 0.0 || w.end > trajectory.duration)
        throw std::invalid_argument("scenario: fault window outside the trajectory duration");
    }
    filter.validate();
    if (motion_model != "cv" && motion_model != "lstm")
      throw std::invalid_argument("scenario: motion model must be 'cv' or 'lstm'");
    if (motion_model == "lstm") {
      if (motion_params.empty())
        throw std::invalid_argument("scenario: lstm motion model requires a parameter file");
      if (!std::filesystem::exists(motion_params))
        throw std::invalid_argument("scenario: motion parameter file not found: " + motion_params);
    }
    if (!(prior_pos_sd > 0.0) || !(prior_rot_sd > 0.0))
      throw std::invalid_argument("scenario: prior sds must be > 0");
  }
};

namespace detail {

inline nlohmann::json sensor_spec_to_json(const SensorSpec& s) {
  nlohmann::json j;
  j["kind"] = s.kind;
  j["id"] = s.id;
  if (s.kind == "magnetic") {
    j["position_sd"] = s.noise_a;
    j["axis_sd"] = s.noise_b;
  } else {
    j["trans_sd"] = s.noise_a;
    j["rot_sd_deg"] = s.noise_b;
  }
  j["box"] = {s.box_lo, s.box_hi};
  return j;
}

inline SensorSpec sensor_spec_from_json(const nlohmann::json& j) {
  for (const char* key : {"kind", "id"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("sensor spec: missing required key '") + key + "'");
  SensorSpec s;
  s.kind = j.at("kind").get<std::string>();
  if (s.kind == "magnetic")
    require_keys(j, {"kind", "id", "position_sd", "axis_sd", "box"}, "sensor spec");
  else
    require_keys(j, {"kind", "id", "trans_sd", "rot_sd_deg", "box"}, "sensor spec");
  s.id = j.at("id").get<int>();
  const char* ka = s.kind == "magnetic" ? "position_sd" : "trans_sd";
  const char* kb = s.kind == "magnetic" ? "axis_sd" : "rot_sd_deg";
  if (j.contains(ka)) s.noise_a = j.at(ka).get<double>();
  if (j.contains(kb)) s.noise_b = j.at(kb).get<double>();
  if (j.contains("box")) {
    if (j.at("box").size() != 2) throw std::invalid_argument("sensor spec: box needs two entries");
    s.box_lo = j.at("box")[0].get<double>();
    s.box_hi = j.at("box")[1].get<double>();
  }
  return s;
}

} // namespace detail

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["version"] = s.version;
  j["name"] = s.name;
  j["archetype"] = s.archetype;
  j["trajectory"] = {{"duration", s.trajectory.duration},
                     {"rate", s.trajectory.rate},
                     {"speed", s.trajectory.speed},
                     {"workspace", s.trajectory.workspace},
                     {"rot_range_deg", s.trajectory.rot_range_deg},
                     {"loops", s.trajectory.loops}};
  j["sensors"] = nlohmann::json::array();
  for (const auto& spec : s.sensors) j["sensors"].push_back(detail::sensor_spec_to_json(spec));
  j["faults"] = nlohmann::json::array();
  for (const auto& w : s.faults.windows)
    j["faults"].push_back({{"sensor_id", w.sensor_id}, {"start", w.start}, {"end", w.end}});
  j["filter"] = {{"particle_count", s.filter.particle_count},
                 {"ess_threshold", s.filter.ess_threshold},
                 {"alpha_walk_var", s.filter.alpha_walk_var},
                 {"history_length", s.filter.history_length},
                 {"initial_sigma_alpha", s.filter.initial_sigma_alpha},
                 {"process_noise",
                  {s.filter.process_noise[0], s.filter.process_noise[1], s.filter.process_noise[2],
                   s.filter.process_noise[3], s.filter.process_noise[4], s.filter.process_noise[5]}},
                 {"threads", s.filter.threads}};
  j["motion"] = {{"model", s.motion_model}, {"params", s.motion_params}};
  j["prior"] = {{"position_sd", s.prior_pos_sd}, {"rotation_sd", s.prior_rot_sd}};
  j["seed"] = s.seed;
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  detail::require_keys(j,
                       {"version", "name", "archetype", "trajectory", "sensors", "faults", "filter",
                        "motion", "prior", "seed"},
                       "scenario");
  for (const char* key : {"version", "archetype", "sensors", "seed"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("scenario: missing required key '") + key + "'");
  Scenario s;
  s.version = j.at("version").get<int>();
  if (s.version != 1) throw std::invalid_argument("scenario: unsupported version");
  if (j.contains("name")) s.name = j.at("name").get<std::string>();
  s.archetype = j.at("archetype").get<std::string>();

  if (j.contains("trajectory")) {
    const auto& tj = j.at("trajectory");
    detail::require_keys(tj, {"duration", "rate", "speed", "workspace", "rot_range_deg", "loops"},
                         "scenario trajectory");
    if (tj.contains("duration")) s.trajectory.duration = tj.at("duration").get<double>();
    if (tj.contains("rate")) s.trajectory.rate = tj.at("rate").get<double>();
    if (tj.contains("speed")) s.trajectory.speed = tj.at("speed").get<double>();
    if (tj.contains("workspace")) s.trajectory.workspace = tj.at("workspace").get<double>();
    if (tj.contains("rot_range_deg"))
      s.trajectory.rot_range_deg = tj.at("rot_range_deg").get<double>();
    if (tj.contains("loops")) s.trajectory.loops = tj.at("loops").get<int>();
  }

  for (const auto& sj : j.at("sensors")) s.sensors.push_back(detail::sensor_spec_from_json(sj));
  if (j.contains("faults"))
    for (const auto& fj : j.at("faults")) {
      detail::require_keys(fj, {"sensor_id", "start", "end"}, "scenario fault");
      FaultWindow w;
      w.sensor_id = fj.at("sensor_id").get<int>();
      w.start = fj.at("start").get<double>();
      w.end = fj.at("end").get<double>();
      s.faults.windows.push_back(w);
    }

  if (j.contains("filter")) {
    const auto& fj = j.at("filter");
    detail::require_keys(fj,
                         {"particle_count", "ess_threshold", "alpha_walk_var", "history_length",
                          "initial_sigma_alpha", "process_noise", "threads"},
                         "scenario filter");
    if (fj.contains("particle_count")) s.filter.particle_count = fj.at("particle_count").get<int>();
    if (fj.contains("ess_threshold")) s.filter.ess_threshold = fj.at("ess_threshold").get<double>();
    if (fj.contains("alpha_walk_var")) s.filter.alpha_walk_var = fj.at("alpha_walk_var").get<double>();
    if (fj.contains("history_length")) s.filter.history_length = fj.at("history_length").get<int>();
    if (fj.contains("initial_sigma_alpha"))
      s.filter.initial_sigma_alpha = fj.at("initial_sigma_alpha").get<double>();
    if (fj.contains("process_noise")) {
      const auto& pn = fj.at("process_noise");
      if (pn.size() != 6)
        throw std::invalid_argument("scenario filter: process_noise needs six entries");
      for (int i = 0; i < 6; ++i) s.filter.process_noise[i] = pn[i].get<double>();
    }
    if (fj.contains("threads")) s.filter.threads = fj.at("threads").get<int>();
  }

  if (j.contains("motion")) {
    const auto& mj = j.at("motion");
    detail::require_keys(mj, {"model", "params"}, "scenario motion");
    if (mj.contains("model")) s.motion_model = mj.at("model").get<std::string>();
    if (mj.contains("params")) s.motion_params = mj.at("params").get<std::string>();
  }

  if (j.contains("prior")) {
    const auto& pj = j.at("prior");
    detail::require_keys(pj, {"position_sd", "rotation_sd"}, "scenario prior");
    if (pj.contains("position_sd")) s.prior_pos_sd = pj.at("position_sd").get<double>();
    if (pj.contains("rotation_sd")) s.prior_rot_sd = pj.at("rotation_sd").get<double>();
  }

  s.seed = j.at("seed").get<std::uint64_t>();
  s.filter.seed = s.seed;
  return s;
}

inline Scenario read_scenario(const std::string& path) {
  Scenario s = scenario_from_json(detail::load_json_file(path, "scenario"));
  s.validate();
  return s;
}

inline void write_scenario(const std::string& path, const Scenario& s) {
  detail::dump_json_file(path, scenario_to_json(s), "scenario");
}

/// Fingerprint of the canonical scenario serialization (object keys are
/// emitted in sorted order, so the hash is stable across platforms).
inline std::uint64_t scenario_hash(const Scenario& s) {
  return fnv1a64(scenario_to_json(s).dump());
}

} // namespace sfuse
