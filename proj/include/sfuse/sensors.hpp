#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfuse/csv.hpp"
#include "sfuse/numeric.hpp"
#include "sfuse/pose.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/types.hpp"

namespace sfuse {

enum class SensorKind { magnetic_5dof, vo_relative_6dof };

/// One observation regime of a sensor. Index 0 is the failure regime, whose
/// observations are independent of the pose and modeled by a constant density
/// over the observation space; indices >= 1 are pose-informative regimes with
/// Gaussian noise.
struct SensorRegime {
  int index = 0;
  bool failure = false;
  MatX cov;                          // informative regimes only
  double failure_log_density = 0.0;  // failure regime only
};

/// Magnetic axis direction from its first two encoded components, omitted
/// component non-negative by convention.
inline Vec3 magnetic_axis_from(double ax, double ay) {
  const double s = ax * ax + ay * ay;
  if (s >= 1.0) {
    const double n = std::sqrt(s);
    return Vec3(ax / n, ay / n, 0.0);
  }
  return Vec3(ax, ay, std::sqrt(1.0 - s));
}

/// Position plus the first two components of the rotated body z-axis; roll
/// about that axis is unobservable.
inline VecX h_magnetic(const Pose6D& x) {
  const Vec3 axis = x.orientation * Vec3::UnitZ();
  VecX z(5);
  z.head<3>() = x.position;
  z[3] = axis.x();
  z[4] = axis.y();
  return z;
}

inline Vec6 vo_encode_delta(const PoseDelta& d) {
  Vec6 z;
  z.head<3>() = d.translation;
  z.tail<3>() = quat_log(d.rotation);
  return z;
}

inline PoseDelta vo_decode_delta(const Vec6& z) {
  return PoseDelta(Vec3(z.head<3>()), quat_exp(Vec3(z.tail<3>())));
}

/// Frame-to-frame relative motion as translation plus rotation vector.
inline VecX h_vo(const Pose6D& x_t, const Pose6D& x_prev) {
  return VecX(vo_encode_delta(between(x_prev, x_t)));
}

struct SensorModel {
  int id = 0;
  std::string name;
  SensorKind kind = SensorKind::magnetic_5dof;
  int dim = 0;
  bool relative = false;  // observation depends on the previous pose too
  std::vector<SensorRegime> regimes;

  // failure-regime draw support: workspace box for position-like components
  Vec3 box_lo = Vec3::Constant(-0.1);
  Vec3 box_hi = Vec3::Constant(0.1);
  bool fast_motion = false;   // vo only: failure emits large deltas instead
  double fast_scale = 10.0;

  int regime_count() const { return static_cast<int>(regimes.size()); }
  int d() const { return regime_count() - 1; }

  void validate() const {
    if (regimes.size() < 2)
      throw std::invalid_argument("sensor needs a failure regime plus one informative regime");
    if (!regimes[0].failure || regimes[0].index != 0)
      throw std::invalid_argument("regime 0 must be the failure regime");
    for (size_t j = 1; j < regimes.size(); ++j) {
      if (regimes[j].failure || regimes[j].index != static_cast<int>(j))
        throw std::invalid_argument("informative regimes must be indexed 1..d");
      if (regimes[j].cov.rows() != dim || regimes[j].cov.cols() != dim)
        throw std::invalid_argument("regime covariance dimension mismatch");
      if ((regimes[j].cov - regimes[j].cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("regime covariance must be symmetric");
      Eigen::SelfAdjointEigenSolver<MatX> es(regimes[j].cov);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("regime covariance must be positive definite");
    }
    if ((box_hi - box_lo).minCoeff() <= 0.0)
      throw std::invalid_argument("workspace box must have positive extent");
  }

  VecX h(const Pose6D& x) const {
    if (relative) throw std::logic_error("relative sensor needs the previous pose");
    return h_magnetic(x);
  }

  VecX h(const Pose6D& x, const Pose6D& prev) const {
    if (!relative) return h(x);
    return h_vo(x, prev);
  }

  /// Pose-independent failure observation. Draw counts per call are fixed so
  /// the stream stays aligned regardless of the trajectory.
  VecX draw_failure(RngStream& rng) const {
    if (kind == SensorKind::magnetic_5dof) {
      VecX z(5);
      for (int i = 0; i < 3; ++i) z[i] = rng.uniform(box_lo[i], box_hi[i]);
      const Vec3 axis = rng.unit_sphere();
      z[3] = axis.x();
      z[4] = axis.y();
      return z;
    }
    VecX z(6);
    const Vec3 width = box_hi - box_lo;
    if (fast_motion) {
      // very fast frame-to-frame motion: translations far beyond the nominal
      // step size, rotations in the upper half of the angle range
      for (int i = 0; i < 3; ++i)
        z[i] = rng.uniform(-fast_scale * width[i], fast_scale * width[i]);
      const Vec3 dir = rng.unit_sphere();
      const double angle = rng.uniform(M_PI / 2.0, M_PI);
      z.tail<3>() = angle * dir;
    } else {
      for (int i = 0; i < 3; ++i) z[i] = rng.uniform(-width[i], width[i]);
      const Vec3 dir = rng.unit_sphere();
      const double angle = M_PI * std::cbrt(rng.uniform());  // uniform in the ball
      z.tail<3>() = angle * dir;
    }
    return z;
  }
};

/// Constant log-density of the failure model: uniform over the workspace box
/// for position-like components times uniform over the direction space.
inline double magnetic_failure_log_density(const Vec3& box_lo, const Vec3& box_hi) {
  const Vec3 w = box_hi - box_lo;
  const double v_box = w.x() * w.y() * w.z();
  const double a_disk = M_PI;  // (ax, ay) lives in the unit disk
  return -std::log(v_box * a_disk);
}

inline double vo_failure_log_density(const Vec3& box_lo, const Vec3& box_hi) {
  const Vec3 w = box_hi - box_lo;
  const double v_delta = 8.0 * w.x() * w.y() * w.z();  // twice the box width per axis
  const double v_ball = 4.0 / 3.0 * M_PI * M_PI * M_PI * M_PI;  // rotation vectors, radius pi
  return -std::log(v_delta * v_ball);
}

inline SensorModel make_magnetic_sensor(int id, double position_sd, double axis_sd,
                                        const Vec3& box_lo, const Vec3& box_hi) {
  SensorModel s;
  s.id = id;
  s.name = "magnetic";
  s.kind = SensorKind::magnetic_5dof;
  s.dim = 5;
  s.relative = false;
  s.box_lo = box_lo;
  s.box_hi = box_hi;
  SensorRegime fail;
  fail.index = 0;
  fail.failure = true;
  fail.failure_log_density = magnetic_failure_log_density(box_lo, box_hi);
  SensorRegime nominal;
  nominal.index = 1;
  VecX v(5);
  v << position_sd * position_sd, position_sd * position_sd, position_sd * position_sd,
      axis_sd * axis_sd, axis_sd * axis_sd;
  nominal.cov = MatX(v.asDiagonal());
  s.regimes = {fail, nominal};
  s.validate();
  return s;
}

inline SensorModel make_vo_sensor(int id, double trans_sd, double rot_sd_deg,
                                  const Vec3& box_lo, const Vec3& box_hi,
                                  bool fast_motion = false) {
  SensorModel s;
  s.id = id;
  s.name = "vo";
  s.kind = SensorKind::vo_relative_6dof;
  s.dim = 6;
  s.relative = true;
  s.box_lo = box_lo;
  s.box_hi = box_hi;
  s.fast_motion = fast_motion;
  SensorRegime fail;
  fail.index = 0;
  fail.failure = true;
  fail.failure_log_density = vo_failure_log_density(box_lo, box_hi);
  SensorRegime nominal;
  nominal.index = 1;
  const double rot_sd = rot_sd_deg * M_PI / 180.0;
  VecX v(6);
  v << trans_sd * trans_sd, trans_sd * trans_sd, trans_sd * trans_sd, rot_sd * rot_sd,
      rot_sd * rot_sd, rot_sd * rot_sd;
  nominal.cov = MatX(v.asDiagonal());
  s.regimes = {fail, nominal};
  s.validate();
  return s;
}

struct FaultWindow {
  int sensor_id = 0;
  double start = 0.0;
  double end = 0.0;
};

struct FaultSchedule {
  std::vector<FaultWindow> windows;

  void validate() const {
    for (const auto& w : windows)
      if (!(w.start < w.end))
        throw std::invalid_argument("fault window must have start < end");
    for (size_t a = 0; a < windows.size(); ++a)
      for (size_t b = a + 1; b < windows.size(); ++b) {
        if (windows[a].sensor_id != windows[b].sensor_id) continue;
        if (windows[a].start < windows[b].end && windows[b].start < windows[a].end)
          throw std::invalid_argument("fault windows overlap for one sensor");
      }
  }

  bool active(int sensor_id, double t) const {
    for (const auto& w : windows)
      if (w.sensor_id == sensor_id && t >= w.start && t < w.end) return true;
    return false;
  }
};

struct Observation {
  int sensor_id = 0;
  double t = 0.0;
  VecX z;
};

namespace detail {
inline constexpr std::uint64_t kSimStreamTag = 0x53494d4fULL;
}

/// Noisy observations of a ground-truth trajectory under a fault schedule.
/// Each (sensor, step) owns an rng stream keyed by the seed, so the output is
/// reproducible and failure draws do not depend on the trajectory. Relative
/// sensors emit nothing at the first sample.
inline std::vector<Observation> simulate(const std::vector<TrajectorySample>& truth,
                                         const SensorModel& sensor,
                                         const FaultSchedule& schedule, std::uint64_t seed) {
  if (truth.empty()) throw std::invalid_argument("simulate: empty trajectory");
  sensor.validate();
  schedule.validate();
  std::vector<Observation> out;
  out.reserve(truth.size());
  const SensorRegime& nominal = sensor.regimes[1];
  const MatX noise_chol = chol_psd(nominal.cov);
  for (size_t i = 0; i < truth.size(); ++i) {
    if (sensor.relative && i == 0) continue;
    RngStream rng(seed, detail::kSimStreamTag, static_cast<std::uint64_t>(sensor.id),
                  static_cast<std::uint64_t>(i));
    Observation ob;
    ob.sensor_id = sensor.id;
    ob.t = truth[i].t;
    if (schedule.active(sensor.id, truth[i].t)) {
      ob.z = sensor.draw_failure(rng);
    } else {
      const VecX clean = sensor.relative ? sensor.h(truth[i].pose, truth[i - 1].pose)
                                         : sensor.h(truth[i].pose);
      ob.z = clean + noise_chol * rng.normal_vec(sensor.dim);
    }
    out.push_back(std::move(ob));
  }
  return out;
}

inline std::vector<std::string> observation_columns(int dim) {
  std::vector<std::string> cols{"t", "k"};
  for (int i = 0; i < dim; ++i) cols.push_back("z" + std::to_string(i));
  return cols;
}

inline void write_observation_csv(const std::string& path,
                                  const std::vector<Observation>& obs, int dim) {
  CsvWriter w(path, observation_columns(dim));
  for (const auto& ob : obs) {
    std::vector<double> row{ob.t, static_cast<double>(ob.sensor_id)};
    for (int i = 0; i < ob.z.size(); ++i) row.push_back(ob.z[i]);
    w.row(row);
  }
}

inline std::vector<Observation> read_observation_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.columns.size() < 3 || t.columns[0] != "t" || t.columns[1] != "k")
    throw IoError("observation csv header mismatch in " + path);
  const int dim = static_cast<int>(t.columns.size()) - 2;
  for (int i = 0; i < dim; ++i)
    if (t.columns[2 + i] != "z" + std::to_string(i))
      throw IoError("observation csv header mismatch in " + path);
  std::vector<Observation> obs;
  obs.reserve(t.rows.size());
  for (size_t r = 0; r < t.rows.size(); ++r) {
    Observation ob;
    ob.t = t.number(r, 0);
    ob.sensor_id = static_cast<int>(t.number(r, 1));
    ob.z = VecX(dim);
    for (int i = 0; i < dim; ++i) ob.z[i] = t.number(r, 2 + i);
    obs.push_back(std::move(ob));
  }
  return obs;
}

} // namespace sfuse
