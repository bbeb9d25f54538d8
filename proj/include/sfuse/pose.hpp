#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "sfuse/types.hpp"

namespace sfuse {

/// Rotation-vector exponential map. Stable for small angles.
inline Quat quat_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  double scale;
  if (theta < 1e-8) {
    // sin(t/2)/t = 1/2 - t^2/48 + O(t^4)
    scale = 0.5 - theta * theta / 48.0;
  } else {
    scale = std::sin(0.5 * theta) / theta;
  }
  Quat q(std::cos(0.5 * theta), scale * rotvec.x(), scale * rotvec.y(),
         scale * rotvec.z());
  q.normalize();
  return q;
}

/// Rotation-vector logarithm. Returns the axis-angle vector with angle in [0, pi].
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v(q.x(), q.y(), q.z());
  const double vnorm = v.norm();
  const double w = std::min(q.w(), 1.0);
  if (vnorm < 1e-12) return 2.0 * v;  // first-order: theta ~ 2*|v|
  const double theta = 2.0 * std::atan2(vnorm, w);
  return (theta / vnorm) * v;
}

/// 6-DoF rigid-body pose: position in meters plus unit quaternion orientation.
/// The stored quaternion is normalized and canonicalized to w >= 0 so that
/// equality tests and averaging are well defined under the double cover.
struct Pose6D {
  Vec3 position{Vec3::Zero()};
  Quat orientation{Quat::Identity()};

  Pose6D() = default;
  Pose6D(const Vec3& p, const Quat& q) : position(p), orientation(q) {
    normalize_canonical();
  }

  static Pose6D identity() { return Pose6D(); }

  void normalize_canonical() {
    const double n = orientation.norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("Pose6D: quaternion norm must be positive and finite");
    // skip the division when already unit so serialization round trips stay
    // bit-exact
    if (std::abs(n - 1.0) > 1e-12) orientation.coeffs() /= n;
    if (orientation.w() < 0.0) orientation.coeffs() = -orientation.coeffs();
  }
};

/// Relative rigid-body motion expressed in the frame of the pose it is applied to.
struct PoseDelta {
  Vec3 translation{Vec3::Zero()};
  Quat rotation{Quat::Identity()};

  PoseDelta() = default;
  PoseDelta(const Vec3& t, const Quat& r) : translation(t), rotation(r) {
    const double n = rotation.norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("PoseDelta: quaternion norm must be positive and finite");
    if (std::abs(n - 1.0) > 1e-12) rotation.coeffs() /= n;
    if (rotation.w() < 0.0) rotation.coeffs() = -rotation.coeffs();
  }

  static PoseDelta identity() { return PoseDelta(); }
};

/// One timestamped pose of a trajectory. Times are non-negative and strictly
/// increasing within a trajectory; loaders enforce this.
struct TrajectorySample {
  double t = 0.0;
  Pose6D pose;
};

/// Apply delta b in the frame of a.
inline Pose6D compose(const Pose6D& a, const PoseDelta& b) {
  return Pose6D(a.position + a.orientation * b.translation,
                a.orientation * b.rotation);
}

/// Chain two deltas: applying the result equals applying a then b.
inline PoseDelta compose(const PoseDelta& a, const PoseDelta& b) {
  return PoseDelta(a.translation + a.rotation * b.translation,
                   a.rotation * b.rotation);
}

/// Relative motion taking a to b, i.e. compose(a, between(a, b)) == b.
inline PoseDelta between(const Pose6D& a, const Pose6D& b) {
  const Quat inv = a.orientation.conjugate();
  return PoseDelta(inv * (b.position - a.position), inv * b.orientation);
}

/// Tangent-space retraction: world-frame translation increment plus a local
/// (right-multiplied) rotation increment.
inline Pose6D retract(const Pose6D& ref, const Vec6& delta) {
  return Pose6D(ref.position + delta.head<3>(),
                ref.orientation * quat_exp(delta.tail<3>()));
}

/// Inverse of retract: local coordinates of x around ref.
inline Vec6 local_coords(const Pose6D& ref, const Pose6D& x) {
  Vec6 d;
  d.head<3>() = x.position - ref.position;
  d.tail<3>() = quat_log(ref.orientation.conjugate() * x.orientation);
  return d;
}

/// Geodesic rotation distance in degrees, in [0, 180]. Invariant under
/// quaternion sign flips of either argument.
inline double rotation_error_deg(const Pose6D& a, const Pose6D& b) {
  // atan2 of the relative quaternion resolves tiny angles where acos of the
  // dot product saturates
  const Quat rel = a.orientation.conjugate() * b.orientation;
  const double angle = 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return angle * 180.0 / M_PI;
}

inline double translation_error(const Pose6D& a, const Pose6D& b) {
  return (a.position - b.position).norm();
}

/// Root mean square of a non-empty list of scalars.
inline double rmse(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("rmse: empty list");
  double acc = 0.0;
  for (double e : errors) acc += e * e;
  return std::sqrt(acc / static_cast<double>(errors.size()));
}

/// Weighted mean pose. Positions average componentwise; quaternions average
/// componentwise after sign alignment to the first element, then renormalize.
/// Adequate for tightly clustered sets; not meaningful for dispersed ones.
inline Pose6D pose_mean(std::span<const Pose6D> poses, std::span<const double> weights) {
  if (poses.empty() || poses.size() != weights.size())
    throw std::invalid_argument("pose_mean: need equally many poses and weights");
  Vec3 p = Vec3::Zero();
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  const Quat& q0 = poses[0].orientation;
  double wsum = 0.0;
  for (size_t i = 0; i < poses.size(); ++i) {
    const double w = weights[i];
    p += w * poses[i].position;
    Quat qi = poses[i].orientation;
    if (qi.dot(q0) < 0.0) qi.coeffs() = -qi.coeffs();
    q += w * qi.coeffs();
    wsum += w;
  }
  if (!(wsum > 0.0)) throw std::invalid_argument("pose_mean: weights must sum to > 0");
  p /= wsum;
  Quat qm(q(3), q(0), q(1), q(2));  // coeffs order is (x,y,z,w)
  return Pose6D(p, qm);
}

/// ZYX (yaw-pitch-roll) Euler angles, radians, for CSV boundaries only.
inline Vec3 quat_to_euler_zyx(const Quat& q) {
  const Mat3 r = q.toRotationMatrix();
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double yaw, roll;
  if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
    yaw = std::atan2(r(1, 0), r(0, 0));
    roll = std::atan2(r(2, 1), r(2, 2));
  } else {
    yaw = std::atan2(-r(0, 1), r(1, 1));
    roll = 0.0;
  }
  return Vec3(yaw, pitch, roll);
}

inline Quat euler_zyx_to_quat(double yaw, double pitch, double roll) {
  return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
              Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(roll, Vec3::UnitX()));
}

/// Per-axis Euler angle differences in degrees (yaw, pitch, roll); the
/// alternative rotation error metric selectable in metrics reports.
inline Vec3 euler_error_deg(const Pose6D& a, const Pose6D& b) {
  const Vec3 ea = quat_to_euler_zyx(a.orientation);
  const Vec3 eb = quat_to_euler_zyx(b.orientation);
  Vec3 d = ea - eb;
  for (int i = 0; i < 3; ++i) {
    while (d(i) > M_PI) d(i) -= 2.0 * M_PI;
    while (d(i) < -M_PI) d(i) += 2.0 * M_PI;
  }
  return d * (180.0 / M_PI);
}

} // namespace sfuse
