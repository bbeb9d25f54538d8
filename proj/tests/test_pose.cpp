#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "oracles.hpp"
#include "sfuse/csv.hpp"
#include "sfuse/pose.hpp"
#include "sfuse/rng.hpp"

using namespace sfuse;

namespace {

Pose6D random_pose(RngStream& rng) {
  Pose6D p;
  p.position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  p.orientation = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  p.normalize_canonical();
  return p;
}

PoseDelta random_delta(RngStream& rng) {
  const Pose6D p = random_pose(rng);
  PoseDelta d;
  d.translation = p.position;
  d.rotation = p.orientation;
  return d;
}

} // namespace

TEST_CASE("compose identity neutrality", "[pose]") {
  const Pose6D out = compose(Pose6D::identity(), PoseDelta::identity());
  CHECK(out.position.norm() == 0.0);
  CHECK(rotation_error_deg(out, Pose6D::identity()) == 0.0);
}

TEST_CASE("compose recovers target through between", "[pose]") {
  RngStream rng(101);
  for (int i = 0; i < 200; ++i) {
    const Pose6D p = random_pose(rng);
    const Pose6D q = random_pose(rng);
    const Pose6D r = compose(p, between(p, q));
    CHECK(translation_error(r, q) < 1e-9);
    CHECK(rotation_error_deg(r, q) * M_PI / 180.0 < 1e-9);
  }
}

TEST_CASE("compose matches homogeneous matrix product", "[pose]") {
  Pose6D a = Pose6D::identity();
  a.position = Vec3(1, 0, 0);
  PoseDelta d;
  d.translation = Vec3(0, 1, 0);
  d.rotation = quat_exp(Vec3(0, 0, M_PI / 2));
  const Pose6D got = compose(a, d);
  const Eigen::Matrix4d want = oracle::pose_matrix(a) * oracle::delta_matrix(d);
  CHECK(oracle::matrix_pose_distance(oracle::pose_matrix(got), want) < 1e-12);

  RngStream rng(102);
  for (int i = 0; i < 200; ++i) {
    const Pose6D p = random_pose(rng);
    const PoseDelta e = random_delta(rng);
    const Eigen::Matrix4d m = oracle::pose_matrix(p) * oracle::delta_matrix(e);
    CHECK(oracle::matrix_pose_distance(oracle::pose_matrix(compose(p, e)), m) < 1e-9);
  }
}

TEST_CASE("between special cases and matrix oracle", "[pose]") {
  RngStream rng(103);
  const Pose6D p = random_pose(rng);
  const PoseDelta self = between(p, p);
  CHECK(self.translation.norm() < 1e-12);
  CHECK(std::abs(self.rotation.w()) > 1.0 - 1e-12);

  const Pose6D q = random_pose(rng);
  const PoseDelta from_origin = between(Pose6D::identity(), q);
  CHECK((from_origin.translation - q.position).norm() < 1e-12);
  CHECK(std::abs(from_origin.rotation.dot(q.orientation)) > 1.0 - 1e-12);

  for (int i = 0; i < 200; ++i) {
    const Pose6D a = random_pose(rng);
    const Pose6D b = random_pose(rng);
    const Eigen::Matrix4d want = oracle::pose_matrix(a).inverse() * oracle::pose_matrix(b);
    CHECK(oracle::matrix_pose_distance(oracle::delta_matrix(between(a, b)), want) < 1e-9);
  }
}

TEST_CASE("composition associativity", "[pose]") {
  RngStream rng(104);
  for (int i = 0; i < 100; ++i) {
    const Pose6D a = random_pose(rng);
    const PoseDelta b = random_delta(rng);
    const PoseDelta c = random_delta(rng);
    const Pose6D left = compose(compose(a, b), c);
    const Pose6D right = compose(a, compose(b, c));
    CHECK(translation_error(left, right) < 1e-9);
    CHECK(rotation_error_deg(left, right) * M_PI / 180.0 < 1e-9);
  }
}

TEST_CASE("quaternion invariants hold after operations", "[pose]") {
  RngStream rng(105);
  for (int i = 0; i < 200; ++i) {
    const Pose6D out = compose(random_pose(rng), random_delta(rng));
    CHECK(std::abs(out.orientation.norm() - 1.0) < 1e-9);
    CHECK(out.orientation.w() >= 0.0);
    const PoseDelta d = between(random_pose(rng), random_pose(rng));
    CHECK(std::abs(d.rotation.norm() - 1.0) < 1e-9);
    CHECK(d.rotation.w() >= 0.0);
  }
}

TEST_CASE("rotation error metric", "[pose]") {
  const Pose6D p = Pose6D::identity();
  CHECK(rotation_error_deg(p, p) == 0.0);

  Pose6D yawed = Pose6D::identity();
  yawed.orientation = quat_exp(Vec3(0, 0, M_PI / 2));
  CHECK(std::abs(rotation_error_deg(p, yawed) - 90.0) < 1e-9);

  RngStream rng(106);
  for (int i = 0; i < 50; ++i) {
    const Pose6D a = random_pose(rng);
    Pose6D b = a;
    b.orientation.coeffs() *= -1.0;  // same rotation, flipped sign
    CHECK(rotation_error_deg(a, b) < 1e-6);
    const Pose6D c = random_pose(rng);
    CHECK(std::abs(rotation_error_deg(a, c) - rotation_error_deg(c, a)) < 1e-9);
    CHECK(rotation_error_deg(a, c) >= 0.0);
    CHECK(rotation_error_deg(a, c) <= 180.0);
  }
}

TEST_CASE("rmse", "[pose]") {
  CHECK(rmse(std::vector<double>{0, 0, 0}) == 0.0);
  CHECK(std::abs(rmse(std::vector<double>{3, 4}) - std::sqrt(12.5)) < 1e-12);
  CHECK_THROWS(rmse(std::vector<double>{}));

  RngStream rng(107);
  std::vector<double> v;
  double ss = 0.0;
  for (int i = 0; i < 17; ++i) {
    v.push_back(rng.normal());
    ss += v.back() * v.back();
  }
  CHECK(std::abs(rmse(v) - std::sqrt(ss / v.size())) < 1e-12);
}

TEST_CASE("retract and local coordinates invert each other", "[pose]") {
  RngStream rng(108);
  for (int i = 0; i < 200; ++i) {
    const Pose6D ref = random_pose(rng);
    Vec6 d;
    for (int j = 0; j < 6; ++j) d[j] = rng.uniform(-0.5, 0.5);
    const Pose6D moved = retract(ref, d);
    CHECK((local_coords(ref, moved) - d).norm() < 1e-9);
    const Pose6D other = random_pose(rng);
    const Pose6D back = retract(ref, local_coords(ref, other));
    CHECK(translation_error(back, other) < 1e-9);
    CHECK(rotation_error_deg(back, other) * M_PI / 180.0 < 1e-8);
  }
}

TEST_CASE("quaternion exp/log round trip", "[pose]") {
  CHECK(quat_exp(Vec3::Zero()).w() == 1.0);
  RngStream rng(109);
  for (int i = 0; i < 200; ++i) {
    Vec3 w(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    if (w.norm() > M_PI) w *= (M_PI - 1e-6) / w.norm();  // stay inside injectivity radius
    CHECK((quat_log(quat_exp(w)) - w).norm() < 1e-9);
  }
  // tiny angles use the series branch
  const Vec3 tiny(1e-12, -2e-13, 3e-13);
  CHECK((quat_log(quat_exp(tiny)) - tiny).norm() < 1e-15);
}

TEST_CASE("pose mean aligns quaternion signs", "[pose]") {
  RngStream rng(110);
  const Pose6D p = random_pose(rng);
  Pose6D flipped = p;
  flipped.orientation.coeffs() *= -1.0;
  const Pose6D mean = pose_mean(std::vector<Pose6D>{p, flipped}, std::vector<double>{1.0, 1.0});
  CHECK(rotation_error_deg(mean, p) < 1e-9);
  CHECK(translation_error(mean, p) < 1e-12);

  CHECK_THROWS(pose_mean(std::vector<Pose6D>{}, std::vector<double>{}));
  CHECK_THROWS(pose_mean(std::vector<Pose6D>{p}, std::vector<double>{0.0}));

  // weighted position average
  Pose6D a = Pose6D::identity(), b = Pose6D::identity();
  a.position = Vec3(0, 0, 0);
  b.position = Vec3(1, 0, 0);
  const Pose6D m = pose_mean(std::vector<Pose6D>{a, b}, std::vector<double>{3.0, 1.0});
  CHECK(std::abs(m.position.x() - 0.25) < 1e-12);
}

TEST_CASE("euler conversion round trip and per-axis error", "[pose]") {
  RngStream rng(111);
  for (int i = 0; i < 200; ++i) {
    const double yaw = rng.uniform(-M_PI + 0.01, M_PI - 0.01);
    const double pitch = rng.uniform(-M_PI / 2 + 0.01, M_PI / 2 - 0.01);
    const double roll = rng.uniform(-M_PI + 0.01, M_PI - 0.01);
    const Quat q = euler_zyx_to_quat(yaw, pitch, roll);
    const Vec3 e = quat_to_euler_zyx(q);
    CHECK(std::abs(e[0] - yaw) < 1e-9);
    CHECK(std::abs(e[1] - pitch) < 1e-9);
    CHECK(std::abs(e[2] - roll) < 1e-9);
  }
  Pose6D a = Pose6D::identity(), b = Pose6D::identity();
  b.orientation = euler_zyx_to_quat(0.2, 0, 0);
  const Vec3 err = euler_error_deg(a, b);
  CHECK(std::abs(std::abs(err[0]) - 0.2 * 180.0 / M_PI) < 1e-9);
  CHECK(std::abs(err[1]) < 1e-9);
  CHECK(std::abs(err[2]) < 1e-9);
}

TEST_CASE("trajectory csv round trip", "[pose][io]") {
  RngStream rng(112);
  std::vector<TrajectorySample> traj;
  for (int i = 0; i < 25; ++i) {
    TrajectorySample s;
    s.t = 0.1 * i;
    s.pose = random_pose(rng);
    traj.push_back(s);
  }
  const auto path = std::filesystem::temp_directory_path() / "sfuse_traj_roundtrip.csv";
  write_trajectory_csv(path.string(), traj);
  const auto back = read_trajectory_csv(path.string());
  REQUIRE(back.size() == traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].t == traj[i].t);  // exact: full-precision formatting
    CHECK((back[i].pose.position - traj[i].pose.position).norm() == 0.0);
    CHECK(back[i].pose.orientation.coeffs() == traj[i].pose.orientation.coeffs());
  }
  std::filesystem::remove(path);

  // non-increasing time must be rejected
  const auto bad = std::filesystem::temp_directory_path() / "sfuse_traj_bad.csv";
  {
    std::vector<TrajectorySample> t2 = traj;
    t2[3].t = t2[2].t;
    write_trajectory_csv(bad.string(), t2);
  }
  CHECK_THROWS(read_trajectory_csv(bad.string()));
  std::filesystem::remove(bad);
}
