#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/ukf.hpp"

using namespace sfuse;

namespace {

Mat6 random_spd6(RngStream& rng, double scale) {
  Mat6 a;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) a(r, c) = rng.normal();
  return scale * (a * a.transpose()) + 1e-4 * Mat6::Identity();
}

void check_psd(const Mat6& m) {
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Mat6> es(m);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

} // namespace

TEST_CASE("sigma points: degenerate and identity spreads", "[ukf]") {
  UkfConfig cfg;
  GaussianBelief b;
  b.mean_pose = Pose6D::identity();
  b.mean_pose.position = Vec3(0.3, -0.2, 0.1);
  b.cov = Mat6::Zero();

  const SigmaPoints zero = sigma_points(b, cfg);
  for (int i = 0; i < SigmaPoints::kCount; ++i) {
    CHECK(translation_error(zero.pose[i], b.mean_pose) < 1e-8);
    CHECK(rotation_error_deg(zero.pose[i], b.mean_pose) < 1e-6);
  }

  b.cov = Mat6::Identity();
  const SigmaPoints sp = sigma_points(b, cfg);
  const double n = 6.0;
  const double lambda = cfg.spread_scale * cfg.spread_scale * (n + cfg.secondary_scale) - n;
  const double s = std::sqrt(n + lambda);
  for (int i = 0; i < 6; ++i) {
    const Vec6 plus = local_coords(b.mean_pose, sp.pose[1 + i]);
    const Vec6 minus = local_coords(b.mean_pose, sp.pose[7 + i]);
    Vec6 want = Vec6::Zero();
    want[i] = s;
    CHECK((plus - want).norm() < 1e-12);
    CHECK((minus + want).norm() < 1e-12);
  }
  double wsum = 0.0;
  for (int i = 0; i < SigmaPoints::kCount; ++i) wsum += sp.w_mean[i];
  CHECK(std::abs(wsum - 1.0) < 1e-9);
}

TEST_CASE("sigma points reproduce the input moments", "[ukf]") {
  UkfConfig cfg;
  RngStream rng(201);
  for (int trial = 0; trial < 20; ++trial) {
    GaussianBelief b;
    b.mean_pose.position = Vec3(rng.normal(), rng.normal(), rng.normal());
    b.mean_pose.orientation = Quat(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    b.mean_pose.normalize_canonical();
    b.cov = random_spd6(rng, 0.01);

    const SigmaPoints sp = sigma_points(b, cfg);
    Vec6 mean = Vec6::Zero();
    for (int i = 0; i < SigmaPoints::kCount; ++i)
      mean += sp.w_mean[i] * local_coords(b.mean_pose, sp.pose[i]);
    CHECK(mean.norm() < 1e-9);

    Mat6 cov = Mat6::Zero();
    for (int i = 0; i < SigmaPoints::kCount; ++i) {
      const Vec6 d = local_coords(b.mean_pose, sp.pose[i]);
      cov += sp.w_cov[i] * d * d.transpose();
    }
    CHECK((cov - b.cov).cwiseAbs().maxCoeff() < 1e-9);
  }

  GaussianBelief bad;
  bad.cov = -Mat6::Identity();
  CHECK_THROWS_AS(sigma_points(bad, cfg), NumericError);
}

TEST_CASE("predict: identity motion keeps the belief", "[ukf]") {
  UkfConfig cfg;
  RngStream rng(202);
  GaussianBelief b;
  b.mean_pose.position = Vec3(0.1, 0.2, -0.3);
  b.mean_pose.orientation = quat_exp(Vec3(0.2, -0.1, 0.4));
  b.cov = random_spd6(rng, 0.01);

  const auto ident = [](const Pose6D& p) { return p; };
  const GaussianBelief out = ukf_predict(b, ident, Vec6::Zero(), cfg);
  CHECK(translation_error(out.mean_pose, b.mean_pose) < 1e-9);
  CHECK(rotation_error_deg(out.mean_pose, b.mean_pose) * M_PI / 180.0 < 1e-9);
  CHECK((out.cov - b.cov).cwiseAbs().maxCoeff() < 1e-9);

  // additive process noise appears exactly on the diagonal
  Vec6 q;
  q << 1e-3, 2e-3, 3e-3, 4e-4, 5e-4, 6e-4;
  const GaussianBelief noisy = ukf_predict(b, ident, q, cfg);
  CHECK((noisy.cov - (b.cov + Mat6(q.asDiagonal()))).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("predict matches the algebraic Kalman filter on a linear model", "[ukf]") {
  UkfConfig cfg;
  RngStream rng(203);
  GaussianBelief b;
  b.mean_pose = Pose6D::identity();
  b.mean_pose.position = Vec3(1.0, -2.0, 0.5);
  b.cov = random_spd6(rng, 0.01);

  const Vec3 drift(0.05, -0.02, 0.01);
  const auto shift = [&](const Pose6D& p) {
    Pose6D out = p;
    out.position += drift;
    return out;
  };
  Vec6 q;
  q << 1e-3, 1e-3, 1e-3, 1e-4, 1e-4, 1e-4;

  oracle::KfN kf;
  kf.mean = Eigen::VectorXd::Zero(6);
  kf.mean.head<3>() = b.mean_pose.position;
  kf.cov = b.cov;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(6);
  u.head<3>() = drift;
  kf.predict(Eigen::MatrixXd::Identity(6, 6), u, Mat6(q.asDiagonal()));

  const GaussianBelief out = ukf_predict(b, shift, q, cfg);
  CHECK((out.mean_pose.position - kf.mean.head<3>()).norm() < 1e-8);
  CHECK((out.cov - kf.cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("update: exact observation and uninformative observation", "[ukf]") {
  UkfConfig cfg;
  RngStream rng(204);
  GaussianBelief b;
  b.mean_pose.position = Vec3(0.4, 0.1, -0.2);
  b.mean_pose.orientation = quat_exp(Vec3(0.1, 0.3, -0.2));
  b.cov = random_spd6(rng, 0.01);

  const auto h = [](const Pose6D& p) { return VecX(p.position); };
  const MatX r = 1e-3 * MatX::Identity(3, 3);

  const UkfUpdate exact = ukf_update(b, h, r, VecX(b.mean_pose.position), cfg);
  CHECK(exact.residual.norm() < 1e-10);
  CHECK(translation_error(exact.belief.mean_pose, b.mean_pose) < 1e-9);
  CHECK(rotation_error_deg(exact.belief.mean_pose, b.mean_pose) * M_PI / 180.0 < 1e-9);

  const MatX huge = 1e12 * MatX::Identity(3, 3);
  VecX z(3);
  z << 5.0, -3.0, 2.0;
  const UkfUpdate weak = ukf_update(b, h, huge, z, cfg);
  CHECK(weak.gain.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(translation_error(weak.belief.mean_pose, b.mean_pose) < 1e-6);
  CHECK((weak.belief.cov - b.cov).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("predict+update tracks the algebraic Kalman filter for 100 steps", "[ukf]") {
  UkfConfig cfg;
  RngStream rng(205);

  GaussianBelief b;
  b.mean_pose = Pose6D::identity();
  b.cov = 0.05 * Mat6::Identity();

  oracle::KfN kf;
  kf.mean = Eigen::VectorXd::Zero(6);
  kf.cov = b.cov;

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 6);
  H.leftCols<3>() = Eigen::Matrix3d::Identity();
  const MatX r = 0.01 * MatX::Identity(3, 3);
  Vec6 q;
  q << 1e-3, 1e-3, 1e-3, 1e-4, 1e-4, 1e-4;
  const auto h = [](const Pose6D& p) { return VecX(p.position); };

  double loglik_ukf = 0.0, loglik_kf = 0.0;
  for (int step = 0; step < 100; ++step) {
    const Vec3 drift(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                     rng.uniform(-0.05, 0.05));
    const auto shift = [&](const Pose6D& p) {
      Pose6D out = p;
      out.position += drift;
      return out;
    };
    b = ukf_predict(b, shift, q, cfg);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(6);
    u.head<3>() = drift;
    kf.predict(Eigen::MatrixXd::Identity(6, 6), u, Mat6(q.asDiagonal()));

    VecX z = VecX(b.mean_pose.position) + 0.1 * VecX::NullaryExpr(3, [&](Eigen::Index) {
               return rng.normal();
             });
    const UkfUpdate up = ukf_update(b, h, r, z, cfg);
    b = up.belief;
    loglik_ukf += up.log_likelihood;
    loglik_kf += kf.update(H, z, r);

    CHECK((b.mean_pose.position - kf.mean.head<3>()).norm() < 1e-8);
    CHECK((b.cov - kf.cov).cwiseAbs().maxCoeff() < 1e-8);
    check_psd(b.cov);
  }
  CHECK(std::abs(loglik_ukf - loglik_kf) < 1e-6);
}

TEST_CASE("observation likelihood normalizes to 1", "[ukf]") {
  UkfConfig cfg;
  GaussianBelief b;
  b.mean_pose = Pose6D::identity();
  b.mean_pose.position = Vec3(0.2, -0.1, 0.0);
  b.cov = 0.02 * Mat6::Identity();

  SECTION("one-dimensional reduction") {
    const auto h1 = [](const Pose6D& p) {
      VecX v(1);
      v << p.position.x();
      return v;
    };
    const ObservationMoments mo = ukf_observation_moments(b, h1, cfg);
    MatX r(1, 1);
    r << 0.05;
    const double sd = std::sqrt(mo.spread_cov(0, 0) + r(0, 0));
    const double total = oracle::integrate(
        [&](double z) {
          VecX zz(1);
          zz << z;
          return std::exp(ukf_log_likelihood(mo, r, zz));
        },
        mo.z_pred[0] - 12 * sd, mo.z_pred[0] + 12 * sd, 4000);
    CHECK(std::abs(total - 1.0) < 1e-9);
  }

  SECTION("two-dimensional reduction") {
    const auto h2 = [](const Pose6D& p) {
      VecX v(2);
      v << p.position.x(), p.position.y();
      return v;
    };
    const ObservationMoments mo = ukf_observation_moments(b, h2, cfg);
    MatX r = 0.03 * MatX::Identity(2, 2);
    const double sd0 = std::sqrt(mo.spread_cov(0, 0) + r(0, 0));
    const double sd1 = std::sqrt(mo.spread_cov(1, 1) + r(1, 1));
    const double total = oracle::integrate(
        [&](double z0) {
          return oracle::integrate(
              [&](double z1) {
                VecX zz(2);
                zz << z0, z1;
                return std::exp(ukf_log_likelihood(mo, r, zz));
              },
              mo.z_pred[1] - 10 * sd1, mo.z_pred[1] + 10 * sd1, 400);
        },
        mo.z_pred[0] - 10 * sd0, mo.z_pred[0] + 10 * sd0, 400);
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("update rejects a singular innovation covariance", "[ukf]") {
  UkfConfig cfg;
  GaussianBelief b;
  b.mean_pose = Pose6D::identity();
  b.cov = Mat6::Zero();
  const auto h = [](const Pose6D& p) { return VecX(p.position); };
  const MatX r = MatX::Zero(3, 3);
  VecX z = VecX::Zero(3);
  CHECK_THROWS_AS(ukf_update(b, h, r, z, cfg), NumericError);
}
