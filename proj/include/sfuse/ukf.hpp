#pragma once

#include <array>
#include <functional>

#include "sfuse/numeric.hpp"
#include "sfuse/pose.hpp"

namespace sfuse {

/// Scaled unscented-transform parameters.
struct UkfConfig {
  double spread_scale = 1e-3;   // sigma-point spread (often called alpha)
  double secondary_scale = 0.0; // secondary scaling (kappa)
  double prior_weight = 2.0;    // prior-knowledge weight (beta)
};

/// Gaussian pose belief: mean pose plus covariance in the 6-d tangent space
/// at that pose (world-frame translation, local rotation-vector).
struct GaussianBelief {
  Pose6D mean_pose;
  Mat6 cov = Mat6::Zero();
};

struct SigmaPoints {
  static constexpr int kCount = 13;  // 2n+1 for n = 6
  std::array<Pose6D, kCount> pose;
  std::array<Vec6, kCount> delta;
  std::array<double, kCount> w_mean;
  std::array<double, kCount> w_cov;
};

/// Deterministic 13-point sigma set whose weighted tangent moments reproduce
/// the belief. Throws NumericError when the covariance cannot be factored
/// after the jitter schedule.
inline SigmaPoints sigma_points(const GaussianBelief& b, const UkfConfig& cfg = {}) {
  constexpr int n = 6;
  const double a2 = cfg.spread_scale * cfg.spread_scale;
  const double lambda = a2 * (n + cfg.secondary_scale) - n;
  const double scale = std::sqrt(n + lambda);
  const Mat6 l = chol_psd<Mat6>(b.cov);

  SigmaPoints sp;
  sp.w_mean[0] = lambda / (n + lambda);
  sp.w_cov[0] = sp.w_mean[0] + (1.0 - a2 + cfg.prior_weight);
  for (int i = 1; i < SigmaPoints::kCount; ++i)
    sp.w_mean[i] = sp.w_cov[i] = 1.0 / (2.0 * (n + lambda));

  sp.delta[0] = Vec6::Zero();
  sp.pose[0] = b.mean_pose;
  for (int j = 0; j < n; ++j) {
    const Vec6 d = scale * l.col(j);
    sp.delta[1 + j] = d;
    sp.delta[1 + n + j] = -d;
    sp.pose[1 + j] = retract(b.mean_pose, d);
    sp.pose[1 + n + j] = retract(b.mean_pose, -d);
  }
  return sp;
}

/// Unscented prediction through a deterministic motion function, then
/// additive process noise diag(process_noise_var) in the tangent space.
inline GaussianBelief ukf_predict(const GaussianBelief& b,
                                  const std::function<Pose6D(const Pose6D&)>& f,
                                  const Vec6& process_noise_var,
                                  const UkfConfig& cfg = {}) {
  const SigmaPoints sp = sigma_points(b, cfg);
  std::array<Pose6D, SigmaPoints::kCount> propagated;
  for (int i = 0; i < SigmaPoints::kCount; ++i) propagated[i] = f(sp.pose[i]);

  // Re-center: tangent mean around the propagated center point, then moments
  // around the corrected mean.
  Vec6 mean_delta = Vec6::Zero();
  for (int i = 0; i < SigmaPoints::kCount; ++i)
    mean_delta += sp.w_mean[i] * local_coords(propagated[0], propagated[i]);
  const Pose6D mean_pose = retract(propagated[0], mean_delta);

  Mat6 cov = Mat6::Zero();
  for (int i = 0; i < SigmaPoints::kCount; ++i) {
    const Vec6 r = local_coords(mean_pose, propagated[i]);
    cov += sp.w_cov[i] * (r * r.transpose());
  }
  cov += process_noise_var.asDiagonal();
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {mean_pose, cov};
}

/// Unscented observation statistics of h under the belief: predicted
/// observation, sigma-point spread covariance (before measurement noise), and
/// state-observation cross covariance.
struct ObservationMoments {
  VecX z_pred;
  MatX spread_cov;  // innovation covariance is spread_cov + R
  MatX cross_cov;   // 6 x m
};

inline ObservationMoments ukf_observation_moments(
    const GaussianBelief& b, const std::function<VecX(const Pose6D&)>& h,
    const UkfConfig& cfg = {}) {
  const SigmaPoints sp = sigma_points(b, cfg);
  std::array<VecX, SigmaPoints::kCount> z;
  for (int i = 0; i < SigmaPoints::kCount; ++i) z[i] = h(sp.pose[i]);
  const int m = static_cast<int>(z[0].size());

  ObservationMoments mo;
  mo.z_pred = VecX::Zero(m);
  for (int i = 0; i < SigmaPoints::kCount; ++i) mo.z_pred += sp.w_mean[i] * z[i];

  mo.spread_cov = MatX::Zero(m, m);
  mo.cross_cov = MatX::Zero(6, m);
  for (int i = 0; i < SigmaPoints::kCount; ++i) {
    const VecX dz = z[i] - mo.z_pred;
    mo.spread_cov += sp.w_cov[i] * (dz * dz.transpose());
    mo.cross_cov += sp.w_cov[i] * (sp.delta[i] * dz.transpose());
  }
  mo.spread_cov = 0.5 * (mo.spread_cov + mo.spread_cov.transpose()).eval();
  return mo;
}

/// Gaussian observation likelihood of z for one regime given precomputed
/// moments: N(z; z_pred, spread_cov + R). Throws NumericError on singular S.
inline double ukf_log_likelihood(const ObservationMoments& mo, const MatX& noise_cov,
                                 const VecX& z) {
  return gaussian_log_density(z - mo.z_pred, mo.spread_cov + noise_cov);
}

struct UkfUpdate {
  GaussianBelief belief;
  MatX gain;            // 6 x m
  VecX residual;        // z - z_pred
  MatX innovation_cov;  // spread_cov + R
  double log_likelihood = 0.0;
};

inline UkfUpdate ukf_update_from_moments(const GaussianBelief& b,
                                         const ObservationMoments& mo,
                                         const MatX& noise_cov, const VecX& z) {
  UkfUpdate u;
  u.innovation_cov = mo.spread_cov + noise_cov;
  Eigen::LLT<MatX> llt(u.innovation_cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("ukf_update: singular innovation covariance");
  u.residual = z - mo.z_pred;
  u.gain = llt.solve(mo.cross_cov.transpose()).transpose();  // C S^-1
  u.log_likelihood = gaussian_log_density(u.residual, u.innovation_cov);

  u.belief.mean_pose = retract(b.mean_pose, u.gain * u.residual);
  Mat6 cov = b.cov - u.gain * u.innovation_cov * u.gain.transpose();
  u.belief.cov = 0.5 * (cov + cov.transpose()).eval();
  return u;
}

/// One full unscented measurement update against a regime noise covariance.
inline UkfUpdate ukf_update(const GaussianBelief& b,
                            const std::function<VecX(const Pose6D&)>& h,
                            const MatX& noise_cov, const VecX& z,
                            const UkfConfig& cfg = {}) {
  return ukf_update_from_moments(b, ukf_observation_moments(b, h, cfg), noise_cov, z);
}

} // namespace sfuse
