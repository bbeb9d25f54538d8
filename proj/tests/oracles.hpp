#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here deliberately avoids the code paths under test: poses go
// through 4x4 homogeneous matrices, Kalman updates use the textbook algebra,
// integrals use Simpson's rule.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sfuse/lstm.hpp"
#include "sfuse/pose.hpp"

namespace oracle {

inline Eigen::Matrix4d pose_matrix(const sfuse::Pose6D& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.orientation.toRotationMatrix();
  m.topRightCorner<3, 1>() = p.position;
  return m;
}

inline Eigen::Matrix4d delta_matrix(const sfuse::PoseDelta& d) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = d.rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = d.translation;
  return m;
}

inline sfuse::Pose6D pose_from_matrix(const Eigen::Matrix4d& m) {
  sfuse::Pose6D p;
  p.position = m.topRightCorner<3, 1>();
  p.orientation = Eigen::Quaterniond(Eigen::Matrix3d(m.topLeftCorner<3, 3>()));
  p.normalize_canonical();
  return p;
}

inline double matrix_pose_distance(const Eigen::Matrix4d& a, const Eigen::Matrix4d& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// one-dimensional Kalman filter step, textbook form
struct Kf1 {
  double mean = 0.0;
  double var = 1.0;
  void predict(double drift, double q) {
    mean += drift;
    var += q;
  }
  double update(double z, double r) {  // returns log-likelihood of z
    const double s = var + r;
    const double k = var / s;
    const double nu = z - mean;
    mean += k * nu;
    var = (1.0 - k) * var;
    return -0.5 * (std::log(2.0 * M_PI * s) + nu * nu / s);
  }
};

// multivariate linear-Gaussian Kalman step for systems x' = F x + u, z = H x
struct KfN {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  void predict(const Eigen::MatrixXd& F, const Eigen::VectorXd& u, const Eigen::MatrixXd& Q) {
    mean = F * mean + u;
    cov = F * cov * F.transpose() + Q;
  }
  double update(const Eigen::MatrixXd& H, const Eigen::VectorXd& z, const Eigen::MatrixXd& R) {
    const Eigen::MatrixXd S = H * cov * H.transpose() + R;
    const Eigen::MatrixXd K = cov * H.transpose() * S.inverse();
    const Eigen::VectorXd nu = z - H * mean;
    mean += K * nu;
    cov = cov - K * S * K.transpose();
    const double quad = nu.dot(S.inverse() * nu);
    return -0.5 * (z.size() * std::log(2.0 * M_PI) + std::log(S.determinant()) + quad);
  }
};

// composite Simpson rule
inline double integrate(const std::function<double(double)>& f, double lo, double hi, int n) {
  if (n % 2 != 0) ++n;
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double fd_derivative(const std::function<double(double)>& f, double x, double eps) {
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

// Kolmogorov-Smirnov statistic of samples against an analytic CDF
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double c = cdf(samples[i]);
    d = std::max(d, std::abs(c - (i + 1) / n));
    d = std::max(d, std::abs(c - i / n));
  }
  return d;
}

// total-variation distance between a sample histogram and a density known up
// to its values on the same bins (both normalized over the binned range)
inline double histogram_tv(const std::vector<double>& samples, double lo, double hi, int bins,
                           const std::function<double(double)>& density) {
  std::vector<double> hist(bins, 0.0);
  double inside = 0.0;
  for (double x : samples) {
    if (x < lo || x >= hi) continue;
    ++hist[static_cast<size_t>((x - lo) / (hi - lo) * bins)];
    ++inside;
  }
  if (inside == 0.0) throw std::runtime_error("histogram_tv: no samples in range");
  std::vector<double> ref(bins, 0.0);
  double ref_total = 0.0;
  const double w = (hi - lo) / bins;
  for (int i = 0; i < bins; ++i) {
    ref[i] = integrate(density, lo + i * w, lo + (i + 1) * w, 16);
    ref_total += ref[i];
  }
  double tv = 0.0;
  for (int i = 0; i < bins; ++i) tv += std::abs(hist[i] / inside - ref[i] / ref_total);
  return 0.5 * tv;
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Scalar-loop LSTM forward pass: plain nested loops and std::vector, no
// linear algebra library, recomputing the recurrence from the weight arrays.
inline std::vector<double> lstm_forward(const sfuse::LstmParameters& p,
                                        const std::vector<std::vector<double>>& encodings) {
  const int hs = p.hidden_size;
  const int is = p.input_size;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  std::vector<double> h(hs, 0.0), c(hs, 0.0);
  for (const auto& e : encodings) {
    if (static_cast<int>(e.size()) != 7) throw std::runtime_error("bad encoding size");
    std::vector<double> x(is, 0.0);
    for (int r = 0; r < is; ++r) {
      double acc = p.b_in(r);
      for (int j = 0; j < 7; ++j)
        acc += p.W_in(r, j) * ((e[j] - p.input_mean(j)) / p.input_scale(j));
      x[r] = acc;
    }
    std::vector<double> z(is + hs);
    for (int j = 0; j < is; ++j) z[j] = x[j];
    for (int j = 0; j < hs; ++j) z[is + j] = h[j];
    std::vector<double> cn(hs), hn(hs);
    for (int r = 0; r < hs; ++r) {
      double af = p.b_f(r), ai = p.b_i(r), ag = p.b_g(r), ao = p.b_o(r);
      for (int j = 0; j < is + hs; ++j) {
        af += p.W_f(r, j) * z[j];
        ai += p.W_i(r, j) * z[j];
        ag += p.W_g(r, j) * z[j];
        ao += p.W_o(r, j) * z[j];
      }
      cn[r] = sig(af) * c[r] + sig(ai) * std::tanh(ag);
      hn[r] = sig(ao) * std::tanh(cn[r]);
    }
    c = cn;
    h = hn;
  }
  std::vector<double> out(7, 0.0);
  for (int r = 0; r < 7; ++r) {
    double acc = p.b_out(r);
    for (int j = 0; j < hs; ++j) acc += p.W_out(r, j) * h[j];
    out[r] = acc;
  }
  return out;
}

} // namespace oracle
