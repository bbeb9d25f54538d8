#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sfuse/types.hpp"

namespace sfuse {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Digamma by recurrence to x >= 12 plus the asymptotic series. Accurate to
/// ~1e-13 for positive arguments.
inline double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma: requires x > 0");
  double result = 0.0;
  while (x < 12.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return result;
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Square-root factor A with A A^T = a for symmetric PSD a. Positive-definite
/// inputs take the Cholesky fast path; semidefinite or numerically borderline
/// ones fall back to an eigendecomposition with negative eigenvalues clamped
/// to zero. Do not inject jitter: singular directions must stay singular so
/// deterministic dimensions are not polluted. Eigenvalues below
/// -1e-8 * scale mean the matrix is not a covariance and are rejected.
template <typename Mat>
Mat chol_psd(const Mat& a) {
  if (a.isZero(0.0)) return Mat::Zero(a.rows(), a.cols());
  Eigen::LLT<MatX> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatX> es(a);
  if (es.info() != Eigen::Success)
    throw NumericError("chol_psd: eigendecomposition failed");
  const VecX ev = es.eigenvalues();
  const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
  if (ev.minCoeff() < -1e-8 * scale)
    throw NumericError("chol_psd: matrix has a significantly negative eigenvalue");
  const VecX root = ev.cwiseMax(0.0).cwiseSqrt();
  return Mat(es.eigenvectors() * root.asDiagonal());
}

/// Log density of N(residual; 0, cov). Throws on a singular covariance.
inline double gaussian_log_density(const VecX& residual, const MatX& cov) {
  Eigen::LLT<MatX> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("gaussian_log_density: singular covariance");
  const VecX w = llt.matrixL().solve(residual);
  double log_det = 0.0;
  for (int i = 0; i < cov.rows(); ++i) {
    const double d = llt.matrixL()(i, i);
    if (!(d > 0.0)) throw NumericError("gaussian_log_density: singular covariance");
    log_det += 2.0 * std::log(d);
  }
  const double n = static_cast<double>(residual.size());
  return -0.5 * (n * std::log(2.0 * M_PI) + log_det + w.squaredNorm());
}

/// FNV-1a 64-bit hash, used for stable config fingerprints in run manifests.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace sfuse
