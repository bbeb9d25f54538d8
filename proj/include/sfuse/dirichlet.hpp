#pragma once

#include <cmath>
#include <stdexcept>

#include "sfuse/ars.hpp"
#include "sfuse/numeric.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/types.hpp"

namespace sfuse {

inline double dirichlet_log_pdf(const VecX& x, const VecX& conc) {
  if (x.size() != conc.size() || x.size() < 2)
    throw std::invalid_argument("dirichlet_log_pdf: dimension mismatch");
  double sum = 0.0, lp = 0.0, conc_sum = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(x[j] > 0.0))
      throw std::invalid_argument("dirichlet_log_pdf: point on simplex boundary");
    if (!(conc[j] > 0.0))
      throw std::invalid_argument("dirichlet_log_pdf: nonpositive concentration");
    sum += x[j];
    conc_sum += conc[j];
    lp += (conc[j] - 1.0) * std::log(x[j]) - std::lgamma(conc[j]);
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("dirichlet_log_pdf: point does not sum to 1");
  return lp + std::lgamma(conc_sum);
}

inline VecX dirichlet_mean(const VecX& conc) {
  const double s = conc.sum();
  if (!(s > 0.0)) throw std::invalid_argument("dirichlet_mean: nonpositive concentration");
  return conc / s;
}

/// Log-density (up to a constant) of the confidence-memory hyperparameter in
/// l = log sigma: the Dirichlet transition likelihood of the current
/// confidence vector given the previous one, concentration sigma, times a
/// Gaussian random walk on l centered at the previous value. Normalized so the
/// value at sigma == sigma_prev is exactly the Gaussian term (zero at the
/// center), which keeps the hull arithmetic well scaled.
inline double concentration_log_density(double sigma, const VecX& alpha_now,
                                        const VecX& alpha_prev, double sigma_prev,
                                        double walk_var) {
  if (!(sigma > 0.0) || !(sigma_prev > 0.0))
    throw std::invalid_argument("concentration_log_density: nonpositive concentration");
  if (!(walk_var > 0.0))
    throw std::invalid_argument("concentration_log_density: nonpositive walk variance");
  const double ratio = dirichlet_log_pdf(alpha_now, (sigma * alpha_prev).eval()) -
                       dirichlet_log_pdf(alpha_now, (sigma_prev * alpha_prev).eval());
  const double dl = std::log(sigma) - std::log(sigma_prev);
  return ratio - dl * dl / (2.0 * walk_var);
}

/// Derivative of concentration_log_density with respect to l = log sigma.
inline double concentration_log_density_dl(double sigma, const VecX& alpha_now,
                                           const VecX& alpha_prev, double sigma_prev,
                                           double walk_var) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("concentration_log_density_dl: nonpositive concentration");
  const double s = alpha_prev.sum();
  double dsig = s * digamma(sigma * s);
  for (Eigen::Index j = 0; j < alpha_prev.size(); ++j) {
    if (!(alpha_now[j] > 0.0) || !(alpha_prev[j] > 0.0))
      throw std::invalid_argument("concentration_log_density_dl: simplex boundary");
    dsig += alpha_prev[j] * (std::log(alpha_now[j]) - digamma(sigma * alpha_prev[j]));
  }
  const double dl = std::log(sigma) - std::log(sigma_prev);
  return sigma * dsig - dl / walk_var;
}

struct ConcentrationSample {
  double sigma = 0.0;
  bool used_fallback = false;  // rejection sampler detected non-concavity
  int evaluations = 0;
};

/// Draw the next confidence-memory hyperparameter given the realized
/// confidence transition. The density is log-concave in log sigma in
/// practice; it is sampled exactly by adaptive rejection with initial knots
/// at log sigma_prev and +-2 sqrt(walk_var) around it, widened by doubling
/// until the derivative changes sign. If the concavity audit ever trips, the
/// draw falls back to a fixed-length independence Metropolis chain whose
/// proposal is the Gaussian random-walk factor, and the result is flagged.
inline ConcentrationSample sample_concentration(const VecX& alpha_now,
                                                const VecX& alpha_prev, double sigma_prev,
                                                double walk_var, RngStream& rng) {
  if (!(sigma_prev > 0.0))
    throw std::invalid_argument("sample_concentration: nonpositive previous value");
  if (!(walk_var > 0.0))
    throw std::invalid_argument("sample_concentration: nonpositive walk variance");
  const double l0 = std::log(sigma_prev);
  LogDensity d;
  d.value = [&, l0](double l) {
    return concentration_log_density(std::exp(l), alpha_now, alpha_prev, sigma_prev,
                                     walk_var);
  };
  d.derivative = [&](double l) {
    return concentration_log_density_dl(std::exp(l), alpha_now, alpha_prev, sigma_prev,
                                        walk_var);
  };

  const double step = 2.0 * std::sqrt(walk_var);
  double left = l0 - step;
  double right = l0 + step;
  // the walk term dominates far from l0, so sign changes are guaranteed;
  // the iteration caps are only a numerical safety net
  for (int i = 0; i < 200 && !(d.derivative(left) > 0.0); ++i) left = l0 - 2.0 * (l0 - left);
  for (int i = 0; i < 200 && !(d.derivative(right) < 0.0); ++i)
    right = l0 + 2.0 * (right - l0);

  ConcentrationSample out;
  try {
    const double knots[3] = {left, l0, right};
    ArsSampler sampler(d, knots);
    const double l = sampler.sample(rng);
    out.sigma = std::exp(l);
    out.evaluations = sampler.evaluations();
    return out;
  } catch (const ArsError&) {
    out.used_fallback = true;
  }

  // Independence Metropolis: proposal N(l0, walk_var) matches the random-walk
  // factor of the target, so the acceptance ratio reduces to the Dirichlet
  // transition likelihood ratio.
  const int kSteps = 30;
  double l_cur = l0;
  auto dir_term = [&](double l) {
    return dirichlet_log_pdf(alpha_now, (std::exp(l) * alpha_prev).eval());
  };
  double lp_cur = dir_term(l_cur);
  for (int i = 0; i < kSteps; ++i) {
    const double l_prop = rng.normal(l0, std::sqrt(walk_var));
    const double lp_prop = dir_term(l_prop);
    ++out.evaluations;
    if (std::log(rng.uniform()) <= lp_prop - lp_cur) {
      l_cur = l_prop;
      lp_cur = lp_prop;
    }
  }
  out.sigma = std::exp(l_cur);
  return out;
}

} // namespace sfuse
