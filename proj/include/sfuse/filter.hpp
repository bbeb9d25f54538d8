#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sfuse/csv.hpp"
#include "sfuse/dirichlet.hpp"
#include "sfuse/motion.hpp"
#include "sfuse/numeric.hpp"
#include "sfuse/pose.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/sensors.hpp"
#include "sfuse/ukf.hpp"

namespace sfuse {

struct FilterDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FilterConfig {
  int particle_count = 1000;
  double ess_threshold = 0.5;      // resample when ESS < threshold * N
  double alpha_walk_var = 0.1;     // variance of the log random walk on the concentration
  int history_length = 50;
  double initial_sigma_alpha = 10.0;
  VecX initial_alpha;              // empty: 10% failure mass, rest split over regimes
  Vec6 process_noise = Vec6::Constant(1e-6);  // tangent-space variances, all > 0
  std::uint64_t seed = 0;
  int threads = 1;
  bool evolve_process_noise = false;   // optional per-particle log random walk
  double process_noise_walk_var = 0.0;
  UkfConfig ukf;

  void validate() const {
    if (particle_count < 2) throw std::invalid_argument("particle_count must be >= 2");
    if (!(ess_threshold > 0.0) || ess_threshold > 1.0)
      throw std::invalid_argument("ess_threshold must be in (0,1]");
    if (!(alpha_walk_var > 0.0)) throw std::invalid_argument("alpha_walk_var must be > 0");
    if (history_length < 2) throw std::invalid_argument("history_length must be >= 2");
    if (!(initial_sigma_alpha > 0.0))
      throw std::invalid_argument("initial_sigma_alpha must be > 0");
    if (!(process_noise.minCoeff() > 0.0))
      throw std::invalid_argument("process_noise variances must all be > 0");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (evolve_process_noise && !(process_noise_walk_var > 0.0))
      throw std::invalid_argument("process_noise_walk_var must be > 0 when evolution is on");
  }
};

struct Particle {
  std::vector<Pose6D> history;    // most recent pose last, window of history_length
  Mat6 cov = Mat6::Zero();        // posterior covariance of the last pose proposal
  std::vector<int> s_hat;         // per-sensor switch draw of the current step
  std::vector<VecX> alpha;        // per-sensor confidence vector
  std::vector<double> sigma_alpha;
  Vec6 process_noise = Vec6::Zero();
  double log_weight = 0.0;
  bool dead = false;

  const Pose6D& pose() const { return history.back(); }
};

struct PosteriorSummary {
  double t = 0.0;
  Pose6D pose;                        // MMSE estimate
  std::vector<double> fail_prob;      // per sensor, Pr(s_k = 0)
  std::vector<VecX> alpha;            // per sensor MMSE confidence
  std::vector<double> sigma_alpha;    // per sensor posterior mean
  double ess = 0.0;
  double cov_trace = 0.0;             // tangent covariance trace around the MMSE pose
};

struct FilterStats {
  long switch_prior_fallbacks = 0;  // all regime likelihoods vanished
  long concentration_fallbacks = 0; // rejection sampler handed off to Metropolis
  long dead_particles = 0;
  long resamples = 0;
};

namespace detail {
inline constexpr std::uint64_t kInitTag = 0x494e4954ULL;
inline constexpr std::uint64_t kStepTag = 0x53544550ULL;
inline constexpr std::uint64_t kResampleTag = 0x52534d50ULL;
inline constexpr std::uint64_t kSensorTag = 0x53454e53ULL;

// stream tag for per-sensor draws, keyed by sensor id so reordering the
// sensor list cannot change any draw
inline std::uint64_t sensor_stream_tag(int sensor_id) {
  return kSensorTag + static_cast<std::uint64_t>(sensor_id + 1) * 0x9e3779b97f4a7c15ULL;
}

// Confidence components are kept this far from the simplex boundary. At the
// boundary the Dirichlet normalizer rewards ever-larger concentrations (the
// locked-vertex density grows like log sigma), which would send sigma^alpha
// into unbounded upward drift and make a failed regime impossible to leave.
inline constexpr double kAlphaFloor = 1e-3;

inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n < 2) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = static_cast<int>(static_cast<long>(n) * w / workers);
    const int hi = static_cast<int>(static_cast<long>(n) * (w + 1) / workers);
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}
} // namespace detail

inline double effective_sample_size(std::span<const double> normalized_weights) {
  double s2 = 0.0;
  for (double w : normalized_weights) s2 += w * w;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

/// Systematic resampling: one uniform offset, N evenly spaced positions.
inline std::vector<int> systematic_resample(std::span<const double> normalized_weights,
                                            RngStream& rng) {
  const int n = static_cast<int>(normalized_weights.size());
  std::vector<int> idx(n);
  const double u0 = rng.uniform() / n;
  double cum = normalized_weights[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double u = u0 + static_cast<double>(i) / n;
    while (u > cum && j + 1 < n) cum += normalized_weights[++j];
    idx[i] = j;
  }
  return idx;
}

/// Particle filter over pose, per-sensor switch state, confidence vector, and
/// its concentration hyperparameter. Proposals: per-particle UKF for the pose,
/// likelihood-weighted categorical for the switches, conjugate Dirichlet for
/// the confidence, adaptive rejection sampling for the concentration.
class SwitchingFilter {
 public:
  SwitchingFilter(FilterConfig cfg, std::vector<SensorModel> sensors,
                  const MotionModel* motion)
      : cfg_(std::move(cfg)), sensors_(std::move(sensors)), motion_(motion) {
    cfg_.validate();
    if (sensors_.empty()) throw std::invalid_argument("filter needs at least one sensor");
    for (auto& s : sensors_) s.validate();
    if (!motion_) throw std::invalid_argument("filter needs a motion model");
    for (size_t a = 0; a < sensors_.size(); ++a)
      for (size_t b = a + 1; b < sensors_.size(); ++b)
        if (sensors_[a].id == sensors_[b].id)
          throw std::invalid_argument("sensor ids must be unique");
    // canonical processing order; the estimate must not depend on how the
    // sensor list happens to be ordered
    update_order_.resize(sensors_.size());
    for (size_t k = 0; k < sensors_.size(); ++k) update_order_[k] = static_cast<int>(k);
    std::sort(update_order_.begin(), update_order_.end(),
              [this](int a, int b) { return sensors_[a].id < sensors_[b].id; });
  }

  void init(const GaussianBelief& prior) {
    const Mat6 l = chol_psd(prior.cov);  // throws on invalid prior covariance
    particles_.assign(cfg_.particle_count, Particle{});
    step_index_ = 0;
    stats_ = FilterStats{};
    for (int i = 0; i < cfg_.particle_count; ++i) {
      Particle& p = particles_[i];
      RngStream rng(cfg_.seed, detail::kInitTag, 0, static_cast<std::uint64_t>(i));
      p.history.clear();
      p.history.push_back(retract(prior.mean_pose, Vec6(l * rng.normal_vec(6))));
      p.cov = prior.cov;
      p.process_noise = cfg_.process_noise;
      p.log_weight = -std::log(static_cast<double>(cfg_.particle_count));
      p.dead = false;
      p.s_hat.assign(sensors_.size(), 1);
      p.alpha.clear();
      p.sigma_alpha.assign(sensors_.size(), cfg_.initial_sigma_alpha);
      for (const auto& s : sensors_) p.alpha.push_back(initial_alpha_for(s));
    }
  }

  /// One filter step. obs is aligned with the sensor list; a null entry means
  /// the sensor produced no measurement at this time (dropout, not failure).
  PosteriorSummary step(const std::vector<const Observation*>& obs, double t) {
    if (particles_.empty()) throw std::logic_error("filter not initialized");
    if (obs.size() != sensors_.size())
      throw std::invalid_argument("one observation slot per sensor required");

    std::vector<FilterStats> thread_stats(particles_.size());
    detail::parallel_for(static_cast<int>(particles_.size()), cfg_.threads, [&](int i) {
      step_particle(particles_[i], obs, step_index_, i, &thread_stats[i]);
    });
    for (const auto& s : thread_stats) {
      stats_.switch_prior_fallbacks += s.switch_prior_fallbacks;
      stats_.concentration_fallbacks += s.concentration_fallbacks;
      stats_.dead_particles += s.dead_particles;
    }

    // normalize weights
    std::vector<double> lw(particles_.size());
    for (size_t i = 0; i < particles_.size(); ++i) lw[i] = particles_[i].log_weight;
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse))
      throw FilterDivergence("all particles dead at step " + std::to_string(step_index_));
    std::vector<double> w(particles_.size());
    for (size_t i = 0; i < particles_.size(); ++i) {
      particles_[i].log_weight -= lse;
      w[i] = std::exp(particles_[i].log_weight);
    }

    PosteriorSummary summary = summarize(w, t);

    if (summary.ess < cfg_.ess_threshold * static_cast<double>(particles_.size())) {
      RngStream rng(cfg_.seed, detail::kResampleTag,
                    static_cast<std::uint64_t>(step_index_), 0);
      const std::vector<int> idx = systematic_resample(w, rng);
      std::vector<Particle> next;
      next.reserve(particles_.size());
      for (int j : idx) next.push_back(particles_[j]);
      particles_ = std::move(next);
      const double uniform_lw = -std::log(static_cast<double>(particles_.size()));
      for (auto& p : particles_) p.log_weight = uniform_lw;
      ++stats_.resamples;
    }

    ++step_index_;
    return summary;
  }

  /// Advance one particle through the proposal and weighting chain. Exposed
  /// so tests can drive individual particles with controlled streams.
  void step_particle(Particle& p, const std::vector<const Observation*>& obs,
                     int step_index, int particle_index, FilterStats* stats = nullptr) const {
    if (p.dead) return;
    FilterStats local;
    try {
      step_particle_impl(p, obs, step_index, particle_index, local);
    } catch (const NumericError&) {
      p.dead = true;
      p.log_weight = -std::numeric_limits<double>::infinity();
      ++local.dead_particles;
    } catch (const std::invalid_argument&) {
      // corrupt observation can push a pose construction out of domain
      p.dead = true;
      p.log_weight = -std::numeric_limits<double>::infinity();
      ++local.dead_particles;
    }
    if (!p.dead && !std::isfinite(p.log_weight)) {
      p.dead = true;
      p.log_weight = -std::numeric_limits<double>::infinity();
      ++local.dead_particles;
    }
    if (stats) *stats = local;
  }

  const std::vector<Particle>& particles() const { return particles_; }
  const std::vector<SensorModel>& sensors() const { return sensors_; }
  const FilterConfig& config() const { return cfg_; }
  const FilterStats& stats() const { return stats_; }
  int step_index() const { return step_index_; }

 private:
  VecX initial_alpha_for(const SensorModel& s) const {
    const int m = s.regime_count();
    if (cfg_.initial_alpha.size() != 0) {
      if (cfg_.initial_alpha.size() != m)
        throw std::invalid_argument("initial_alpha size does not match sensor regime count");
      VecX a = cfg_.initial_alpha;
      if (std::abs(a.sum() - 1.0) > 1e-9 || a.minCoeff() <= 0.0)
        throw std::invalid_argument("initial_alpha must be a strictly positive simplex point");
      return a;
    }
    VecX a(m);
    a[0] = 0.1;
    for (int j = 1; j < m; ++j) a[j] = 0.9 / (m - 1);
    return a;
  }

  void step_particle_impl(Particle& p, const std::vector<const Observation*>& obs,
                          int step_index, int particle_index, FilterStats& stats) const {
    const Pose6D prev_pose = p.history.back();
    const auto step_u = static_cast<std::uint64_t>(step_index);
    const auto part_u = static_cast<std::uint64_t>(particle_index);
    RngStream rng(cfg_.seed, detail::kStepTag, step_u, part_u);

    if (cfg_.evolve_process_noise) {
      const double sd = std::sqrt(cfg_.process_noise_walk_var);
      for (int j = 0; j < 6; ++j) p.process_noise[j] *= std::exp(rng.normal(0.0, sd));
    }

    // prediction: each particle is a point sample, so the predicted belief is
    // the motion model's extrapolation of its history with the process noise
    // as covariance (the pose spread lives across the ensemble, not inside a
    // particle). Keeping the prediction covariance at the process noise also
    // keeps the proposal commensurate with the transition density, so the
    // importance ratio cancels exactly in directions no sensor measures.
    const auto f = one_step_predictor(*motion_, p.history);
    const Pose6D f_det = f(prev_pose);
    const Mat6 q_cov = Mat6(p.process_noise.asDiagonal());
    const GaussianBelief pred{f_det, q_cov};

    // per-sensor observation functions anchored at this particle's own
    // previous pose (relative sensors measure frame-to-frame motion)
    std::vector<std::function<VecX(const Pose6D&)>> h(sensors_.size());
    for (size_t k = 0; k < sensors_.size(); ++k) {
      const SensorModel& s = sensors_[k];
      if (s.relative)
        h[k] = [&s, prev_pose](const Pose6D& x) { return s.h(x, prev_pose); };
      else
        h[k] = [&s](const Pose6D& x) { return s.h(x); };
    }

    // per-sensor draws come from streams keyed by sensor id, so the result
    // cannot depend on the order sensors were configured in
    std::vector<RngStream> srng;
    srng.reserve(sensors_.size());
    for (const auto& s : sensors_)
      srng.emplace_back(cfg_.seed, detail::sensor_stream_tag(s.id), step_u, part_u);

    // switch proposal: confidence-weighted regime likelihoods under the
    // predicted belief
    double log_q_s_total = 0.0;
    double log_prior_s_total = 0.0;
    for (size_t k = 0; k < sensors_.size(); ++k) {
      const SensorModel& s = sensors_[k];
      const VecX& a = p.alpha[k];
      if (!obs[k]) {
        // dropout: switch evolves by prior confidence alone; prior and
        // proposal terms cancel in the weight
        p.s_hat[k] = srng[k].categorical(a);
        continue;
      }
      const int m = s.regime_count();
      std::vector<double> lp(m);
      bool any_finite = false;
      ObservationMoments mo;
      bool have_moments = true;
      try {
        mo = ukf_observation_moments(pred, h[k], cfg_.ukf);
      } catch (const NumericError&) {
        have_moments = false;
      }
      for (int j = 0; j < m; ++j) {
        double ll;
        if (j == 0) {
          ll = s.regimes[0].failure_log_density;
        } else if (have_moments) {
          try {
            ll = ukf_log_likelihood(mo, s.regimes[j].cov, obs[k]->z);
          } catch (const NumericError&) {
            ll = -std::numeric_limits<double>::infinity();
          }
        } else {
          ll = -std::numeric_limits<double>::infinity();
        }
        lp[j] = std::log(a[j]) + ll;
        if (std::isfinite(lp[j])) any_finite = true;
      }
      if (!any_finite) {
        // every regime ruled out numerically: fall back to the prior alone
        for (int j = 0; j < m; ++j) lp[j] = std::log(a[j]);
        ++stats.switch_prior_fallbacks;
      }
      const double lse = log_sum_exp(lp);
      std::vector<double> probs(m);
      for (int j = 0; j < m; ++j) probs[j] = std::exp(lp[j] - lse);
      const int s_draw = srng[k].categorical(probs);
      p.s_hat[k] = s_draw;
      log_q_s_total += lp[s_draw] - lse;
      log_prior_s_total += std::log(a[s_draw]);
    }

    // pose proposal: sequential updates with the informative regimes of the
    // drawn switches, in sensor-id order; failed or missing sensors
    // contribute no gain term
    GaussianBelief post = pred;
    for (int k : update_order_) {
      if (!obs[k] || p.s_hat[k] == 0) continue;
      const UkfUpdate up =
          ukf_update(post, h[k], sensors_[k].regimes[p.s_hat[k]].cov, obs[k]->z, cfg_.ukf);
      post = up.belief;
    }
    const Mat6 l = chol_psd(post.cov);
    const Vec6 d = l * rng.normal_vec(6);
    const Pose6D x_new = retract(post.mean_pose, d);
    const double log_q_x = gaussian_log_density(d, post.cov);

    // transition density of the sampled pose around the deterministic
    // prediction from this particle's exact history
    const Vec6 v = local_coords(f_det, x_new);
    const double log_p_x = gaussian_log_density(v, q_cov);

    // observation likelihoods at the sampled pose
    double log_lik = 0.0;
    for (size_t k = 0; k < sensors_.size(); ++k) {
      if (!obs[k]) continue;
      const SensorModel& s = sensors_[k];
      if (p.s_hat[k] == 0) {
        log_lik += s.regimes[0].failure_log_density;
      } else {
        const VecX r = obs[k]->z - h[k](x_new);
        log_lik += gaussian_log_density(r, s.regimes[p.s_hat[k]].cov);
      }
    }

    // confidence: conjugate Dirichlet draw, then the concentration
    // hyperparameter given the realized transition. Both simplex points are
    // floored away from the boundary (see kAlphaFloor) before entering any
    // density, then renormalized so the simplex invariant holds exactly.
    for (size_t k = 0; k < sensors_.size(); ++k) {
      VecX alpha_prev = p.alpha[k].cwiseMax(detail::kAlphaFloor);
      alpha_prev /= alpha_prev.sum();
      VecX conc = p.sigma_alpha[k] * alpha_prev;
      conc[p.s_hat[k]] += 1.0;
      VecX alpha_now = VecX(srng[k].dirichlet(conc)).cwiseMax(detail::kAlphaFloor);
      alpha_now /= alpha_now.sum();
      const ConcentrationSample cs = sample_concentration(
          alpha_now, alpha_prev, p.sigma_alpha[k], cfg_.alpha_walk_var, srng[k]);
      if (cs.used_fallback) ++stats.concentration_fallbacks;
      p.alpha[k] = alpha_now;
      p.sigma_alpha[k] = cs.sigma;
    }

    p.log_weight += log_lik + log_p_x + log_prior_s_total - log_q_x - log_q_s_total;

    p.history.push_back(x_new);
    if (static_cast<int>(p.history.size()) > cfg_.history_length)
      p.history.erase(p.history.begin());
    p.cov = post.cov;
  }

  PosteriorSummary summarize(const std::vector<double>& w, double t) const {
    PosteriorSummary s;
    s.t = t;
    std::vector<Pose6D> poses;
    poses.reserve(particles_.size());
    for (const auto& p : particles_) poses.push_back(p.pose());
    s.pose = pose_mean(poses, w);
    s.ess = effective_sample_size(w);
    s.fail_prob.assign(sensors_.size(), 0.0);
    s.sigma_alpha.assign(sensors_.size(), 0.0);
    s.alpha.clear();
    for (size_t k = 0; k < sensors_.size(); ++k)
      s.alpha.push_back(VecX::Zero(sensors_[k].regime_count()));
    for (size_t i = 0; i < particles_.size(); ++i) {
      const Particle& p = particles_[i];
      for (size_t k = 0; k < sensors_.size(); ++k) {
        if (p.s_hat[k] == 0) s.fail_prob[k] += w[i];
        s.alpha[k] += w[i] * p.alpha[k];
        s.sigma_alpha[k] += w[i] * p.sigma_alpha[k];
      }
      const Vec6 d = local_coords(s.pose, p.pose());
      s.cov_trace += w[i] * d.squaredNorm();
    }
    for (size_t k = 0; k < sensors_.size(); ++k) {
      const double as = s.alpha[k].sum();
      if (as > 0.0) s.alpha[k] /= as;
    }
    return s;
  }

  FilterConfig cfg_;
  std::vector<SensorModel> sensors_;
  const MotionModel* motion_;
  std::vector<int> update_order_;
  std::vector<Particle> particles_;
  FilterStats stats_;
  int step_index_ = 0;
};

inline std::vector<std::string> summary_columns(const std::vector<SensorModel>& sensors) {
  std::vector<std::string> cols = trajectory_columns();
  for (const auto& s : sensors) cols.push_back("pfail_k" + std::to_string(s.id));
  for (const auto& s : sensors)
    for (int j = 0; j < s.regime_count(); ++j)
      cols.push_back("alpha_k" + std::to_string(s.id) + "_" + std::to_string(j));
  for (const auto& s : sensors) cols.push_back("sigma_k" + std::to_string(s.id));
  cols.push_back("ess");
  return cols;
}

inline void append_summary_row(CsvWriter& w, const std::vector<SensorModel>& sensors,
                               const PosteriorSummary& s) {
  std::vector<double> row{s.t,
                          s.pose.position.x(),
                          s.pose.position.y(),
                          s.pose.position.z(),
                          s.pose.orientation.w(),
                          s.pose.orientation.x(),
                          s.pose.orientation.y(),
                          s.pose.orientation.z()};
  for (size_t k = 0; k < sensors.size(); ++k) row.push_back(s.fail_prob[k]);
  for (size_t k = 0; k < sensors.size(); ++k)
    for (int j = 0; j < sensors[k].regime_count(); ++j) row.push_back(s.alpha[k][j]);
  for (size_t k = 0; k < sensors.size(); ++k) row.push_back(s.sigma_alpha[k]);
  row.push_back(s.ess);
  w.row(row);
}

} // namespace sfuse
