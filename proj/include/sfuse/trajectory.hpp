#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sfuse/pose.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/types.hpp"

namespace sfuse {

/// Motion archetypes for synthetic capsule trajectories. All of them are sums
/// of sinusoids in position and rotation vector, so every trajectory is
/// infinitely differentiable; the archetypes differ in their frequency bands.
enum class TrajectoryArchetype {
  kSlowIncremental,  // sub-0.2 Hz drift through the workspace
  kScanWithLoops,    // exactly periodic closed circuits, revisits its start
  kSharpMotion,      // ~1-2 Hz components, aggressive but still smooth
  kMixed             // slow base with a sharp component layered on top
};

inline std::string archetype_name(TrajectoryArchetype a) {
  switch (a) {
    case TrajectoryArchetype::kSlowIncremental: return "slow-incremental";
    case TrajectoryArchetype::kScanWithLoops: return "scan-with-loops";
    case TrajectoryArchetype::kSharpMotion: return "sharp-motion";
    case TrajectoryArchetype::kMixed: return "mixed";
  }
  throw std::invalid_argument("unknown trajectory archetype");
}

inline TrajectoryArchetype archetype_from_name(const std::string& s) {
  if (s == "slow-incremental") return TrajectoryArchetype::kSlowIncremental;
  if (s == "scan-with-loops") return TrajectoryArchetype::kScanWithLoops;
  if (s == "sharp-motion") return TrajectoryArchetype::kSharpMotion;
  if (s == "mixed") return TrajectoryArchetype::kMixed;
  throw std::invalid_argument("unknown trajectory archetype: " + s);
}

struct TrajectoryParams {
  double duration = 20.0;       // seconds
  double rate = 30.0;           // samples per second
  double speed = 1.0;           // scales all amplitudes; zero freezes the pose
  double workspace = 0.5;       // per-axis translation amplitude budget at speed 1 (m)
  double rot_range_deg = 45.0;  // per-axis rotation-vector amplitude budget at speed 1
  int loops = 3;                // scan-with-loops: closed circuits over the duration

  void validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("trajectory duration must be > 0");
    if (!(rate > 0.0)) throw std::invalid_argument("trajectory rate must be > 0");
    if (!(speed >= 0.0)) throw std::invalid_argument("trajectory speed must be >= 0");
    if (!(workspace > 0.0)) throw std::invalid_argument("trajectory workspace must be > 0");
    if (!(rot_range_deg >= 0.0)) throw std::invalid_argument("rot_range_deg must be >= 0");
    if (loops < 1) throw std::invalid_argument("trajectory loops must be >= 1");
  }
};

namespace detail {

inline constexpr std::uint64_t kTrajStreamTag = 0x54524a47ULL;

/// One axis of motion: value(t) = sum_j amp[j] * sin(2*pi*freq[j]*t + phase[j]).
struct SinusoidAxis {
  std::vector<double> freq;
  std::vector<double> amp;
  std::vector<double> phase;

  double operator()(double t) const {
    double v = 0.0;
    for (size_t j = 0; j < freq.size(); ++j)
      v += amp[j] * std::sin(2.0 * M_PI * freq[j] * t + phase[j]);
    return v;
  }
};

/// Draws per-term amplitudes and phases for one axis, then rescales so the
/// amplitudes sum to exactly `budget`. The axis value is therefore bounded by
/// the budget for all t.
inline SinusoidAxis make_axis(const std::vector<double>& freqs,
                              const std::vector<double>& term_weights, double budget,
                              std::uint64_t seed, std::uint64_t channel) {
  SinusoidAxis ax;
  ax.freq = freqs;
  double total = 0.0;
  for (size_t j = 0; j < freqs.size(); ++j) {
    RngStream rng(seed, kTrajStreamTag, channel, static_cast<std::uint64_t>(j));
    ax.amp.push_back(term_weights[j] * rng.uniform(0.4, 1.0));
    ax.phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
    total += ax.amp.back();
  }
  if (total > 0.0)
    for (double& a : ax.amp) a *= budget / total;
  return ax;
}

inline void archetype_bands(TrajectoryArchetype a, const TrajectoryParams& p,
                            std::vector<double>* freqs, std::vector<double>* weights) {
  switch (a) {
    case TrajectoryArchetype::kSlowIncremental:
      *freqs = {0.05, 0.11, 0.17};
      *weights = {1.0, 0.7, 0.4};
      return;
    case TrajectoryArchetype::kScanWithLoops: {
      // Harmonics of loops/duration share that fundamental period, so the
      // whole pose is exactly periodic and passes through its start each loop.
      const double f0 = static_cast<double>(p.loops) / p.duration;
      *freqs = {f0, 2.0 * f0, 3.0 * f0};
      *weights = {1.0, 0.5, 0.25};
      return;
    }
    case TrajectoryArchetype::kSharpMotion:
      *freqs = {0.7, 1.3, 1.9};
      *weights = {1.0, 0.8, 0.5};
      return;
    case TrajectoryArchetype::kMixed:
      *freqs = {0.07, 0.13, 0.9, 1.7};
      *weights = {1.0, 0.6, 0.35, 0.2};
      return;
  }
  throw std::invalid_argument("unknown trajectory archetype");
}

} // namespace detail

/// Deterministic synthetic trajectory: same archetype, params and seed give
/// bit-identical output. Samples are at t_i = i / rate for i = 0..n-1 with
/// n = round(duration * rate) + 1.
inline std::vector<TrajectorySample> generate_trajectory(TrajectoryArchetype archetype,
                                                         const TrajectoryParams& params,
                                                         std::uint64_t seed) {
  params.validate();
  std::vector<double> freqs, weights;
  detail::archetype_bands(archetype, params, &freqs, &weights);

  const double rot_budget = params.speed * params.rot_range_deg * M_PI / 180.0;
  std::array<detail::SinusoidAxis, 3> pos, rot;
  for (int a = 0; a < 3; ++a) {
    pos[a] = detail::make_axis(freqs, weights, params.speed * params.workspace, seed,
                               static_cast<std::uint64_t>(a));
    rot[a] = detail::make_axis(freqs, weights, rot_budget, seed,
                               static_cast<std::uint64_t>(3 + a));
  }

  const long long n = std::llround(params.duration * params.rate) + 1;
  if (n < 2) throw std::invalid_argument("trajectory needs at least two samples");
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / params.rate;
    const Vec3 p(pos[0](t), pos[1](t), pos[2](t));
    const Vec3 theta(rot[0](t), rot[1](t), rot[2](t));
    out.push_back({t, Pose6D(p, quat_exp(theta))});
  }
  return out;
}

/// Counts re-entries into the (eps_trans, eps_rot_deg) ball around the first
/// pose. A revisit requires having first left a ball twice that size, so
/// samples rattling on the boundary are not double counted.
inline int count_revisits(const std::vector<TrajectorySample>& traj, double eps_trans,
                          double eps_rot_deg) {
  if (traj.empty()) return 0;
  const Pose6D& ref = traj.front().pose;
  int revisits = 0;
  bool armed = false;  // set once the trajectory has gone far from the start
  for (size_t i = 1; i < traj.size(); ++i) {
    const double dt = translation_error(traj[i].pose, ref);
    const double dr = rotation_error_deg(traj[i].pose, ref);
    if (dt <= eps_trans && dr <= eps_rot_deg) {
      if (armed) {
        ++revisits;
        armed = false;
      }
    } else if (dt > 2.0 * eps_trans || dr > 2.0 * eps_rot_deg) {
      armed = true;
    }
  }
  return revisits;
}

} // namespace sfuse
