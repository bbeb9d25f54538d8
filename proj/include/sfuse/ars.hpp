#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "sfuse/rng.hpp"

namespace sfuse {

struct ArsError : std::runtime_error {
  enum class Kind { not_log_concave, degenerate_support, bracket_failure, stuck };
  Kind kind;
  ArsError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

/// A one-dimensional log-density known up to an additive constant, with its
/// derivative, on an interval support. The density must be log-concave on the
/// support; the sampler audits this as it evaluates.
struct LogDensity {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  double support_lo = -std::numeric_limits<double>::infinity();
  double support_hi = std::numeric_limits<double>::infinity();
};

namespace detail {

// log of integral_{lo}^{hi} exp(h0 + slope * (x - x0)) dx, with lo/hi possibly
// infinite on the decaying side. Computed in log space.
inline double log_exp_integral(double h0, double x0, double slope, double lo, double hi) {
  const double inf = std::numeric_limits<double>::infinity();
  if (lo == -inf) {
    if (!(slope > 0.0)) return inf;  // non-integrable
    return h0 + (hi - x0) * slope - std::log(slope);
  }
  if (hi == inf) {
    if (!(slope < 0.0)) return inf;
    return h0 + (lo - x0) * slope - std::log(-slope);
  }
  const double width = hi - lo;
  if (width <= 0.0) return -inf;
  const double a = (lo - x0) * slope;
  const double e = slope * width;  // exponent change across the segment
  if (std::abs(e) < 1e-12)
    return h0 + a + std::log(width) + 0.5 * e;
  if (e > 0.0)
    return h0 + a + std::log(std::expm1(e) / slope);
  return h0 + (hi - x0) * slope + std::log(std::expm1(-e) / (-slope));
}

} // namespace detail

/// Adaptive rejection sampler for log-concave densities (tangent envelope,
/// chord squeezing function). The envelope tightens with every rejection, so
/// the target is evaluated at most 1 + rejections times per accepted sample.
class ArsSampler {
 public:
  ArsSampler(LogDensity density, std::span<const double> initial_knots)
      : d_(std::move(density)) {
    if (!(d_.support_hi > d_.support_lo))
      throw ArsError(ArsError::Kind::degenerate_support, "ars: empty support interval");
    if (initial_knots.size() < 2)
      throw ArsError(ArsError::Kind::bracket_failure, "ars: need at least 2 initial knots");
    std::vector<double> ks(initial_knots.begin(), initial_knots.end());
    std::sort(ks.begin(), ks.end());
    for (double x : ks) {
      if (!(x > d_.support_lo) || !(x < d_.support_hi))
        throw ArsError(ArsError::Kind::degenerate_support,
                       "ars: initial knot outside open support");
      add_knot(x, d_.value(x), d_.derivative(x));
      ++evaluations_;
    }
    if (std::isinf(d_.support_lo) && !(knots_.front().dh > 0.0))
      throw ArsError(ArsError::Kind::bracket_failure,
                     "ars: leftmost derivative must be positive on unbounded support");
    if (std::isinf(d_.support_hi) && !(knots_.back().dh < 0.0))
      throw ArsError(ArsError::Kind::bracket_failure,
                     "ars: rightmost derivative must be negative on unbounded support");
    rebuild();
  }

  double sample(RngStream& rng) {
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      const double x = draw_from_envelope(rng);
      const double u = upper_at(x);
      const double logw = std::log(rng.uniform());
      if (logw <= lower_at(x) - u) return x;  // squeezing accept, no evaluation
      const double hx = d_.value(x);
      const double dhx = d_.derivative(x);
      ++evaluations_;
      if (hx > u + concavity_tol(u))
        throw ArsError(ArsError::Kind::not_log_concave,
                       "ars: density rises above its tangent envelope");
      const bool accept = logw <= hx - u;
      if (!accept) ++rejections_;
      add_knot(x, hx, dhx);
      rebuild();
      if (accept) return x;
    }
    throw ArsError(ArsError::Kind::stuck, "ars: iteration limit exceeded");
  }

  double upper_at(double x) const {
    const int i = segment_of(x);
    return knots_[i].h + (x - knots_[i].x) * knots_[i].dh;
  }

  double lower_at(double x) const {
    if (x < knots_.front().x || x > knots_.back().x)
      return -std::numeric_limits<double>::infinity();
    size_t i = 1;
    while (i + 1 < knots_.size() && knots_[i].x < x) ++i;
    const auto& a = knots_[i - 1];
    const auto& b = knots_[i];
    const double w = b.x - a.x;
    if (w <= 0.0) return a.h;
    return ((b.x - x) * a.h + (x - a.x) * b.h) / w;
  }

  /// Log of the total (unnormalized) envelope mass. Non-increasing as knots
  /// are added, and always at least the log of the true normalizing constant.
  double total_log_mass() const { return total_log_mass_; }
  int knot_count() const { return static_cast<int>(knots_.size()); }
  int evaluations() const { return evaluations_; }
  int rejections() const { return rejections_; }

 private:
  static constexpr int kMaxIterations = 2000;

  struct Knot {
    double x, h, dh;
  };

  static double concavity_tol(double scale) {
    return 1e-8 * std::max(1.0, std::abs(scale));
  }

  void add_knot(double x, double h, double dh) {
    if (!std::isfinite(x) || !std::isfinite(h) || !std::isfinite(dh))
      throw ArsError(ArsError::Kind::degenerate_support,
                     "ars: non-finite density evaluation");
    auto it = std::lower_bound(knots_.begin(), knots_.end(), x,
                               [](const Knot& k, double v) { return k.x < v; });
    if (it != knots_.end() && it->x == x) return;  // duplicate abscissa
    knots_.insert(it, Knot{x, h, dh});
  }

  // Recompute tangent intersections and per-segment log masses. Knot counts
  // stay small, so a full O(k) rebuild keeps the bookkeeping simple.
  void rebuild() {
    const size_t k = knots_.size();
    for (size_t i = 0; i + 1 < k; ++i)
      if (knots_[i].dh < knots_[i + 1].dh - concavity_tol(std::abs(knots_[i].dh)))
        throw ArsError(ArsError::Kind::not_log_concave,
                       "ars: derivative increases between knots");
    z_.assign(k + 1, 0.0);
    z_.front() = d_.support_lo;
    z_.back() = d_.support_hi;
    for (size_t i = 0; i + 1 < k; ++i) {
      const Knot& a = knots_[i];
      const Knot& b = knots_[i + 1];
      double z;
      if (std::abs(a.dh - b.dh) < 1e-14) {
        z = 0.5 * (a.x + b.x);
      } else {
        z = (b.h - a.h - b.x * b.dh + a.x * a.dh) / (a.dh - b.dh);
        // intersection outside the bracket means the tangents do not form a
        // concave hull
        const double slack = 1e-9 * std::max(1.0, b.x - a.x);
        if (z < a.x - slack || z > b.x + slack)
          throw ArsError(ArsError::Kind::not_log_concave,
                         "ars: tangent intersection escapes its bracket");
        z = std::clamp(z, a.x, b.x);
      }
      z_[i + 1] = z;
    }
    log_mass_.assign(k, 0.0);
    for (size_t i = 0; i < k; ++i) {
      log_mass_[i] = detail::log_exp_integral(knots_[i].h, knots_[i].x,
                                              knots_[i].dh, z_[i], z_[i + 1]);
      if (std::isinf(log_mass_[i]) && log_mass_[i] > 0.0)
        throw ArsError(ArsError::Kind::degenerate_support,
                       "ars: envelope has infinite mass");
    }
    total_log_mass_ = log_sum_exp_(log_mass_);
  }

  static double log_sum_exp_(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
  }

  int segment_of(double x) const {
    size_t i = 0;
    while (i + 1 < knots_.size() && x > z_[i + 1]) ++i;
    return static_cast<int>(i);
  }

  double draw_from_envelope(RngStream& rng) const {
    // pick a segment proportional to its mass
    double u = rng.uniform();
    size_t seg = knots_.size() - 1;
    double acc = 0.0;
    for (size_t i = 0; i < log_mass_.size(); ++i) {
      acc += std::exp(log_mass_[i] - total_log_mass_);
      if (u <= acc) {
        seg = i;
        break;
      }
    }
    // inverse CDF of the truncated exponential on [z_lo, z_hi]
    const double lo = z_[seg];
    const double hi = z_[seg + 1];
    const double slope = knots_[seg].dh;
    const double v = rng.uniform();
    const double inf = std::numeric_limits<double>::infinity();
    if (lo == -inf) return hi + std::log(v) / slope;          // slope > 0
    if (hi == inf) return lo + std::log1p(-v) / slope;        // slope < 0
    const double width = hi - lo;
    if (std::abs(slope) * width < 1e-12) return lo + v * width;
    return lo + std::log1p(v * std::expm1(slope * width)) / slope;
  }

  LogDensity d_;
  std::vector<Knot> knots_;
  std::vector<double> z_;         // segment boundaries, size knots+1
  std::vector<double> log_mass_;  // per-segment envelope log mass
  double total_log_mass_ = 0.0;
  int evaluations_ = 0;
  int rejections_ = 0;
};

/// Draw one exact sample from a log-concave density.
inline double ars_sample(const LogDensity& density, std::span<const double> initial_knots,
                         RngStream& rng) {
  ArsSampler sampler(density, initial_knots);
  return sampler.sample(rng);
}

/// Probabilistic log-concavity audit: for random secant pairs, the density at
/// the midpoint must not fall below the chord. Returns false on violation.
inline bool check_log_concavity(const LogDensity& d, double lo, double hi, int trials,
                                RngStream& rng, double tol = 1e-9) {
  for (int i = 0; i < trials; ++i) {
    const double a = rng.uniform(lo, hi);
    const double b = rng.uniform(lo, hi);
    if (std::abs(a - b) < 1e-12) continue;
    const double mid = 0.5 * (a + b);
    const double chord = 0.5 * (d.value(a) + d.value(b));
    if (d.value(mid) < chord - tol * std::max(1.0, std::abs(chord))) return false;
  }
  return true;
}

} // namespace sfuse
