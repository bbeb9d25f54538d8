#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sfuse/csv.hpp"
#include "sfuse/numeric.hpp"
#include "sfuse/pose.hpp"
#include "sfuse/vo_scene.hpp"

namespace sfuse {

/// Camera-to-world transform of one frame. Stored as a rotation matrix so
/// Gauss-Newton increments compose without quaternion sign bookkeeping.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}

inline RigidTransform from_pose(const Pose6D& p) {
  return {p.orientation.toRotationMatrix(), p.position};
}

inline Pose6D to_pose(const RigidTransform& x) { return Pose6D(x.t, Quat(x.R)); }

/// One transform per frame. Frame 0 is the gauge and stays at identity
/// throughout optimization; energies themselves accept any transforms.
struct AlignmentParams {
  std::vector<RigidTransform> tau;

  static AlignmentParams identity(size_t frames) {
    AlignmentParams x;
    x.tau.resize(frames);
    return x;
  }

  void validate() const {
    for (const auto& x : tau) {
      if ((x.R.transpose() * x.R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
          x.R.determinant() < 0.0)
        throw std::invalid_argument("alignment: rotations must be orthonormal with det +1");
      if (!x.t.allFinite()) throw std::invalid_argument("alignment: non-finite translation");
    }
  }
};

/// Term weights and the dense-term ramp. The dense weight grows linearly from
/// dense_start to dense_end over dense_ramp_iterations and stays at dense_end
/// afterwards; sparse correspondences keep full weight throughout so early
/// iterations are pulled into the dense terms' convergence basin.
struct EnergyWeights {
  double sparse = 1.0;
  double photo = 1.0;
  double geo = 1.0;
  double dense_start = 0.0;
  double dense_end = 1.0;
  int dense_ramp_iterations = 10;

  void validate() const {
    if (sparse < 0.0 || photo < 0.0 || geo < 0.0 || dense_start < 0.0 || dense_end < 0.0)
      throw std::invalid_argument("alignment weights must be non-negative");
    if (dense_ramp_iterations < 0)
      throw std::invalid_argument("alignment ramp length must be non-negative");
  }

  double dense_weight(int iteration) const {
    if (dense_ramp_iterations <= 0) return dense_end;
    const double s = std::min(1.0, static_cast<double>(iteration) / dense_ramp_iterations);
    return dense_start + (dense_end - dense_start) * s;
  }

  bool dense_active() const {
    return (photo > 0.0 || geo > 0.0) && (dense_start > 0.0 || dense_end > 0.0);
  }
};

inline std::vector<std::pair<int, int>> consecutive_pairs(size_t frames) {
  std::vector<std::pair<int, int>> p;
  for (size_t i = 0; i + 1 < frames; ++i) p.emplace_back(static_cast<int>(i), static_cast<int>(i + 1));
  return p;
}

struct DenseEnergy {
  double value = 0.0;
  int used = 0;
  int skipped = 0;  // no source geometry, behind camera, out of bounds, or bad depth cell
};

namespace detail {

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// d(pixel)/d(camera point) of the pinhole projection.
inline Eigen::Matrix<double, 2, 3> project_jacobian(const CameraIntrinsics& c, const Vec3& m) {
  Eigen::Matrix<double, 2, 3> j;
  const double iz = 1.0 / m.z();
  j << c.fx * iz, 0.0, -c.fx * m.x() * iz * iz, 0.0, c.fy * iz, -c.fy * m.y() * iz * iz;
  return j;
}

/// A depth cell is usable only when all four corners carry real geometry;
/// interpolating across a miss would blend depth with the 0 placeholder.
inline bool depth_cell_valid(const Eigen::MatrixXd& depth, double u, double v) {
  const int w = static_cast<int>(depth.cols());
  const int h = static_cast<int>(depth.rows());
  if (!(u >= 0.0) || !(v >= 0.0) || !(u <= w - 1.0) || !(v <= h - 1.0)) return false;
  int u0 = static_cast<int>(std::floor(u));
  int v0 = static_cast<int>(std::floor(v));
  if (u0 > w - 2) u0 = w - 2;
  if (v0 > h - 2) v0 = h - 2;
  return depth(v0, u0) > 0.0 && depth(v0, u0 + 1) > 0.0 && depth(v0 + 1, u0) > 0.0 &&
         depth(v0 + 1, u0 + 1) > 0.0;
}

} // namespace detail

/// Sum of squared world-frame distances between matched feature points.
inline double e_sparse(const AlignmentParams& x, const std::vector<Frame>& frames,
                       const CorrespondenceSet& corr) {
  double e = 0.0;
  for (const auto& pm : corr.pairs) {
    const RigidTransform& xi = x.tau[pm.i];
    const RigidTransform& xj = x.tau[pm.j];
    for (const auto& [k, l] : pm.matches)
      e += (xi.apply(frames[pm.i].features[k]) - xj.apply(frames[pm.j].features[l])).squaredNorm();
  }
  return e;
}

/// Photometric energy: source intensities against bilinear resamples of the
/// target image at the reprojected pixel.
inline DenseEnergy e_photo(const AlignmentParams& x, const std::vector<Frame>& frames,
                           const std::vector<std::pair<int, int>>& pairs, double min_depth = 1e-6) {
  DenseEnergy e;
  for (const auto& [i, j] : pairs) {
    const RigidTransform rel = compose(x.tau[j].inverse(), x.tau[i]);
    const Frame& fi = frames[i];
    const Frame& fj = frames[j];
    for (int v = 0; v < fi.cam.height; ++v) {
      for (int u = 0; u < fi.cam.width; ++u) {
        const double di = fi.depth(v, u);
        if (di <= 0.0) {
          ++e.skipped;
          continue;
        }
        const Vec3 m = rel.apply(back_project(fi.cam, {static_cast<double>(u), static_cast<double>(v)}, di));
        if (m.z() < min_depth) {
          ++e.skipped;
          continue;
        }
        const Eigen::Vector2d uv = project(fj.cam, m);
        const BilinearSample s = sample_bilinear(fj.image, uv.x(), uv.y());
        if (!s.valid) {
          ++e.skipped;
          continue;
        }
        const double r = fi.image(v, u) - s.value;
        e.value += r * r;
        ++e.used;
      }
    }
  }
  return e;
}

/// Point-to-plane geometric energy: each source point against the target
/// surface point back-projected from the interpolated target depth, measured
/// along the source normal.
inline DenseEnergy e_geo(const AlignmentParams& x, const std::vector<Frame>& frames,
                         const std::vector<std::pair<int, int>>& pairs, double min_depth = 1e-6) {
  DenseEnergy e;
  for (const auto& [i, j] : pairs) {
    const RigidTransform rel = compose(x.tau[j].inverse(), x.tau[i]);
    const RigidTransform back = compose(x.tau[i].inverse(), x.tau[j]);
    const Frame& fi = frames[i];
    const Frame& fj = frames[j];
    for (int v = 0; v < fi.cam.height; ++v) {
      for (int u = 0; u < fi.cam.width; ++u) {
        const double di = fi.depth(v, u);
        if (di <= 0.0) {
          ++e.skipped;
          continue;
        }
        const Vec3 d = back_project(fi.cam, {static_cast<double>(u), static_cast<double>(v)}, di);
        const Vec3 m = rel.apply(d);
        if (m.z() < min_depth) {
          ++e.skipped;
          continue;
        }
        const Eigen::Vector2d uv = project(fj.cam, m);
        if (!detail::depth_cell_valid(fj.depth, uv.x(), uv.y())) {
          ++e.skipped;
          continue;
        }
        const BilinearSample sd = sample_bilinear(fj.depth, uv.x(), uv.y());
        const Vec3 dir((uv.x() - fj.cam.cx) / fj.cam.fx, (uv.y() - fj.cam.cy) / fj.cam.fy, 1.0);
        const Vec3 w = back.apply(sd.value * dir);
        const double r = fi.normal_at(u, v).dot(d - w);
        e.value += r * r;
        ++e.used;
      }
    }
  }
  return e;
}

/// Stacked residuals with per-row weights and (optionally) the analytic
/// Jacobian with respect to the 6(F-1) increment parameters of frames 1..F-1
/// (world translation first, then a local axis-angle rotation increment
/// composed onto R from the right). Row order is deterministic: sparse
/// correspondences in pair-then-match order, then per dense pair the photo
/// rows and geo rows in pixel row-major order.
struct AlignmentSystem {
  VecX residuals;
  VecX row_weights;
  MatX jacobian;  // empty unless requested
  double sparse = 0.0;
  double photo = 0.0;
  double geo = 0.0;
  int photo_used = 0;
  int photo_skipped = 0;
  int geo_used = 0;
  int geo_skipped = 0;

  double total(const EnergyWeights& w, double dense_weight) const {
    return w.sparse * sparse + dense_weight * (w.photo * photo + w.geo * geo);
  }
};

inline AlignmentSystem assemble_alignment(const AlignmentParams& x, const std::vector<Frame>& frames,
                                          const CorrespondenceSet& corr,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          const EnergyWeights& w, double dense_weight,
                                          bool with_jacobian, double min_depth = 1e-6) {
  const int dof = 6 * (static_cast<int>(frames.size()) - 1);
  std::vector<double> res, wts;
  std::vector<Eigen::RowVectorXd> rows;
  AlignmentSystem sys;

  auto push = [&](double r, double wt, const Eigen::RowVectorXd& jrow) {
    res.push_back(r);
    wts.push_back(wt);
    if (with_jacobian) rows.push_back(jrow);
  };
  // parameter columns of frame f start at 6(f-1); frame 0 is fixed
  auto col0 = [](int f) { return 6 * (f - 1); };

  if (w.sparse > 0.0) {
    for (const auto& pm : corr.pairs) {
      const RigidTransform& xi = x.tau[pm.i];
      const RigidTransform& xj = x.tau[pm.j];
      for (const auto& [k, l] : pm.matches) {
        const Vec3 pi = frames[pm.i].features[k];
        const Vec3 pj = frames[pm.j].features[l];
        const Vec3 r = xi.apply(pi) - xj.apply(pj);
        sys.sparse += r.squaredNorm();
        Eigen::Matrix<double, 3, Eigen::Dynamic> j;
        if (with_jacobian) {
          j.setZero(3, dof);
          if (pm.i > 0) {
            j.middleCols(col0(pm.i), 3) = Mat3::Identity();
            j.middleCols(col0(pm.i) + 3, 3) = -xi.R * detail::hat(pi);
          }
          if (pm.j > 0) {
            j.middleCols(col0(pm.j), 3) = -Mat3::Identity();
            j.middleCols(col0(pm.j) + 3, 3) = xj.R * detail::hat(pj);
          }
        }
        for (int a = 0; a < 3; ++a)
          push(r[a], w.sparse, with_jacobian ? Eigen::RowVectorXd(j.row(a)) : Eigen::RowVectorXd());
      }
    }
  }

  const bool dense = dense_weight > 0.0 && (w.photo > 0.0 || w.geo > 0.0);
  if (dense) {
    for (const auto& [i, j] : pairs) {
      const RigidTransform& xi = x.tau[i];
      const RigidTransform& xj = x.tau[j];
      const RigidTransform rel = compose(xj.inverse(), xi);
      const RigidTransform back = compose(xi.inverse(), xj);
      const Frame& fi = frames[i];
      const Frame& fj = frames[j];
      for (int v = 0; v < fi.cam.height; ++v) {
        for (int u = 0; u < fi.cam.width; ++u) {
          const double di = fi.depth(v, u);
          bool ok = di > 0.0;
          Vec3 d = Vec3::Zero(), m = Vec3::Zero();
          Eigen::Vector2d uv = Eigen::Vector2d::Zero();
          if (ok) {
            d = back_project(fi.cam, {static_cast<double>(u), static_cast<double>(v)}, di);
            m = rel.apply(d);
            ok = m.z() >= min_depth;
          }
          if (ok) uv = project(fj.cam, m);

          // dm/dparams is shared by the photo and geo chains
          Eigen::Matrix<double, 3, Eigen::Dynamic> dm;
          Eigen::Matrix<double, 2, 3> jp;
          if (ok && with_jacobian) {
            dm.setZero(3, dof);
            if (i > 0) {
              dm.middleCols(col0(i), 3) = xj.R.transpose();
              dm.middleCols(col0(i) + 3, 3) = -xj.R.transpose() * xi.R * detail::hat(d);
            }
            if (j > 0) {
              dm.middleCols(col0(j), 3) = -xj.R.transpose();
              dm.middleCols(col0(j) + 3, 3) = detail::hat(m);
            }
            jp = detail::project_jacobian(fj.cam, m);
          }

          if (w.photo > 0.0) {
            const BilinearSample s = ok ? sample_bilinear(fj.image, uv.x(), uv.y()) : BilinearSample{};
            if (s.valid) {
              const double r = fi.image(v, u) - s.value;
              sys.photo += r * r;
              ++sys.photo_used;
              Eigen::RowVectorXd jrow;
              if (with_jacobian) jrow = -(s.grad.transpose() * jp) * dm;
              push(r, dense_weight * w.photo, jrow);
            } else {
              ++sys.photo_skipped;
            }
          }

          if (w.geo > 0.0) {
            if (ok && detail::depth_cell_valid(fj.depth, uv.x(), uv.y())) {
              const BilinearSample sd = sample_bilinear(fj.depth, uv.x(), uv.y());
              const Vec3 dir((uv.x() - fj.cam.cx) / fj.cam.fx, (uv.y() - fj.cam.cy) / fj.cam.fy, 1.0);
              const Vec3 b = sd.value * dir;
              const Vec3 wp = back.apply(b);
              const Vec3 n = fi.normal_at(u, v);
              const double r = n.dot(d - wp);
              sys.geo += r * r;
              ++sys.geo_used;
              Eigen::RowVectorXd jrow;
              if (with_jacobian) {
                Eigen::Matrix<double, 3, Eigen::Dynamic> dw;
                dw.setZero(3, dof);
                if (i > 0) {
                  dw.middleCols(col0(i), 3) = -xi.R.transpose();
                  dw.middleCols(col0(i) + 3, 3) = detail::hat(wp);
                }
                if (j > 0) {
                  dw.middleCols(col0(j), 3) = xi.R.transpose();
                  dw.middleCols(col0(j) + 3, 3) = -back.R * detail::hat(b);
                }
                // target point moves with the reprojected pixel as well
                Eigen::Matrix<double, 3, 2> db;
                db.col(0) = dir * sd.grad.x();
                db.col(1) = dir * sd.grad.y();
                db(0, 0) += sd.value / fj.cam.fx;
                db(1, 1) += sd.value / fj.cam.fy;
                dw += back.R * db * jp * dm;
                jrow = -n.transpose() * dw;
              }
              push(r, dense_weight * w.geo, jrow);
            } else {
              ++sys.geo_skipped;
            }
          }
        }
      }
    }
  }

  const int n = static_cast<int>(res.size());
  sys.residuals.setZero(n);
  sys.row_weights.setZero(n);
  if (with_jacobian) sys.jacobian.setZero(n, dof);
  for (int r = 0; r < n; ++r) {
    sys.residuals[r] = res[r];
    sys.row_weights[r] = wts[r];
    if (with_jacobian) sys.jacobian.row(r) = rows[r];
  }
  return sys;
}

/// Apply one stacked increment (frames 1..F-1, translation then rotation) to
/// the transforms. The rotation update is composed on the right and the
/// result re-orthonormalized through a quaternion round trip.
inline AlignmentParams apply_alignment_increment(const AlignmentParams& x, const VecX& delta) {
  AlignmentParams out = x;
  for (size_t f = 1; f < x.tau.size(); ++f) {
    const auto seg = delta.segment(6 * (static_cast<int>(f) - 1), 6);
    out.tau[f].t += seg.head<3>();
    const Mat3 r = out.tau[f].R * quat_exp(seg.tail<3>()).toRotationMatrix();
    out.tau[f].R = Quat(r).normalized().toRotationMatrix();
  }
  return out;
}

struct AlignmentConfig {
  EnergyWeights weights;
  int max_iterations = 60;
  double rel_tol = 1e-10;
  double step_tol = 1e-12;  // accepted increments below this norm are a fixed point
  int max_step_halvings = 30;
  double min_depth = 1e-6;
};

struct AlignmentIterate {
  int iteration = 0;
  double dense_weight = 0.0;
  double sparse = 0.0;
  double photo = 0.0;
  double geo = 0.0;
  double total = 0.0;
  double step_norm = 0.0;
  int photo_skipped = 0;
  int geo_skipped = 0;
};

struct AlignmentResult {
  AlignmentParams params;
  std::vector<AlignmentIterate> trace;
  bool converged = false;
};

/// Damped Gauss-Newton over all frame transforms with frame 0 held at
/// identity. Steps that would increase the current objective are halved until
/// they do not; convergence is declared once the dense weight has finished
/// ramping and the relative energy decrease falls below rel_tol.
inline AlignmentResult gauss_newton_align(const std::vector<Frame>& frames,
                                          const CorrespondenceSet& corr, AlignmentParams initial,
                                          const AlignmentConfig& cfg) {
  if (frames.size() < 2) throw std::invalid_argument("alignment needs at least two frames");
  if (initial.tau.size() != frames.size())
    throw std::invalid_argument("alignment: one transform per frame required");
  cfg.weights.validate();
  corr.validate(frames);
  initial.validate();
  if ((initial.tau[0].R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-12 ||
      initial.tau[0].t.norm() > 1e-12)
    throw std::invalid_argument("alignment: frame 0 is the gauge and must start at identity");

  const auto pairs = consecutive_pairs(frames.size());
  const bool dense = cfg.weights.dense_active();
  bool have_sparse = false;
  for (const auto& pm : corr.pairs) have_sparse = have_sparse || !pm.matches.empty();
  if (!(cfg.weights.sparse > 0.0 && have_sparse) && !dense)
    throw std::invalid_argument("alignment: no active energy term");

  AlignmentResult out;
  out.params = std::move(initial);

  for (int it = 0; it < cfg.max_iterations; ++it) {
    const double wd = dense ? cfg.weights.dense_weight(it) : 0.0;
    const AlignmentSystem sys = assemble_alignment(out.params, frames, corr, pairs, cfg.weights, wd,
                                                   true, cfg.min_depth);
    const double e0 = sys.total(cfg.weights, wd);
    const MatX jw = sys.row_weights.asDiagonal() * sys.jacobian;
    const MatX h = sys.jacobian.transpose() * jw;
    const VecX g = jw.transpose() * sys.residuals;
    Eigen::LDLT<MatX> ldlt(h);
    const VecX delta = ldlt.solve(-g);
    const double pivot_scale = std::max(1.0, ldlt.vectorD().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || !delta.allFinite() ||
        ldlt.vectorD().minCoeff() <= 1e-12 * pivot_scale ||
        (h * delta + g).norm() > 1e-6 * std::max(1.0, g.norm()))
      throw NumericError(
          "alignment: singular normal equations (insufficient correspondences or dense "
          "coverage to constrain every frame)");

    // step halving keeps the objective non-increasing at this dense weight
    double scale = 1.0;
    bool accepted = false;
    AlignmentParams cand;
    AlignmentSystem cand_sys;
    for (int half = 0; half <= cfg.max_step_halvings; ++half) {
      cand = apply_alignment_increment(out.params, scale * delta);
      cand_sys = assemble_alignment(cand, frames, corr, pairs, cfg.weights, wd, false, cfg.min_depth);
      if (cand_sys.total(cfg.weights, wd) <= e0) {
        accepted = true;
        break;
      }
      scale *= 0.5;
    }

    AlignmentIterate row;
    row.iteration = it;
    row.dense_weight = wd;
    const AlignmentSystem& fin = accepted ? cand_sys : sys;
    row.sparse = fin.sparse;
    row.photo = fin.photo;
    row.geo = fin.geo;
    row.total = fin.total(cfg.weights, wd);
    row.step_norm = accepted ? scale * delta.norm() : 0.0;
    row.photo_skipped = fin.photo_skipped;
    row.geo_skipped = fin.geo_skipped;
    out.trace.push_back(row);
    if (accepted) out.params = std::move(cand);

    // during the ramp the objective changes between iterations, so a small
    // decrease there says nothing about convergence yet
    const bool ramp_done = !dense || it >= cfg.weights.dense_ramp_iterations;
    const double decrease = e0 - row.total;
    if (ramp_done &&
        (decrease <= cfg.rel_tol * std::max(e0, 1e-300) || row.step_norm <= cfg.step_tol)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

inline const std::vector<std::string>& alignment_report_columns() {
  static const std::vector<std::string> cols = {
      "iteration", "dense_weight", "e_sparse", "e_photo", "e_geo",
      "total",     "step_norm",    "photo_skipped", "geo_skipped"};
  return cols;
}

inline void write_alignment_report_csv(const std::string& path,
                                       const std::vector<AlignmentIterate>& trace) {
  CsvWriter w(path, alignment_report_columns());
  for (const auto& r : trace)
    w.row({static_cast<double>(r.iteration), r.dense_weight, r.sparse, r.photo, r.geo, r.total,
           r.step_norm, static_cast<double>(r.photo_skipped), static_cast<double>(r.geo_skipped)});
}

/// Dense pixel flow with one 2-vector per pixel, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector2d> v;

  const Eigen::Vector2d& at(int u, int vv) const { return v[static_cast<size_t>(vv) * width + u]; }
  Eigen::Vector2d& at(int u, int vv) { return v[static_cast<size_t>(vv) * width + u]; }

  void validate() const {
    if (width < 1 || height < 1 || v.size() != static_cast<size_t>(width) * height)
      throw std::invalid_argument("flow field: storage disagrees with dimensions");
  }
};

/// Plausibility mask for a flow field: a vector is an inlier when its
/// magnitude is within abs_threshold and it deviates from the componentwise
/// median of its 8-neighborhood by at most rel_threshold times the median's
/// magnitude. Border pixels use the neighbors that exist.
inline std::vector<std::uint8_t> motion_bounds_filter(const FlowField& flow, double abs_threshold = 30.0,
                                                      double rel_threshold = 3.0) {
  flow.validate();
  if (!(abs_threshold > 0.0) || !(rel_threshold > 0.0))
    throw std::invalid_argument("motion bounds thresholds must be > 0");
  std::vector<std::uint8_t> mask(flow.v.size(), 1);
  std::vector<double> xs, ys;
  for (int vv = 0; vv < flow.height; ++vv) {
    for (int u = 0; u < flow.width; ++u) {
      const Eigen::Vector2d& f = flow.at(u, vv);
      if (f.norm() > abs_threshold) {
        mask[static_cast<size_t>(vv) * flow.width + u] = 0;
        continue;
      }
      xs.clear();
      ys.clear();
      for (int dv = -1; dv <= 1; ++dv) {
        for (int du = -1; du <= 1; ++du) {
          if (du == 0 && dv == 0) continue;
          const int uu = u + du, vn = vv + dv;
          if (uu < 0 || uu >= flow.width || vn < 0 || vn >= flow.height) continue;
          xs.push_back(flow.at(uu, vn).x());
          ys.push_back(flow.at(uu, vn).y());
        }
      }
      Eigen::Vector2d med = f;
      if (!xs.empty()) {
        auto median = [](std::vector<double>& s) {
          const size_t mid = s.size() / 2;
          std::nth_element(s.begin(), s.begin() + mid, s.end());
          double hi = s[mid];
          if (s.size() % 2 == 0) {
            std::nth_element(s.begin(), s.begin() + mid - 1, s.end());
            return 0.5 * (hi + s[mid - 1]);
          }
          return hi;
        };
        med = {median(xs), median(ys)};
      }
      if ((f - med).norm() > rel_threshold * std::max(med.norm(), 1e-12))
        mask[static_cast<size_t>(vv) * flow.width + u] = 0;
    }
  }
  return mask;
}

} // namespace sfuse
