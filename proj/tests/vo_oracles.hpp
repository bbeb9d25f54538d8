#pragma once

// Plain-loop reference implementations of the alignment energies. Transforms
// go through 4x4 homogeneous matrices (inverses via LU, not transposition
// identities) and interpolation is rewritten with scalars, so none of the
// library's transform or sampling helpers are exercised here.

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "sfuse/vo_align.hpp"

namespace oracle {

inline Eigen::Matrix4d rigid_matrix(const sfuse::RigidTransform& x) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = x.R;
  m.topRightCorner<3, 1>() = x.t;
  return m;
}

inline double vo_sparse_energy(const sfuse::AlignmentParams& x,
                               const std::vector<sfuse::Frame>& frames,
                               const sfuse::CorrespondenceSet& corr) {
  double e = 0.0;
  for (const auto& pm : corr.pairs) {
    const Eigen::Matrix4d mi = rigid_matrix(x.tau[pm.i]);
    const Eigen::Matrix4d mj = rigid_matrix(x.tau[pm.j]);
    for (const auto& [k, l] : pm.matches) {
      Eigen::Vector4d a;
      a << frames[pm.i].features[k], 1.0;
      Eigen::Vector4d b;
      b << frames[pm.j].features[l], 1.0;
      const Eigen::Vector4d d = mi * a - mj * b;
      e += d.head<3>().squaredNorm();
    }
  }
  return e;
}

struct DenseRef {
  double value = 0.0;
  int used = 0;
  int skipped = 0;
};

inline bool bilinear_ref(const Eigen::MatrixXd& g, double u, double v, double* out) {
  const int w = static_cast<int>(g.cols());
  const int h = static_cast<int>(g.rows());
  if (!(u >= 0.0 && v >= 0.0 && u <= w - 1.0 && v <= h - 1.0)) return false;
  const int u0 = std::min(static_cast<int>(u), w - 2);
  const int v0 = std::min(static_cast<int>(v), h - 2);
  const double a = u - u0;
  const double b = v - v0;
  *out = (1.0 - a) * (1.0 - b) * g(v0, u0) + a * (1.0 - b) * g(v0, u0 + 1) +
         (1.0 - a) * b * g(v0 + 1, u0) + a * b * g(v0 + 1, u0 + 1);
  return true;
}

inline DenseRef vo_photo_energy(const sfuse::AlignmentParams& x,
                                const std::vector<sfuse::Frame>& frames,
                                const std::vector<std::pair<int, int>>& pairs,
                                double min_depth = 1e-6) {
  DenseRef e;
  for (const auto& [i, j] : pairs) {
    const Eigen::Matrix4d rel = rigid_matrix(x.tau[j]).inverse() * rigid_matrix(x.tau[i]);
    const sfuse::Frame& fi = frames[i];
    const sfuse::Frame& fj = frames[j];
    for (int v = 0; v < fi.cam.height; ++v) {
      for (int u = 0; u < fi.cam.width; ++u) {
        const double dz = fi.depth(v, u);
        if (dz <= 0.0) {
          ++e.skipped;
          continue;
        }
        Eigen::Vector4d p;
        p << dz * (u - fi.cam.cx) / fi.cam.fx, dz * (v - fi.cam.cy) / fi.cam.fy, dz, 1.0;
        const Eigen::Vector4d m = rel * p;
        if (m.z() < min_depth) {
          ++e.skipped;
          continue;
        }
        const double uu = fj.cam.fx * m.x() / m.z() + fj.cam.cx;
        const double vv = fj.cam.fy * m.y() / m.z() + fj.cam.cy;
        double val = 0.0;
        if (!bilinear_ref(fj.image, uu, vv, &val)) {
          ++e.skipped;
          continue;
        }
        const double r = fi.image(v, u) - val;
        e.value += r * r;
        ++e.used;
      }
    }
  }
  return e;
}

inline DenseRef vo_geo_energy(const sfuse::AlignmentParams& x,
                              const std::vector<sfuse::Frame>& frames,
                              const std::vector<std::pair<int, int>>& pairs,
                              double min_depth = 1e-6) {
  DenseRef e;
  for (const auto& [i, j] : pairs) {
    const Eigen::Matrix4d rel = rigid_matrix(x.tau[j]).inverse() * rigid_matrix(x.tau[i]);
    const Eigen::Matrix4d back = rigid_matrix(x.tau[i]).inverse() * rigid_matrix(x.tau[j]);
    const sfuse::Frame& fi = frames[i];
    const sfuse::Frame& fj = frames[j];
    for (int v = 0; v < fi.cam.height; ++v) {
      for (int u = 0; u < fi.cam.width; ++u) {
        const double dz = fi.depth(v, u);
        if (dz <= 0.0) {
          ++e.skipped;
          continue;
        }
        Eigen::Vector4d p;
        p << dz * (u - fi.cam.cx) / fi.cam.fx, dz * (v - fi.cam.cy) / fi.cam.fy, dz, 1.0;
        const Eigen::Vector4d m = rel * p;
        if (m.z() < min_depth) {
          ++e.skipped;
          continue;
        }
        const double uu = fj.cam.fx * m.x() / m.z() + fj.cam.cx;
        const double vv = fj.cam.fy * m.y() / m.z() + fj.cam.cy;
        const int w = fj.cam.width;
        const int h = fj.cam.height;
        bool cell_ok = uu >= 0.0 && vv >= 0.0 && uu <= w - 1.0 && vv <= h - 1.0;
        double val = 0.0;
        if (cell_ok) {
          const int u0 = std::min(static_cast<int>(uu), w - 2);
          const int v0 = std::min(static_cast<int>(vv), h - 2);
          cell_ok = fj.depth(v0, u0) > 0.0 && fj.depth(v0, u0 + 1) > 0.0 &&
                    fj.depth(v0 + 1, u0) > 0.0 && fj.depth(v0 + 1, u0 + 1) > 0.0;
          if (cell_ok) bilinear_ref(fj.depth, uu, vv, &val);
        }
        if (!cell_ok) {
          ++e.skipped;
          continue;
        }
        Eigen::Vector4d b;
        b << val * (uu - fj.cam.cx) / fj.cam.fx, val * (vv - fj.cam.cy) / fj.cam.fy, val, 1.0;
        const Eigen::Vector4d wp = back * b;
        const double r = fi.normal_at(u, v).dot(p.head<3>() - wp.head<3>());
        e.value += r * r;
        ++e.used;
      }
    }
  }
  return e;
}

} // namespace oracle
