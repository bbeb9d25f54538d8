#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sfuse/csv.hpp"
#include "sfuse/jsonio.hpp"
#include "sfuse/pose.hpp"
#include "sfuse/rng.hpp"
#include "sfuse/types.hpp"

namespace sfuse {

struct CameraIntrinsics {
  double fx = 60.0;
  double fy = 60.0;
  double cx = 31.5;
  double cy = 31.5;
  int width = 64;
  int height = 64;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: focal lengths must be > 0");
    if (width < 2 || height < 2) throw std::invalid_argument("intrinsics: image must be at least 2x2");
    if (!std::isfinite(cx) || !std::isfinite(cy))
      throw std::invalid_argument("intrinsics: principal point must be finite");
  }
};

/// Pinhole projection of a camera-frame point (z > 0) to pixel coordinates.
inline Eigen::Vector2d project(const CameraIntrinsics& c, const Vec3& p) {
  return {c.fx * p.x() / p.z() + c.cx, c.fy * p.y() / p.z() + c.cy};
}

/// Back-projection of a pixel to the camera-frame point at the given depth
/// (depth is the camera-frame z coordinate, not the ray length).
inline Vec3 back_project(const CameraIntrinsics& c, const Eigen::Vector2d& uv, double depth) {
  return {depth * (uv.x() - c.cx) / c.fx, depth * (uv.y() - c.cy) / c.fy, depth};
}

/// One rendered view. Images are (row = v, col = u); depth hold the
/// camera-frame z per pixel with values <= 0 marking pixels without geometry.
/// Normals are camera-frame unit vectors per depth pixel, row-major.
struct Frame {
  int index = 0;
  CameraIntrinsics cam;
  std::vector<Vec3> features;  // camera-frame 3D feature points
  Eigen::MatrixXd image;
  Eigen::MatrixXd depth;
  std::vector<Vec3> normals;

  const Vec3& normal_at(int u, int v) const { return normals[static_cast<size_t>(v) * cam.width + u]; }

  void validate() const {
    cam.validate();
    if (image.rows() != cam.height || image.cols() != cam.width)
      throw std::invalid_argument("frame: image dimensions disagree with intrinsics");
    if (depth.rows() != image.rows() || depth.cols() != image.cols())
      throw std::invalid_argument("frame: image and depth grids must share dimensions");
    if (normals.size() != static_cast<size_t>(image.size()))
      throw std::invalid_argument("frame: one normal per depth pixel required");
    for (int v = 0; v < cam.height; ++v)
      for (int u = 0; u < cam.width; ++u)
        if (depth(v, u) > 0.0 && std::abs(normal_at(u, v).norm() - 1.0) > 1e-9)
          throw std::invalid_argument("frame: normals must be unit length");
  }
};

/// Matches between feature indices of two frames.
struct FramePairMatches {
  int i = 0;
  int j = 0;
  std::vector<std::pair<int, int>> matches;  // (feature index in i, in j)
};

struct CorrespondenceSet {
  std::vector<FramePairMatches> pairs;

  void validate(const std::vector<Frame>& frames) const {
    const int n = static_cast<int>(frames.size());
    for (const auto& p : pairs) {
      if (p.i < 0 || p.i >= n || p.j < 0 || p.j >= n)
        throw std::invalid_argument("correspondences: frame index out of range");
      for (const auto& [k, l] : p.matches) {
        if (k < 0 || k >= static_cast<int>(frames[p.i].features.size()) ||
            l < 0 || l >= static_cast<int>(frames[p.j].features.size()))
          throw std::invalid_argument("correspondences: feature index out of range");
      }
    }
  }
};

/// Bilinear sample of a grid at fractional pixel coordinates with the exact
/// in-cell gradient. Valid on [0, W-1] x [0, H-1]; coordinates exactly on the
/// far edge use the last cell so the gradient stays defined.
struct BilinearSample {
  double value = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();  // d/du, d/dv
  bool valid = false;
};

inline BilinearSample sample_bilinear(const Eigen::MatrixXd& g, double u, double v) {
  BilinearSample out;
  const int w = static_cast<int>(g.cols());
  const int h = static_cast<int>(g.rows());
  if (!(u >= 0.0) || !(v >= 0.0) || !(u <= w - 1.0) || !(v <= h - 1.0)) return out;
  int u0 = static_cast<int>(std::floor(u));
  int v0 = static_cast<int>(std::floor(v));
  if (u0 > w - 2) u0 = w - 2;
  if (v0 > h - 2) v0 = h - 2;
  const double a = u - u0;
  const double b = v - v0;
  const double g00 = g(v0, u0), g10 = g(v0, u0 + 1), g01 = g(v0 + 1, u0), g11 = g(v0 + 1, u0 + 1);
  out.value = (1.0 - a) * (1.0 - b) * g00 + a * (1.0 - b) * g10 + (1.0 - a) * b * g01 + a * b * g11;
  out.grad.x() = (1.0 - b) * (g10 - g00) + b * (g11 - g01);
  out.grad.y() = (1.0 - a) * (g01 - g00) + a * (g11 - g10);
  out.valid = true;
  return out;
}

/// Smooth seeded texture: a fixed sum of sinusoids over world coordinates.
/// Wavelengths sit well above the pixel footprint of the default cameras so
/// bilinear resampling of a rendered grid stays faithful.
struct ProceduralTexture {
  std::vector<Vec3> wavevec;
  std::vector<double> amplitude;
  std::vector<double> phase;

  static ProceduralTexture make(std::uint64_t seed, int terms = 6, double min_freq = 25.0,
                                double max_freq = 90.0) {
    ProceduralTexture t;
    RngStream rng(seed, 0x54455854ULL, 0, 0);
    for (int m = 0; m < terms; ++m) {
      const Vec3 dir = rng.unit_sphere();
      const double f = min_freq + (max_freq - min_freq) * rng.uniform();
      t.wavevec.push_back(f * dir);
      t.amplitude.push_back(0.5 / terms);
      t.phase.push_back(2.0 * M_PI * rng.uniform());
    }
    return t;
  }

  static ProceduralTexture constant() { return ProceduralTexture{}; }

  double operator()(const Vec3& p) const {
    double s = 0.5;
    for (size_t m = 0; m < wavevec.size(); ++m)
      s += amplitude[m] * std::sin(wavevec[m].dot(p) + phase[m]);
    return s;
  }
};

/// World geometry the synthetic views observe.
struct SceneGeometry {
  enum class Kind { plane, sphere };
  Kind kind = Kind::plane;
  Vec3 plane_point = Vec3(0.0, 0.0, 0.4);
  Vec3 plane_normal = Vec3(0.0, 0.0, -1.0);  // faces the default camera at the origin
  Vec3 sphere_center = Vec3(0.0, 0.0, 0.5);
  double sphere_radius = 0.25;

  static SceneGeometry plane(const Vec3& point, const Vec3& normal) {
    SceneGeometry g;
    g.kind = Kind::plane;
    g.plane_point = point;
    g.plane_normal = normal.normalized();
    return g;
  }

  static SceneGeometry sphere(const Vec3& center, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("scene: sphere radius must be > 0");
    SceneGeometry g;
    g.kind = Kind::sphere;
    g.sphere_center = center;
    g.sphere_radius = radius;
    return g;
  }

  /// Smallest positive ray parameter and outward world normal at the hit.
  /// Rays are origin + t * dir with unnormalized dir, so for camera rays with
  /// dir.z() == 1 the parameter equals the pinhole depth.
  bool ray_hit(const Vec3& origin, const Vec3& dir, double* t_hit, Vec3* normal_world) const {
    if (kind == Kind::plane) {
      const double denom = plane_normal.dot(dir);
      if (std::abs(denom) < 1e-12) return false;
      const double t = plane_normal.dot(plane_point - origin) / denom;
      if (t <= 1e-9) return false;
      *t_hit = t;
      *normal_world = denom < 0.0 ? plane_normal : Vec3(-plane_normal);
      return true;
    }
    const Vec3 oc = origin - sphere_center;
    const double a = dir.squaredNorm();
    const double b = 2.0 * oc.dot(dir);
    const double c = oc.squaredNorm() - sphere_radius * sphere_radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return false;
    const double root = std::sqrt(disc);
    double t = (-b - root) / (2.0 * a);
    if (t <= 1e-9) t = (-b + root) / (2.0 * a);
    if (t <= 1e-9) return false;
    *t_hit = t;
    *normal_world = (origin + t * dir - sphere_center).normalized();
    return true;
  }
};

/// Render one view of the geometry. cam_to_world maps camera coordinates to
/// world coordinates. Pixels that miss the geometry get depth 0 (invalid), a
/// placeholder normal and zero intensity.
inline Frame render_frame(int index, const SceneGeometry& geo, const ProceduralTexture& tex,
                          const CameraIntrinsics& cam, const Pose6D& cam_to_world) {
  cam.validate();
  Frame f;
  f.index = index;
  f.cam = cam;
  f.image = Eigen::MatrixXd::Zero(cam.height, cam.width);
  f.depth = Eigen::MatrixXd::Zero(cam.height, cam.width);
  f.normals.assign(static_cast<size_t>(cam.height) * cam.width, Vec3(0.0, 0.0, 1.0));
  const Mat3 r = cam_to_world.orientation.toRotationMatrix();
  const Vec3 origin = cam_to_world.position;
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const Vec3 dir_world = r * dir_cam;
      double t = 0.0;
      Vec3 n_world;
      if (!geo.ray_hit(origin, dir_world, &t, &n_world)) continue;
      const Vec3 hit_world = origin + t * dir_world;
      f.depth(v, u) = t;  // dir_cam.z == 1, so the ray parameter is the depth
      f.image(v, u) = tex(hit_world);
      f.normals[static_cast<size_t>(v) * cam.width + u] = r.transpose() * n_world;
    }
  }
  return f;
}

/// Frames plus ground-truth sparse correspondences (and which of them were
/// deliberately corrupted, for outlier-handling tests).
struct SyntheticScene {
  std::vector<Frame> frames;
  CorrespondenceSet correspondences;
  std::vector<Pose6D> camera_poses;  // ground truth, camera-to-world
  std::vector<std::pair<int, int>> planted_outliers;  // (pair index, match index)
};

/// Versioned descriptor from which a scene can be rebuilt exactly.
struct SceneDescriptor {
  int version = 1;
  std::string geometry = "plane";  // "plane" | "sphere" | "plane-constant"
  std::uint64_t texture_seed = 1;
  std::uint64_t feature_seed = 1;
  int feature_count = 60;
  int outlier_count = 0;
  double outlier_offset = 0.05;
  CameraIntrinsics cam;
  std::vector<Pose6D> camera_poses;
};

inline SceneGeometry descriptor_geometry(const SceneDescriptor& d) {
  if (d.geometry == "plane" || d.geometry == "plane-constant") return SceneGeometry{};
  if (d.geometry == "sphere") return SceneGeometry::sphere(Vec3(0.0, 0.0, 0.5), 0.25);
  throw std::invalid_argument("scene descriptor: unknown geometry '" + d.geometry + "'");
}

/// Build the frames and correspondences a descriptor specifies. Features are
/// seeded pixel back-projections from frame 0, kept only when visible in
/// every frame; correspondences are identity matches on all consecutive
/// pairs, with the requested number of planted outliers appended to the
/// target frame's feature list.
inline SyntheticScene build_scene(const SceneDescriptor& d) {
  if (d.version != 1) throw std::invalid_argument("scene descriptor: unsupported version");
  if (d.camera_poses.size() < 2) throw std::invalid_argument("scene descriptor: at least two frames");
  if (d.feature_count < 0 || d.outlier_count < 0)
    throw std::invalid_argument("scene descriptor: negative counts");
  const SceneGeometry geo = descriptor_geometry(d);
  const ProceduralTexture tex = d.geometry == "plane-constant"
                                    ? ProceduralTexture::constant()
                                    : ProceduralTexture::make(d.texture_seed);
  SyntheticScene scene;
  scene.camera_poses = d.camera_poses;
  for (size_t i = 0; i < d.camera_poses.size(); ++i)
    scene.frames.push_back(render_frame(static_cast<int>(i), geo, tex, d.cam, d.camera_poses[i]));

  // world feature points from seeded pixels of frame 0, inset from the border
  RngStream rng(d.feature_seed, 0x46454154ULL, 0, 0);
  std::vector<Vec3> world_points;
  const Mat3 r0 = d.camera_poses[0].orientation.toRotationMatrix();
  int attempts = 0;
  while (static_cast<int>(world_points.size()) < d.feature_count && attempts < 50 * d.feature_count) {
    ++attempts;
    const double u = (0.1 + 0.8 * rng.uniform()) * (d.cam.width - 1);
    const double v = (0.1 + 0.8 * rng.uniform()) * (d.cam.height - 1);
    const Vec3 dir_cam((u - d.cam.cx) / d.cam.fx, (v - d.cam.cy) / d.cam.fy, 1.0);
    double t = 0.0;
    Vec3 n;
    if (!geo.ray_hit(d.camera_poses[0].position, r0 * dir_cam, &t, &n)) continue;
    const Vec3 w = d.camera_poses[0].position + t * (r0 * dir_cam);
    bool visible = true;
    for (const auto& pose : d.camera_poses) {
      const Vec3 pc = pose.orientation.conjugate() * (w - pose.position);
      if (pc.z() < 1e-3) {
        visible = false;
        break;
      }
      const Eigen::Vector2d uv = project(d.cam, pc);
      if (uv.x() < 1.0 || uv.x() > d.cam.width - 2.0 || uv.y() < 1.0 || uv.y() > d.cam.height - 2.0) {
        visible = false;
        break;
      }
    }
    if (visible) world_points.push_back(w);
  }

  for (size_t i = 0; i < scene.frames.size(); ++i) {
    for (const Vec3& w : world_points)
      scene.frames[i].features.push_back(
          d.camera_poses[i].orientation.conjugate() * (w - d.camera_poses[i].position));
  }

  for (size_t i = 0; i + 1 < scene.frames.size(); ++i) {
    FramePairMatches pm;
    pm.i = static_cast<int>(i);
    pm.j = static_cast<int>(i + 1);
    for (int k = 0; k < static_cast<int>(world_points.size()); ++k) pm.matches.emplace_back(k, k);
    scene.correspondences.pairs.push_back(std::move(pm));
  }

  // planted outliers: corrupted copies appended to the target frame of the
  // first pair, matched against valid source features
  if (d.outlier_count > 0 && !scene.correspondences.pairs.empty() && !world_points.empty()) {
    auto& pm = scene.correspondences.pairs[0];
    Frame& target = scene.frames[pm.j];
    for (int o = 0; o < d.outlier_count; ++o) {
      const int k = static_cast<int>(rng.uniform() * world_points.size()) % world_points.size();
      Vec3 corrupted = target.features[k] + d.outlier_offset * rng.unit_sphere();
      target.features.push_back(corrupted);
      pm.matches.emplace_back(k, static_cast<int>(target.features.size()) - 1);
      scene.planted_outliers.emplace_back(0, static_cast<int>(pm.matches.size()) - 1);
    }
  }
  return scene;
}

inline void write_scene_descriptor(const std::string& path, const SceneDescriptor& d) {
  nlohmann::json j;
  j["version"] = d.version;
  j["geometry"] = d.geometry;
  j["texture_seed"] = d.texture_seed;
  j["feature_seed"] = d.feature_seed;
  j["feature_count"] = d.feature_count;
  j["outlier_count"] = d.outlier_count;
  j["outlier_offset"] = d.outlier_offset;
  j["camera"] = {{"fx", d.cam.fx},     {"fy", d.cam.fy},       {"cx", d.cam.cx},
                 {"cy", d.cam.cy},     {"width", d.cam.width}, {"height", d.cam.height}};
  j["frames"] = nlohmann::json::array();
  for (const auto& p : d.camera_poses) j["frames"].push_back(detail::pose_to_json(p));
  detail::dump_json_file(path, j, "scene descriptor");
}

inline SceneDescriptor read_scene_descriptor(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path, "scene descriptor");
  detail::require_keys(j, {"version", "geometry", "texture_seed", "feature_seed", "feature_count",
                           "outlier_count", "outlier_offset", "camera", "frames"},
                       "scene descriptor");
  SceneDescriptor d;
  d.version = j.at("version").get<int>();
  if (d.version != 1) throw std::invalid_argument("scene descriptor: unsupported version");
  d.geometry = j.at("geometry").get<std::string>();
  d.texture_seed = j.at("texture_seed").get<std::uint64_t>();
  d.feature_seed = j.at("feature_seed").get<std::uint64_t>();
  d.feature_count = j.at("feature_count").get<int>();
  d.outlier_count = j.at("outlier_count").get<int>();
  d.outlier_offset = j.at("outlier_offset").get<double>();
  const auto& cj = j.at("camera");
  detail::require_keys(cj, {"fx", "fy", "cx", "cy", "width", "height"}, "scene descriptor camera");
  d.cam.fx = cj.at("fx").get<double>();
  d.cam.fy = cj.at("fy").get<double>();
  d.cam.cx = cj.at("cx").get<double>();
  d.cam.cy = cj.at("cy").get<double>();
  d.cam.width = cj.at("width").get<int>();
  d.cam.height = cj.at("height").get<int>();
  d.cam.validate();
  for (const auto& fj : j.at("frames")) {
    detail::require_keys(fj, {"position", "quaternion"}, "scene descriptor frame");
    d.camera_poses.push_back(detail::pose_from_json(fj));
  }
  return d;
}

} // namespace sfuse
