#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "c3dr/errors.hpp"

namespace c3dr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kRotationTolerance = 1e-6;

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

inline bool is_rotation(const Mat3& r, double tol = kRotationTolerance) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

// Rotation about a unit axis (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline double rotation_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

// Pinhole camera. Extrinsics map world to camera: x_cam = R * x_world + t.
// +z is camera-forward, pixel origin top-left, pixel centers at integer coordinates.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
      throw ArgumentError("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ArgumentError("camera: image size must be positive");
    if (!is_rotation(R)) throw ArgumentError("camera: extrinsic rotation is not a proper rotation");
    if (!is_finite(t)) throw ArgumentError("camera: translation not finite");
  }

  Vec3 center() const { return -R.transpose() * t; }

  Vec3 to_camera(const Vec3& world) const { return R * world + t; }

  bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1;
  }

  // Camera looking from `eye` towards `target`, with `up` roughly vertical in the image.
  static CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double f,
                             int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) right = forward.unitOrthogonal();
    right.normalize();
    // image y grows downward
    const Vec3 down = forward.cross(right);
    CameraModel cam;
    cam.R.row(0) = right.transpose();
    cam.R.row(1) = down.transpose();
    cam.R.row(2) = forward.transpose();
    cam.t = -cam.R * eye;
    cam.fx = cam.fy = f;
    cam.cx = (width - 1) / 2.0;
    cam.cy = (height - 1) / 2.0;
    cam.width = width;
    cam.height = height;
    return cam;
  }
};

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Projects a world point; depth is the camera-space z.
inline PixelDepth project(const Vec3& world, const CameraModel& cam) {
  const Vec3 c = cam.to_camera(world);
  return {cam.fx * c.x() / c.z() + cam.cx, cam.fy * c.y() / c.z() + cam.cy, c.z()};
}

inline Vec3 backproject_unchecked(double u, double v, double depth, const CameraModel& cam) {
  const Vec3 c((u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth);
  return cam.R.transpose() * (c - cam.t);
}

// Pixel + depth to world point.
inline Vec3 backproject(double u, double v, double depth, const CameraModel& cam) {
  if (!std::isfinite(depth) || !(depth > 0.0))
    throw RejectedPointError("backproject: invalid depth");
  if (!std::isfinite(u) || !std::isfinite(v) || !cam.contains(u, v))
    throw ArgumentError("backproject: pixel outside image bounds");
  return backproject_unchecked(u, v, depth, cam);
}

// Per-pixel depth in meters, row-major. 0 encodes "no depth".
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  bool valid(int x, int y) const {
    const float d = at(x, y);
    return std::isfinite(d) && d > 0.0f;
  }

  bool operator==(const DepthMap&) const = default;
};

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool on = true) {
    bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0;
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  bool empty() const { return count() == 0; }

  Mask& operator|=(const Mask& other) {
    if (other.width != width || other.height != height)
      throw ArgumentError("mask union: dimension mismatch");
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (bits[i] | other.bits[i]) ? 1 : 0;
    return *this;
  }

  bool operator==(const Mask&) const = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or one unit normal per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Vec3> colors;  // empty, or one RGB in [0,1] per vertex

  bool empty() const { return vertices.empty() || triangles.empty(); }

  void validate() const {
    const int n = static_cast<int>(vertices.size());
    for (const auto& tri : triangles)
      for (int idx : tri)
        if (idx < 0 || idx >= n) throw ArgumentError("mesh: triangle index out of range");
    if (!colors.empty() && colors.size() != vertices.size())
      throw ArgumentError("mesh: color count does not match vertex count");
    for (const auto& v : vertices)
      if (!is_finite(v)) throw ArgumentError("mesh: non-finite vertex");
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices) c += v;
    return vertices.empty() ? c : Vec3(c / static_cast<double>(vertices.size()));
  }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// Drops triangles whose area is at or below `min_area` and unreferenced vertices.
inline TriMesh clean_mesh(const TriMesh& mesh, double min_area = 1e-12) {
  TriMesh out;
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const auto& tri : mesh.triangles) {
    if (triangle_area(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]) <=
        min_area)
      continue;
    std::array<int, 3> nt{};
    for (int k = 0; k < 3; ++k) {
      int& slot = remap[tri[k]];
      if (slot < 0) {
        slot = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[tri[k]]);
        if (!mesh.colors.empty()) out.colors.push_back(mesh.colors[tri[k]]);
      }
      nt[k] = slot;
    }
    out.triangles.push_back(nt);
  }
  return out;
}

// x -> s * R * x + t
struct SimilarityTransform {
  double s = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static SimilarityTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return s * (R * x) + t; }

  // (this ∘ other)(x) = this(other(x))
  SimilarityTransform compose(const SimilarityTransform& other) const {
    return {s * other.s, R * other.R, s * (R * other.t) + t};
  }

  SimilarityTransform inverse() const {
    const Mat3 rt = R.transpose();
    return {1.0 / s, rt, -(rt * t) / s};
  }

  bool valid() const { return std::isfinite(s) && s > 0.0 && is_rotation(R) && is_finite(t); }

  void validate() const {
    if (!(std::isfinite(s) && s > 0.0)) throw ArgumentError("transform: scale must be positive");
    if (!is_rotation(R)) throw ArgumentError("transform: R is not a proper rotation");
    if (!is_finite(t)) throw ArgumentError("transform: translation not finite");
  }
};

inline TriMesh transformed(const TriMesh& mesh, const SimilarityTransform& pose) {
  TriMesh out = mesh;
  for (auto& v : out.vertices) v = pose.apply(v);
  return out;
}

// Least-squares similarity mapping `source` onto `target` (target ≈ s R source + t),
// with SVD sign correction so that det R = +1.
inline SimilarityTransform umeyama_fit(const std::vector<Vec3>& source,
                                       const std::vector<Vec3>& target) {
  if (source.size() != target.size())
    throw EstimationError("umeyama: point sets differ in length");
  const std::size_t n = source.size();
  if (n < 3) throw EstimationError("umeyama: need at least 3 pairs, got " + std::to_string(n));

  Vec3 mu_src = Vec3::Zero();
  Vec3 mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_src += source[i];
    mu_dst += target[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 a = source[i] - mu_src;
    const Vec3 b = target[i] - mu_dst;
    cov += b * a.transpose();
    var_src += a.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_src /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || !(var_src > 0.0) || sv(1) < 1e-12 * sv(0)) {
    throw EstimationError("umeyama: degenerate configuration (singular values " +
                          std::to_string(sv(0)) + ", " + std::to_string(sv(1)) + ", " +
                          std::to_string(sv(2)) + ")");
  }
  const Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  Vec3 sign(1.0, 1.0, 1.0);
  if (U.determinant() * V.determinant() < 0.0) sign(2) = -1.0;

  SimilarityTransform out;
  out.R = U * sign.asDiagonal() * V.transpose();
  out.s = sv.dot(sign) / var_src;
  out.t = mu_dst - out.s * (out.R * mu_src);
  return out;
}

inline SimilarityTransform umeyama_fit(const PointCloud& source, const PointCloud& target) {
  return umeyama_fit(source.points, target.points);
}

}  // namespace c3dr
