#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "c3dr/geometry.hpp"

namespace c3dr {

struct RenderOptions {
  double near_plane = 1e-3;
  // Screen positions are snapped to 1/subpixel_steps of a pixel for coverage tests.
  int subpixel_steps = 256;
};

namespace detail {

struct ClipVertex {
  Vec3 cam;      // camera-space position
  bool boundary; // edge starting at this vertex is a mesh boundary or clip edge
};

// Edge function: positive when p is to one side of a->b.
inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (px - ax) * (by - ay) - (py - ay) * (bx - ax);
}

// Tie-break for pixel centers exactly on a shared edge. Antisymmetric in the edge direction,
// so a shared edge is owned by exactly one of its two triangles.
inline bool owns_edge(double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  return dy < 0.0 || (dy == 0.0 && dx > 0.0);
}

struct Raster {
  std::vector<double> zbuf;
  DepthMap depth;
  Mask mask;
  std::vector<int> triangle;
};

inline void draw_triangle(const CameraModel& cam, const RenderOptions& opt,
                          const std::array<Vec3, 3>& c, const std::array<bool, 3>& inclusive,
                          int tri_id, Raster& out) {
  double sx[3], sy[3], qx[3], qy[3], inv_z[3];
  const double steps = opt.subpixel_steps;
  for (int i = 0; i < 3; ++i) {
    inv_z[i] = 1.0 / c[i].z();
    sx[i] = cam.fx * c[i].x() * inv_z[i] + cam.cx;
    sy[i] = cam.fy * c[i].y() * inv_z[i] + cam.cy;
    qx[i] = std::round(sx[i] * steps) / steps;
    qy[i] = std::round(sy[i] * steps) / steps;
  }
  int i0 = 0, i1 = 1, i2 = 2;
  double area = edge_fn(qx[0], qy[0], qx[1], qy[1], qx[2], qy[2]);
  if (area == 0.0) return;
  if (area < 0.0) {
    std::swap(i1, i2);
    area = -area;
  }
  // edge k is opposite vertex k: (i1,i2), (i2,i0), (i0,i1)
  const int ea[3] = {i1, i2, i0};
  const int eb[3] = {i2, i0, i1};
  bool incl[3];
  for (int k = 0; k < 3; ++k) {
    // inclusive[] is indexed by the edge's starting vertex in the original winding
    const int a = ea[k], b = eb[k];
    const bool boundary = ((a + 1) % 3 == b) ? inclusive[a] : inclusive[b];
    incl[k] = boundary || owns_edge(qx[a], qy[a], qx[b], qy[b]);
  }

  const double exact_area = edge_fn(sx[i0], sy[i0], sx[i1], sy[i1], sx[i2], sy[i2]);
  const int x_lo = std::max(0, static_cast<int>(std::ceil(std::min({qx[0], qx[1], qx[2]}))));
  const int x_hi =
      std::min(cam.width - 1, static_cast<int>(std::floor(std::max({qx[0], qx[1], qx[2]}))));
  const int y_lo = std::max(0, static_cast<int>(std::ceil(std::min({qy[0], qy[1], qy[2]}))));
  const int y_hi =
      std::min(cam.height - 1, static_cast<int>(std::floor(std::max({qy[0], qy[1], qy[2]}))));

  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      bool inside = true;
      for (int k = 0; k < 3 && inside; ++k) {
        const double w = edge_fn(qx[ea[k]], qy[ea[k]], qx[eb[k]], qy[eb[k]], x, y);
        inside = w > 0.0 || (w == 0.0 && incl[k]);
      }
      if (!inside) continue;
      // Perspective-correct depth from unsnapped positions: 1/z is affine in screen space.
      double l0 = edge_fn(sx[i1], sy[i1], sx[i2], sy[i2], x, y) / exact_area;
      double l1 = edge_fn(sx[i2], sy[i2], sx[i0], sy[i0], x, y) / exact_area;
      double l2 = 1.0 - l0 - l1;
      if (!std::isfinite(l0) || !std::isfinite(l1)) {
        l0 = l1 = l2 = 1.0 / 3.0;
      }
      const double iz = l0 * inv_z[i0] + l1 * inv_z[i1] + l2 * inv_z[i2];
      if (!(iz > 0.0)) continue;
      const double z = 1.0 / iz;
      const std::size_t idx = static_cast<std::size_t>(y) * cam.width + x;
      if (z < out.zbuf[idx]) {
        out.zbuf[idx] = z;
        out.depth.values[idx] = static_cast<float>(z);
        out.mask.bits[idx] = 1;
        out.triangle[idx] = tri_id;
      }
    }
  }
}

}  // namespace detail

struct RenderResult {
  DepthMap depth;
  Mask mask;
  std::vector<int> triangle;  // triangle index per pixel, -1 where empty
};

// Z-buffered perspective rasterization of pose(mesh) under `cam`. A pixel is covered when its
// center lies inside the projected triangle; centers on an edge shared by two triangles go to
// exactly one of them, centers on a boundary edge are covered.
inline RenderResult rasterize(const TriMesh& mesh, const SimilarityTransform& pose,
                              const CameraModel& cam, const RenderOptions& opt = {}) {
  detail::Raster r{std::vector<double>(static_cast<std::size_t>(cam.width) * cam.height,
                                       std::numeric_limits<double>::infinity()),
                   DepthMap(cam.width, cam.height), Mask(cam.width, cam.height),
                   std::vector<int>(static_cast<std::size_t>(cam.width) * cam.height, -1)};

  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }

  std::vector<Vec3> cam_pts(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    cam_pts[i] = cam.to_camera(pose.apply(mesh.vertices[i]));

  const double near = opt.near_plane;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    std::array<detail::ClipVertex, 3> in;
    int behind = 0;
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      in[k] = {cam_pts[tri[k]], edge_use[{std::min(a, b), std::max(a, b)}] == 1};
      behind += in[k].cam.z() <= near;
    }
    if (behind == 3) continue;
    if (behind == 0) {
      detail::draw_triangle(cam, opt, {in[0].cam, in[1].cam, in[2].cam},
                            {in[0].boundary, in[1].boundary, in[2].boundary},
                            static_cast<int>(t), r);
      continue;
    }
    // Clip the polygon against z = near.
    std::vector<detail::ClipVertex> poly;
    for (int k = 0; k < 3; ++k) {
      const auto& a = in[k];
      const auto& b = in[(k + 1) % 3];
      const bool a_in = a.cam.z() > near;
      const bool b_in = b.cam.z() > near;
      if (a_in) poly.push_back(a);
      if (a_in != b_in) {
        const double s = (near - a.cam.z()) / (b.cam.z() - a.cam.z());
        Vec3 p = a.cam + s * (b.cam - a.cam);
        p.z() = near;
        // leaving the visible half-space starts a clip edge
        poly.push_back({p, a_in ? true : a.boundary});
      }
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const bool e0 = k == 1 ? poly[0].boundary : false;
      const bool e2 = k + 2 == poly.size() ? poly[k + 1].boundary : false;
      detail::draw_triangle(cam, opt, {poly[0].cam, poly[k].cam, poly[k + 1].cam},
                            {e0, poly[k].boundary, e2}, static_cast<int>(t), r);
    }
  }
  return {std::move(r.depth), std::move(r.mask), std::move(r.triangle)};
}

inline std::pair<DepthMap, Mask> render_depth_mask(const TriMesh& mesh,
                                                   const SimilarityTransform& pose,
                                                   const CameraModel& cam,
                                                   const RenderOptions& opt = {}) {
  auto r = rasterize(mesh, pose, cam, opt);
  return {std::move(r.depth), std::move(r.mask)};
}

struct MaskIou {
  double value = 0.0;
  bool both_empty = false;
};

// |a ∧ b| / |a ∨ b|; two empty masks give 0 with the flag set.
inline MaskIou mask_iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height)
    throw ArgumentError("mask_iou: dimension mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool x = a.bits[i] != 0, y = b.bits[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  if (uni == 0) return {0.0, true};
  return {static_cast<double>(inter) / static_cast<double>(uni), false};
}

}  // namespace c3dr
