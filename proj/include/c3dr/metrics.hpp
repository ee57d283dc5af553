#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "c3dr/discovery.hpp"
#include "c3dr/scene.hpp"
#include "c3dr/spatial_index.hpp"

namespace c3dr {

namespace detail {

inline void require_nonempty(const PointCloud& a, const PointCloud& b, const char* what) {
  if (a.empty() || b.empty()) throw ArgumentError(std::string(what) + ": empty point cloud");
}

// Distance from every point of `from` to its nearest point in `to`.
inline std::vector<Neighbor> nearest_all(const PointCloud& from, const KdTree& to) {
  std::vector<Neighbor> out;
  out.reserve(from.size());
  for (const auto& p : from.points) out.push_back(to.nearest(p));
  return out;
}

inline double mean_distance(const std::vector<Neighbor>& nn) {
  double sum = 0.0;
  for (const auto& n : nn) sum += std::sqrt(n.squared_distance);
  return sum / static_cast<double>(nn.size());
}

inline double fraction_within(const std::vector<Neighbor>& nn, double threshold) {
  std::size_t hit = 0;
  for (const auto& n : nn) hit += std::sqrt(n.squared_distance) < threshold;
  return static_cast<double>(hit) / static_cast<double>(nn.size());
}

}  // namespace detail

inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  detail::require_nonempty(a, b, "chamfer_distance");
  const KdTree ta(a.points), tb(b.points);
  return 0.5 * (detail::mean_distance(detail::nearest_all(a, tb)) +
                detail::mean_distance(detail::nearest_all(b, ta)));
}

// Precision: fraction of a within threshold of b; recall: fraction of b within threshold of a.
inline double f_score(const PointCloud& a, const PointCloud& b, double threshold = 0.05) {
  detail::require_nonempty(a, b, "f_score");
  if (!(threshold > 0.0)) throw ArgumentError("f_score: threshold must be positive");
  const KdTree ta(a.points), tb(b.points);
  const double precision = detail::fraction_within(detail::nearest_all(a, tb), threshold);
  const double recall = detail::fraction_within(detail::nearest_all(b, ta), threshold);
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// Mean over both directions of |n_p · n_q| for nearest-neighbor pairs.
inline double normal_consistency(const PointCloud& a, const PointCloud& b) {
  detail::require_nonempty(a, b, "normal_consistency");
  if (!a.has_normals() || !b.has_normals())
    throw ArgumentError("normal_consistency: both clouds need normals");
  const KdTree ta(a.points), tb(b.points);
  auto directed = [](const PointCloud& from, const PointCloud& to, const KdTree& tree) {
    double sum = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i)
      sum += std::abs(from.normals[i].dot(to.normals[tree.nearest(from.points[i]).index]));
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b, tb) + directed(b, a, ta));
}

// Row-major, interleaved channels, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 1, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline constexpr double kPsnrCap = 99.0;

inline void check_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ArgumentError(std::string(what) + ": image dimensions differ");
  if (a.data.empty()) throw ArgumentError(std::string(what) + ": empty image");
}

// Peak 1.0; identical images report the cap.
inline double psnr(const Image& a, const Image& b) {
  check_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const double mse = se / static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

struct SsimOptions {
  int radius = 5;  // 11×11 window
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

// Gaussian-weighted SSIM with population statistics, averaged over pixels whose window lies
// entirely inside the image, then over channels.
inline double ssim(const Image& a, const Image& b, const SsimOptions& opt = {}) {
  check_same_shape(a, b, "ssim");
  const int r = opt.radius;
  if (a.width <= 2 * r || a.height <= 2 * r)
    throw ArgumentError("ssim: image smaller than the window");
  std::vector<double> g(2 * r + 1);
  double gsum = 0.0;
  for (int i = -r; i <= r; ++i) gsum += g[i + r] = std::exp(-0.5 * i * i / (opt.sigma * opt.sigma));
  for (auto& v : g) v /= gsum;
  const double c1 = (opt.k1 * opt.data_range) * (opt.k1 * opt.data_range);
  const double c2 = (opt.k2 * opt.data_range) * (opt.k2 * opt.data_range);

  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = r; y < a.height - r; ++y)
      for (int x = r; x < a.width - r; ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const double w = g[dy + r] * g[dx + r];
            const double va = a.at(x + dx, y + dy, c), vb = b.at(x + dx, y + dy, c);
            ma += w * va;
            mb += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        const double vara = aa - ma * ma, varb = bb - mb * mb, cov = ab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (vara + varb + c2));
        ++count;
      }
    total += sum / static_cast<double>(count);
  }
  return total / a.channels;
}

// Uniform doubles in [0, 1) from the top 53 bits, identical on every platform.
inline double unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct SurfaceSamples {
  PointCloud cloud;  // with unit triangle normals
  double area = 0.0;
  double spacing = 0.0;  // sqrt(area / n)
};

// Area-weighted uniform samples over every placed object's world-space surface.
inline SurfaceSamples sample_scene_surface(const SceneDescription& scene, std::size_t n,
                                           std::uint64_t seed = 0) {
  struct Tri {
    Vec3 a, b, c, normal;
  };
  std::vector<Tri> tris;
  std::vector<double> cumulative;
  double area = 0.0;
  for (const auto& o : scene.objects) {
    if (!o.mesh) throw ArgumentError("sample_scene_surface: object " + std::to_string(o.id) + " has no mesh");
    for (const auto& t : o.mesh->triangles) {
      const Vec3 a = o.pose.apply(o.mesh->vertices[t[0]]);
      const Vec3 b = o.pose.apply(o.mesh->vertices[t[1]]);
      const Vec3 c = o.pose.apply(o.mesh->vertices[t[2]]);
      const Vec3 cr = (b - a).cross(c - a);
      const double ar = 0.5 * cr.norm();
      if (!(ar > 0.0)) continue;
      tris.push_back({a, b, c, cr.normalized()});
      area += ar;
      cumulative.push_back(area);
    }
  }
  SurfaceSamples out;
  out.area = area;
  if (tris.empty() || n == 0) return out;
  out.spacing = std::sqrt(area / static_cast<double>(n));
  std::mt19937_64 rng(seed);
  out.cloud.points.reserve(n);
  out.cloud.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = unit_double(rng) * area;
    auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                      cumulative.begin());
    k = std::min(k, tris.size() - 1);
    const double r1 = std::sqrt(unit_double(rng));
    const double r2 = unit_double(rng);
    const Tri& t = tris[k];
    out.cloud.points.push_back((1 - r1) * t.a + r1 * (1 - r2) * t.b + r1 * r2 * t.c);
    out.cloud.normals.push_back(t.normal);
  }
  return out;
}

struct GeometryScore {
  double chamfer = std::numeric_limits<double>::infinity();
  double fscore = 0.0;
  double normal_consistency = 0.0;
  double spacing = 0.0;  // mean sample spacing on the ground-truth surface
  double threshold = 0.05;
  std::size_t samples = 0;
};

inline GeometryScore scene_geometry_score(const SceneDescription& pred, const SceneDescription& gt,
                                          std::size_t samples = 20000, double threshold = 0.05,
                                          std::uint64_t seed = 0) {
  if (samples < 1000) throw ArgumentError("scene_geometry_score: need at least 1000 samples");
  GeometryScore s;
  s.threshold = threshold;
  s.samples = samples;
  const auto g = sample_scene_surface(gt, samples, seed);
  if (g.cloud.empty()) throw ArgumentError("scene_geometry_score: ground truth has no surface");
  s.spacing = g.spacing;
  const auto p = sample_scene_surface(pred, samples, seed);
  if (p.cloud.empty()) return s;
  s.chamfer = chamfer_distance(p.cloud, g.cloud);
  s.fscore = f_score(p.cloud, g.cloud, threshold);
  s.normal_consistency = normal_consistency(p.cloud, g.cloud);
  return s;
}

struct CategoryScore {
  double recall = 0.0;  // Rec over canonical category sets
  double precision = 0.0;
  double instance_recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
};

inline Vec3 world_centroid(const PlacedObject& o) {
  if (!o.mesh || o.mesh->vertices.empty()) return o.pose.t;
  Vec3 c = Vec3::Zero();
  for (const auto& v : o.mesh->vertices) c += o.pose.apply(v);
  return c / static_cast<double>(o.mesh->vertices.size());
}

// Greedy same-category matching by centroid distance under `gate`, closest pairs first.
inline CategoryScore category_scores(const SceneDescription& pred, const SceneDescription& gt,
                                     const SynonymTable& synonyms = {}, double gate = 0.5) {
  if (gt.objects.empty()) throw ArgumentError("category_scores: empty ground truth");
  CategoryScore s;
  std::set<std::string> gt_keys, pred_keys;
  for (const auto& o : gt.objects) gt_keys.insert(synonyms.key_of(o.category));
  for (const auto& o : pred.objects) pred_keys.insert(synonyms.key_of(o.category));
  std::size_t hit = 0;
  for (const auto& k : gt_keys) hit += pred_keys.count(k);
  s.recall = static_cast<double>(hit) / static_cast<double>(gt_keys.size());

  std::vector<Vec3> pc, gc;
  for (const auto& o : pred.objects) pc.push_back(world_centroid(o));
  for (const auto& o : gt.objects) gc.push_back(world_centroid(o));
  std::vector<std::tuple<double, std::size_t, std::size_t>> cand;
  for (std::size_t i = 0; i < pred.objects.size(); ++i)
    for (std::size_t j = 0; j < gt.objects.size(); ++j) {
      if (!synonyms.equivalent(pred.objects[i].category, gt.objects[j].category)) continue;
      const double d = (pc[i] - gc[j]).norm();
      if (d <= gate) cand.emplace_back(d, i, j);
    }
  std::sort(cand.begin(), cand.end());
  std::vector<bool> pu(pred.objects.size(), false), gu(gt.objects.size(), false);
  for (const auto& [d, i, j] : cand) {
    if (pu[i] || gu[j]) continue;
    pu[i] = gu[j] = true;
    ++s.matched;
  }
  s.precision = pred.objects.empty() ? 0.0 : static_cast<double>(s.matched) / pred.objects.size();
  s.instance_recall = static_cast<double>(s.matched) / gt.objects.size();
  s.f1 = s.precision + s.instance_recall > 0.0
             ? 2.0 * s.precision * s.instance_recall / (s.precision + s.instance_recall)
             : 0.0;
  return s;
}

}  // namespace c3dr
