#include <gtest/gtest.h>

#include <random>

#include "c3dr/metrics.hpp"
#include "c3dr/synth.hpp"
#include "test_support.hpp"

using namespace c3dr;
using c3dr::testing::linear_scan_nn;

namespace {

PointCloud cloud(std::vector<Vec3> pts, std::vector<Vec3> normals = {}) {
  PointCloud c;
  c.points = std::move(pts);
  c.normals = std::move(normals);
  return c;
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double ab = 0, ba = 0;
  for (const auto& p : a) ab += linear_scan_nn(p, b);
  for (const auto& p : b) ba += linear_scan_nn(p, a);
  return 0.5 * (ab / a.size() + ba / b.size());
}

double brute_fscore(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double thr) {
  double p = 0, r = 0;
  for (const auto& x : a) p += linear_scan_nn(x, b) < thr;
  for (const auto& x : b) r += linear_scan_nn(x, a) < thr;
  p /= a.size();
  r /= b.size();
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

// grid on z = h with spacing `step`, n × n points
std::vector<Vec3> plane_points(int n, double step, double h) {
  std::vector<Vec3> out;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) out.emplace_back(x * step, y * step, h);
  return out;
}

Image pattern(int w, int h, int which) {
  Image im(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0;
      if (which == 1) v = (x + y) % 2;
      if (which == 2) v = 0.5 + 0.4 * std::sin(0.37 * x + 0.21 * y);
      if (which == 3) v = 0.5 + 0.3 * std::cos(0.11 * x * y / 7.0) + 0.1 * std::sin(0.9 * x);
      im.at(x, y) = v;
    }
  return im;
}

Image stack(const std::vector<Image>& planes) {
  Image out(planes[0].width, planes[0].height, static_cast<int>(planes.size()));
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < out.channels; ++c) out.at(x, y, c) = planes[c].at(x, y);
  return out;
}

Image map(const Image& a, double scale, double offset) {
  Image out = a;
  for (auto& v : out.data) v = v * scale + offset;
  return out;
}

PlacedObject box_at(int id, const std::string& cat, const Vec3& t, double size = 0.3) {
  PlacedObject o;
  o.id = id;
  o.category = cat;
  o.mesh = std::make_shared<TriMesh>(make_box(size, size, size));
  o.pose.t = t;
  return o;
}

}  // namespace

TEST(Chamfer, Examples) {
  const auto a = cloud({Vec3(0, 0, 0), Vec3(1, 2, 3)});
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_DOUBLE_EQ(chamfer_distance(cloud({Vec3(0, 0, 0)}), cloud({Vec3(0, 1, 0)})), 1.0);
  EXPECT_THROW(chamfer_distance(a, PointCloud{}), ArgumentError);
}

TEST(Chamfer, MatchesLinearScanAndIsSymmetric) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = c3dr::testing::random_points(rng, 2000);
    const auto b = c3dr::testing::random_points(rng, 1500, -0.8, 1.2);
    const double cd = chamfer_distance(cloud(a), cloud(b));
    EXPECT_NEAR(cd, brute_chamfer(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(cd, chamfer_distance(cloud(b), cloud(a)));
    // joint rigid motion
    const SimilarityTransform g{1.0, c3dr::testing::random_rotation(rng), Vec3(3, -1, 2)};
    auto ma = a, mb = b;
    for (auto& p : ma) p = g.apply(p);
    for (auto& p : mb) p = g.apply(p);
    EXPECT_NEAR(chamfer_distance(cloud(ma), cloud(mb)), cd, 1e-9);
  }
}

TEST(FScore, Examples) {
  const auto a = cloud(plane_points(10, 0.1, 0));
  EXPECT_DOUBLE_EQ(f_score(a, a), 1.0);
  EXPECT_DOUBLE_EQ(f_score(a, cloud(plane_points(10, 0.1, 5))), 0.0);
  // half of a near b, all of b near a
  const auto b = cloud({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  const auto half = cloud({Vec3(0, 0, 0.01), Vec3(1, 0, 0.01), Vec3(0, 5, 0), Vec3(1, 5, 0)});
  EXPECT_NEAR(f_score(half, b), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(f_score(a, a, 0.0), ArgumentError);
  // strict threshold
  EXPECT_DOUBLE_EQ(f_score(cloud({Vec3(0, 0, 0)}), cloud({Vec3(0.5, 0, 0)}), 0.5), 0.0);
}

TEST(FScore, MatchesLinearScanAndIsMonotone) {
  std::mt19937_64 rng(32);
  const auto a = c3dr::testing::random_points(rng, 1200);
  const auto b = c3dr::testing::random_points(rng, 900, -0.9, 1.1);
  double prev = 0.0;
  for (double thr : {0.01, 0.03, 0.05, 0.1, 0.2}) {
    const double f = f_score(cloud(a), cloud(b), thr);
    EXPECT_NEAR(f, brute_fscore(a, b, thr), 1e-12);
    EXPECT_GE(f, prev);
    prev = f;
  }
}

TEST(NormalConsistency, PlaneConstructions) {
  const auto pts = plane_points(8, 0.1, 0);
  const std::vector<Vec3> up(pts.size(), Vec3::UnitZ()), down(pts.size(), -Vec3::UnitZ()),
      side(pts.size(), Vec3::UnitX());
  EXPECT_DOUBLE_EQ(normal_consistency(cloud(pts, up), cloud(pts, up)), 1.0);
  EXPECT_DOUBLE_EQ(normal_consistency(cloud(pts, up), cloud(plane_points(8, 0.1, 0.02), down)), 1.0);
  EXPECT_DOUBLE_EQ(normal_consistency(cloud(pts, up), cloud(pts, side)), 0.0);
  EXPECT_THROW(normal_consistency(cloud(pts), cloud(pts, up)), ArgumentError);
}

TEST(Psnr, Examples) {
  const auto a = pattern(16, 12, 2);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(a, map(a, 1.0, 0.1)), 20.0, 1e-9);
  EXPECT_THROW(psnr(a, pattern(12, 16, 2)), ArgumentError);
}

TEST(Ssim, IdenticalIsOne) {
  const auto a = pattern(20, 20, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_THROW(ssim(a, pattern(20, 21, 3)), ArgumentError);
}

// Frozen values from skimage.metrics.structural_similarity (gaussian_weights, sigma 1.5,
// population covariance, data_range 1).
TEST(Ssim, MatchesReferenceImplementation) {
  const auto checker = pattern(16, 16, 1);
  EXPECT_NEAR(ssim(checker, map(checker, -1.0, 1.0)), -0.9964064683569569, 1e-3);
  EXPECT_NEAR(ssim(pattern(24, 20, 2), pattern(24, 20, 3)), -0.21289210523647495, 1e-3);
  const auto a = pattern(24, 20, 2);
  EXPECT_NEAR(ssim(a, map(a, 0.8, 0.05)), 0.970708612999229, 1e-3);
  const auto c = map(pattern(20, 20, 1), 0.5, 0.25);
  const auto rgb_a = stack({pattern(20, 20, 2), pattern(20, 20, 3), c});
  const auto rgb_b = stack({pattern(20, 20, 3), pattern(20, 20, 2), map(c, -1.0, 1.0)});
  EXPECT_NEAR(ssim(rgb_a, rgb_b), -0.522472926617953, 1e-3);
}

TEST(SurfaceSampling, DeterministicAndAreaWeighted) {
  SceneDescription s;
  s.objects.push_back(box_at(1, "crate", Vec3(0, 0, 0), 1.0));
  s.objects.push_back(box_at(2, "crate", Vec3(5, 0, 0), 2.0));
  const auto a = sample_scene_surface(s, 20000, 3);
  const auto b = sample_scene_surface(s, 20000, 3);
  EXPECT_EQ(a.cloud.points, b.cloud.points);
  EXPECT_NEAR(a.area, 6.0 + 24.0, 1e-12);
  EXPECT_NEAR(a.spacing, std::sqrt(30.0 / 20000.0), 1e-15);
  std::size_t big = 0;
  for (const auto& p : a.cloud.points) big += p.x() > 2.0;
  EXPECT_NEAR(big / 20000.0, 0.8, 0.02);
}

TEST(SceneScore, Examples) {
  SceneDescription gt;
  gt.objects.push_back(box_at(1, "crate", Vec3(0, 0, 0)));
  gt.objects.push_back(box_at(2, "chair", Vec3(1, 0, 0)));
  const auto same = scene_geometry_score(gt, gt, 5000);
  EXPECT_EQ(same.chamfer, 0.0);
  EXPECT_EQ(same.fscore, 1.0);
  EXPECT_EQ(same.normal_consistency, 1.0);

  // a second, independent sampling of the same surface stays under twice the spacing
  const auto g = sample_scene_surface(gt, 5000, 0), p = sample_scene_surface(gt, 5000, 1);
  EXPECT_LT(chamfer_distance(p.cloud, g.cloud), 2.0 * g.spacing);

  auto moved = gt;
  moved.objects[1].pose.t.x() += 1.0;
  EXPECT_GT(scene_geometry_score(moved, gt, 5000).chamfer, same.chamfer);

  const auto empty = scene_geometry_score(SceneDescription{}, gt, 5000);
  EXPECT_TRUE(std::isinf(empty.chamfer));
  EXPECT_EQ(empty.fscore, 0.0);
  EXPECT_THROW(scene_geometry_score(gt, gt, 999), ArgumentError);
}

TEST(CategoryScores, Examples) {
  SceneDescription gt;
  gt.objects.push_back(box_at(1, "sofa", Vec3(0, 0, 0)));
  gt.objects.push_back(box_at(2, "lamp", Vec3(2, 0, 0)));
  auto s = category_scores(gt, gt);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.f1, 1.0);

  SceneDescription dup = gt;
  dup.objects.push_back(box_at(3, "sofa", Vec3(0.05, 0, 0)));
  dup.objects.push_back(box_at(4, "lamp", Vec3(2, 0.1, 0)));
  s = category_scores(dup, gt);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.instance_recall, 1.0);
  EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);

  s = category_scores(SceneDescription{}, gt);
  EXPECT_EQ(s.recall, 0.0);
  EXPECT_EQ(s.f1, 0.0);
  EXPECT_THROW(category_scores(gt, SceneDescription{}), ArgumentError);

  // synonyms and the distance gate
  SceneDescription couch;
  couch.objects.push_back(box_at(9, "couch", Vec3(0.3, 0, 0)));
  couch.objects.push_back(box_at(8, "lamp", Vec3(3, 0, 0)));
  SynonymTable syn;
  syn.add_pair("sofa", "couch");
  s = category_scores(couch, gt, syn);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_EQ(s.matched, 1u);
}
