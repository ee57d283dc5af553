#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "c3dr/geometry.hpp"
#include "c3dr/spatial_index.hpp"
#include "test_support.hpp"

using namespace c3dr;
using c3dr::testing::linear_scan_nn;
using c3dr::testing::random_points;
using c3dr::testing::random_rotation;
using c3dr::testing::random_similarity;

namespace {

std::vector<Vec3> apply_all(const SimilarityTransform& T, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(T.apply(p));
  return out;
}

void expect_transform_near(const SimilarityTransform& a, const SimilarityTransform& b,
                           double tol) {
  EXPECT_NEAR(a.s, b.s, tol);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(a.t(i), b.t(i), tol);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a.R(i, j), b.R(i, j), tol);
  }
}

}  // namespace

TEST(Backproject, PrincipalPointLiesOnOpticalAxis) {
  const auto cam = c3dr::testing::test_camera();
  const Vec3 p = backproject(cam.cx, cam.cy, 3.0, cam);
  EXPECT_NEAR(p.x(), 0.0, 1e-12);
  EXPECT_NEAR(p.y(), 0.0, 1e-12);
  EXPECT_NEAR(p.z(), 3.0, 1e-12);
}

TEST(Backproject, OneFocalLengthOffsetGivesUnitTangent) {
  auto cam = c3dr::testing::test_camera(200, 100, 40.0);
  const Vec3 p = backproject(cam.cx + cam.fx, cam.cy, 2.0, cam);
  EXPECT_NEAR(p.x(), 2.0, 1e-12);
  EXPECT_NEAR(p.y(), 0.0, 1e-12);
  EXPECT_NEAR(p.z(), 2.0, 1e-12);
}

TEST(Backproject, RejectsInvalidDepthAndOutOfBoundsPixels) {
  const auto cam = c3dr::testing::test_camera();
  EXPECT_THROW(backproject(1, 1, 0.0, cam), RejectedPointError);
  EXPECT_THROW(backproject(1, 1, -2.0, cam), RejectedPointError);
  EXPECT_THROW(backproject(1, 1, std::nan(""), cam), RejectedPointError);
  EXPECT_THROW(backproject(-0.5, 1, 1.0, cam), ArgumentError);
  EXPECT_THROW(backproject(1, cam.height, 1.0, cam), ArgumentError);
}

TEST(Backproject, RoundTripThroughProjection) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto cam = c3dr::testing::test_camera(320, 240, 100.0 + 400.0 * u01(rng));
    cam.R = random_rotation(rng);
    cam.t = c3dr::testing::random_points(rng, 1, -5, 5)[0];
    cam.validate();
    const double u = u01(rng) * (cam.width - 1);
    const double v = u01(rng) * (cam.height - 1);
    const double d = 0.1 + 20.0 * u01(rng);
    const auto back = project(backproject(u, v, d, cam), cam);
    EXPECT_NEAR(back.u, u, 1e-6);
    EXPECT_NEAR(back.v, v, 1e-6);
    EXPECT_NEAR(back.depth, d, 1e-6);
  }
}

TEST(Camera, ValidateRejectsReflectionsAndBadIntrinsics) {
  auto cam = c3dr::testing::test_camera();
  cam.R(0, 0) = -1.0;
  EXPECT_THROW(cam.validate(), ArgumentError);
  cam = c3dr::testing::test_camera();
  cam.fx = 0.0;
  EXPECT_THROW(cam.validate(), ArgumentError);
}

TEST(Umeyama, IdentityOnEqualSets) {
  std::mt19937_64 rng(1);
  const auto pts = random_points(rng, 10);
  const auto T = umeyama_fit(pts, pts);
  expect_transform_near(T, SimilarityTransform::identity(), 1e-9);
}

TEST(Umeyama, RecoversKnownTransform) {
  std::mt19937_64 rng(2);
  const auto src = random_points(rng, 50);
  const SimilarityTransform truth{2.5, axis_angle(Vec3::UnitZ(), M_PI / 2), Vec3(1, 2, 3)};
  const auto T = umeyama_fit(src, apply_all(truth, src));
  expect_transform_near(T, truth, 1e-6);
}

TEST(Umeyama, RecoversRandomSimilarities) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto src = random_points(rng, 4 + trial % 20);
    const auto truth = random_similarity(rng);
    expect_transform_near(umeyama_fit(src, apply_all(truth, src)), truth, 1e-6);
  }
}

TEST(Umeyama, PlanarConfigurationIsNotDegenerate) {
  std::vector<Vec3> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const SimilarityTransform truth{0.5, axis_angle(Vec3(1, 1, 0), 0.3), Vec3(0, 0, 1)};
  expect_transform_near(umeyama_fit(src, apply_all(truth, src)), truth, 1e-9);
}

TEST(Umeyama, NoisyTargetsMonteCarlo) {
  const SimilarityTransform truth{2.5, axis_angle(Vec3::UnitZ(), M_PI / 2), Vec3(1, 2, 3)};
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    const auto src = random_points(rng, 1000);
    auto dst = apply_all(truth, src);
    for (auto& p : dst) p += Vec3(noise(rng), noise(rng), noise(rng));
    const auto T = umeyama_fit(src, dst);
    EXPECT_LT(std::abs(T.s - 2.5) / 2.5, 0.01);
    EXPECT_LT(rotation_angle(T.R * truth.R.transpose()), M_PI / 180.0);
  }
}

TEST(Umeyama, PermutationInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto src = random_points(rng, 30);
    auto dst = apply_all(random_similarity(rng), src);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (auto& p : dst) p += Vec3(noise(rng), noise(rng), noise(rng));
    std::vector<std::size_t> perm(src.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec3> ps, pd;
    for (auto i : perm) {
      ps.push_back(src[i]);
      pd.push_back(dst[i]);
    }
    expect_transform_near(umeyama_fit(src, dst), umeyama_fit(ps, pd), 1e-9);
  }
}

TEST(Umeyama, RejectsTooFewAndDegenerateInputs) {
  std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(umeyama_fit(two, two), EstimationError);
  std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  EXPECT_THROW(umeyama_fit(line, line), EstimationError);
  std::vector<Vec3> same(5, Vec3(1, 1, 1));
  EXPECT_THROW(umeyama_fit(same, same), EstimationError);
  std::vector<Vec3> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_THROW(umeyama_fit(three, two), EstimationError);
}

TEST(Similarity, ComposeAndInverse) {
  std::mt19937_64 rng(5);
  const auto a = random_similarity(rng);
  const auto b = random_similarity(rng);
  const Vec3 x(0.3, -1.2, 2.0);
  EXPECT_LT((a.compose(b).apply(x) - a.apply(b.apply(x))).norm(), 1e-9);
  EXPECT_LT((a.inverse().apply(a.apply(x)) - x).norm(), 1e-9);
}

TEST(NearestNeighbor, SmallExamples) {
  PointCloud cloud{{Vec3(1, 0, 0), Vec3(0, 3, 0)}, {}};
  EXPECT_DOUBLE_EQ(nearest_neighbor_distance(Vec3::Zero(), cloud), 1.0);
  EXPECT_DOUBLE_EQ(nearest_neighbor_distance(Vec3(0, 3, 0), cloud), 0.0);
  EXPECT_THROW(nearest_neighbor_distance(Vec3::Zero(), PointCloud{}), ArgumentError);
  EXPECT_THROW(nearest_other_distance(0, PointCloud{{Vec3::Zero()}, {}}), ArgumentError);
}

TEST(NearestNeighbor, KdTreeEqualsLinearScan) {
  for (int instance = 0; instance < 100; ++instance) {
    std::mt19937_64 rng(1000 + instance);
    const auto pts = random_points(rng, 1000);
    const auto queries = random_points(rng, 100, -1.5, 1.5);
    const KdTree tree(pts);
    for (const auto& q : queries)
      ASSERT_EQ(std::sqrt(tree.nearest(q).squared_distance), linear_scan_nn(q, pts));
    for (std::size_t i = 0; i < 20; ++i)
      ASSERT_EQ(std::sqrt(tree.nearest(pts[i], i).squared_distance),
                linear_scan_nn(pts[i], pts, i));
  }
}

TEST(NearestNeighbor, DuplicatePointsAndGrids) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) pts.emplace_back(0.1 * i, 0.1 * j, 0.0);
  pts.push_back(pts[5]);
  const KdTree tree(pts);
  EXPECT_EQ(tree.nearest(pts[5], 5).squared_distance, 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i)
    EXPECT_EQ(std::sqrt(tree.nearest(pts[i], i).squared_distance), linear_scan_nn(pts[i], pts, i));
}

TEST(Mesh, CleanDropsDegenerateTriangles) {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  m.triangles = {{0, 1, 2}, {0, 1, 3}};
  const auto c = clean_mesh(m);
  EXPECT_EQ(c.triangles.size(), 1u);
  EXPECT_EQ(c.vertices.size(), 3u);
  m.triangles.push_back({0, 1, 7});
  EXPECT_THROW(m.validate(), ArgumentError);
}
