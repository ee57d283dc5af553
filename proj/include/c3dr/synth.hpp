#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "c3dr/alignment.hpp"
#include "c3dr/bundle_io.hpp"
#include "c3dr/dedup.hpp"
#include "c3dr/discovery.hpp"
#include "c3dr/metrics.hpp"
#include "c3dr/rasterizer.hpp"
#include "c3dr/refinement.hpp"
#include "c3dr/view_select.hpp"

namespace c3dr {

// ---------------------------------------------------------------------------
// Deterministic randomness

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::initializer_list<std::int64_t> parts) {
  std::uint64_t h = 0x2545f4914f6cdd1dull;
  for (auto p : parts) h = splitmix64(h ^ static_cast<std::uint64_t>(p));
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return unit_double(gen_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    // Box-Muller on the portable uniform source
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  Vec3 unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * M_PI);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
  }
  std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * n)); }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Primitive meshes in the canonical frame: origin at the bottom center, +z up, +x forward.

inline void paint(TriMesh& mesh, const Vec3& color) {
  mesh.colors.assign(mesh.vertices.size(), color);
}

inline TriMesh make_box(double sx, double sy, double sz) {
  TriMesh m;
  for (int k = 0; k < 8; ++k)
    m.vertices.emplace_back((k & 1 ? 0.5 : -0.5) * sx, (k & 2 ? 0.5 : -0.5) * sy, k & 4 ? sz : 0.0);
  // outward counter-clockwise faces
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

inline TriMesh make_cylinder(double radius, double height, int segments = 24) {
  TriMesh m;
  for (int k = 0; k < segments; ++k) {
    const double a = 2.0 * M_PI * k / segments;
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
    m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), height);
  }
  const int bottom = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(0, 0, 0);
  const int top = bottom + 1;
  m.vertices.emplace_back(0, 0, height);
  for (int k = 0; k < segments; ++k) {
    const int b0 = 2 * k, t0 = 2 * k + 1;
    const int b1 = 2 * ((k + 1) % segments), t1 = b1 + 1;
    m.triangles.push_back({b0, b1, t1});
    m.triangles.push_back({b0, t1, t0});
    m.triangles.push_back({bottom, b1, b0});
    m.triangles.push_back({top, t0, t1});
  }
  return m;
}

// Unit icosahedron subdivided `level` times and projected onto the sphere of `radius`,
// centered at the origin.
inline TriMesh make_icosphere(double radius, int level) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, p, 0}, {1, p, 0},  {-1, -p, 0}, {1, -p, 0}, {0, -1, p},  {0, 1, p},
                         {0, -1, -p}, {0, 1, -p}, {p, 0, -1},  {p, 0, 1},  {-p, 0, -1}, {-p, 0, 1}};
  for (auto& x : v) x.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      return mid[key] = static_cast<int>(v.size()) - 1;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& t : f) {
      const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  TriMesh m;
  for (const auto& x : v) m.vertices.push_back(radius * x);
  m.triangles = std::move(f);
  return m;
}

// Icosphere resting on z = 0.
inline TriMesh make_ball(double radius, int level = 2) {
  TriMesh m = make_icosphere(radius, level);
  for (auto& v : m.vertices) v.z() += radius;
  return m;
}

// Flat square grid of quads at z = 0, facing +z.
inline TriMesh make_floor(double half_extent, int cells) {
  TriMesh m;
  for (int j = 0; j <= cells; ++j)
    for (int i = 0; i <= cells; ++i)
      m.vertices.emplace_back(-half_extent + 2.0 * half_extent * i / cells,
                              -half_extent + 2.0 * half_extent * j / cells, 0.0);
  for (int j = 0; j < cells; ++j)
    for (int i = 0; i < cells; ++i) {
      const int a = j * (cells + 1) + i, b = a + 1, c = a + cells + 2, d = a + cells + 1;
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  return m;
}

enum class ShapeKind { Box, Cylinder, Ball };

struct CategoryShape {
  std::string category;
  ShapeKind kind;
  Vec3 lo;  // box: sx sy sz; cylinder: r h -; ball: r - -
  Vec3 hi;
};

inline const std::vector<CategoryShape>& shape_catalog() {
  static const std::vector<CategoryShape> catalog = {
      {"table", ShapeKind::Box, {0.70, 0.50, 0.45}, {0.90, 0.60, 0.55}},
      {"lamp", ShapeKind::Cylinder, {0.08, 0.40, 0}, {0.10, 0.60, 0}},
      {"ball", ShapeKind::Ball, {0.12, 0, 0}, {0.18, 0, 0}},
      {"cabinet", ShapeKind::Box, {0.40, 0.35, 0.60}, {0.50, 0.45, 0.80}},
      {"vase", ShapeKind::Cylinder, {0.08, 0.25, 0}, {0.12, 0.35, 0}},
      {"chair", ShapeKind::Box, {0.40, 0.40, 0.45}, {0.45, 0.45, 0.50}},
      {"plant", ShapeKind::Ball, {0.15, 0, 0}, {0.20, 0, 0}},
      {"bin", ShapeKind::Cylinder, {0.12, 0.30, 0}, {0.15, 0.40, 0}},
      {"crate", ShapeKind::Box, {0.25, 0.25, 0.25}, {0.35, 0.35, 0.35}},
      {"stool", ShapeKind::Cylinder, {0.15, 0.40, 0}, {0.18, 0.45, 0}},
      {"book", ShapeKind::Box, {0.20, 0.14, 0.035}, {0.24, 0.17, 0.045}},
  };
  return catalog;
}

inline const CategoryShape& shape_for(const std::string& category) {
  const auto n = normalize_label(category);
  for (const auto& s : shape_catalog())
    if (s.category == n) return s;
  // unknown labels get a deterministic shape keyed on the label
  std::uint64_t h = 0;
  for (char c : n) h = splitmix64(h ^ static_cast<unsigned char>(c));
  return shape_catalog()[h % (shape_catalog().size() - 1)];
}

inline TriMesh make_shape(const CategoryShape& shape, Rng& rng, double* footprint_radius) {
  Vec3 d;
  for (int k = 0; k < 3; ++k) d(k) = rng.uniform(shape.lo(k), shape.hi(k));
  switch (shape.kind) {
    case ShapeKind::Box:
      *footprint_radius = 0.5 * std::hypot(d.x(), d.y());
      return make_box(d.x(), d.y(), d.z());
    case ShapeKind::Cylinder:
      *footprint_radius = d.x();
      return make_cylinder(d.x(), d.y());
    case ShapeKind::Ball:
      *footprint_radius = d.x();
      return make_ball(d.x());
  }
  return {};
}

// ---------------------------------------------------------------------------
// Scene generation

struct Perturbation {
  double scale = 1.0;      // multiplicative scale error
  double angle_deg = 0.0;  // rotation error about a random axis through the centroid
  double translation = 0.0;  // meters, random direction
};

struct SynthSpec {
  int object_count = 3;
  std::vector<std::string> categories;  // per object; filled from the catalog when short
  std::uint64_t seed = 0;
  int frames = 12;
  int width = 128;
  int height = 128;
  double arc_deg = 120.0;  // orbit span
  double orbit_radius = 2.6;
  double camera_height = 1.5;
  double region = 1.1;      // half extent of the placement square
  double clearance = 0.1;   // minimum gap between footprints
  bool stacked = false;     // object 1 becomes a table with object 2, a book, on top
  std::vector<int> fragment_objects;  // object ids whose track splits at fragment_frame
  int fragment_frame = -1;            // frame index; < 0 means frames / 3
  int min_mask_pixels = 20;
  // oracle knobs, recorded for the providers
  Perturbation perturbation;
  double noise = 0.0;     // correspondence noise, meters
  double outliers = 0.0;  // correspondence outlier fraction
};

struct SynthScene {
  SynthSpec spec;
  SceneDescription gt;
  SceneBundle bundle;
  std::map<int, int> track_object;  // track id -> ground-truth object id
  std::vector<SpatialRelation> relations;
  std::map<int, std::vector<std::string>> visible;  // frame id -> visible categories
};

inline Vec3 object_color(int id) {
  Rng rng(mix_seed({0xc01u, id}));
  return {rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)};
}

inline std::vector<std::string> synth_categories(const SynthSpec& spec) {
  std::vector<std::string> cats = spec.categories;
  if (spec.stacked) {
    if (cats.empty()) cats.push_back("table");
    if (cats.size() < 2) cats.push_back("book");
  }
  // distinct categories first, never "book"; repeats only once the catalog is used up
  const auto& catalog = shape_catalog();
  const std::size_t fillable = catalog.size() - 1;
  std::size_t next = 0;
  while (cats.size() < static_cast<std::size_t>(spec.object_count)) {
    const auto& c = catalog[next % fillable].category;
    if (next >= fillable || std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
    ++next;
  }
  cats.resize(static_cast<std::size_t>(spec.object_count));
  for (auto& c : cats) c = normalize_label(c);
  return cats;
}

inline std::vector<CameraModel> orbit_cameras(const SynthSpec& spec, double start_angle) {
  std::vector<CameraModel> cams;
  const double f = 0.866 * spec.width;
  const Vec3 target(0, 0, 0.35);
  for (int i = 0; i < spec.frames; ++i) {
    const double a = start_angle + (spec.frames > 1 ? spec.arc_deg * M_PI / 180.0 * i / (spec.frames - 1) : 0.0);
    const Vec3 eye(spec.orbit_radius * std::cos(a), spec.orbit_radius * std::sin(a), spec.camera_height);
    cams.push_back(CameraModel::look_at(eye, target, Vec3::UnitZ(), f, spec.width, spec.height));
  }
  return cams;
}

// Renders every placed object plus the floor; returns depth and one mask per object.
inline std::pair<DepthMap, std::vector<Mask>> render_scene(const SceneDescription& scene,
                                                           const CameraModel& cam) {
  TriMesh all;
  std::vector<int> owner;  // triangle -> object index, -1 floor
  auto append = [&](const TriMesh& m, const SimilarityTransform& pose, int who) {
    const int base = static_cast<int>(all.vertices.size());
    for (const auto& v : m.vertices) all.vertices.push_back(pose.apply(v));
    for (const auto& t : m.triangles) {
      all.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
      owner.push_back(who);
    }
  };
  static const TriMesh floor = make_floor(6.0, 8);
  SimilarityTransform floor_pose;
  floor_pose.t = -scene.gravity * scene.floor_height;
  append(floor, floor_pose, -1);
  for (std::size_t i = 0; i < scene.objects.size(); ++i)
    append(*scene.objects[i].mesh, scene.objects[i].pose, static_cast<int>(i));
  auto r = rasterize(all, SimilarityTransform::identity(), cam);
  std::vector<Mask> masks(scene.objects.size(), Mask(cam.width, cam.height));
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const int t = r.triangle[static_cast<std::size_t>(y) * cam.width + x];
      if (t >= 0 && owner[t] >= 0) masks[owner[t]].set(x, y, true);
    }
  return {std::move(r.depth), std::move(masks)};
}

inline SynthScene generate_scene(const SynthSpec& spec) {
  if (spec.object_count < 1) throw GenerationError("synth: object count must be at least 1");
  if (spec.frames < 1) throw GenerationError("synth: need at least one frame");
  if (spec.stacked && spec.object_count < 2) throw GenerationError("synth: stacking needs two objects");
  if (spec.width > 256 || spec.height > 256 || spec.width < 16 || spec.height < 16)
    throw GenerationError("synth: image size must be within 16..256");
  SynthScene out;
  out.spec = spec;
  const auto cats = synth_categories(spec);
  Rng rng(mix_seed({static_cast<std::int64_t>(spec.seed), 1}));
  std::vector<double> radii;  // footprint radius per object, scaled

  for (int i = 0; i < spec.object_count; ++i) {
    const int id = i + 1;
    double radius = 0.0;
    auto mesh = std::make_shared<TriMesh>(make_shape(shape_for(cats[i]), rng, &radius));
    paint(*mesh, object_color(id));
    PlacedObject o;
    o.id = id;
    o.category = cats[i];
    o.mesh_ref = "meshes/object_" + std::to_string(id) + ".obj";
    o.mesh = std::move(mesh);
    o.pose.s = rng.uniform(0.9, 1.1);
    o.pose.R = axis_angle(Vec3::UnitZ(), rng.uniform(0.0, 2.0 * M_PI));
    radii.push_back(radius * o.pose.s);
    out.gt.objects.push_back(std::move(o));
  }

  // Floor layout by rejection sampling; a full restart when one object finds no room.
  auto on_floor = [&](int i) { return !(spec.stacked && i == 1); };
  bool laid_out = false;
  int stuck = -1;
  for (int restart = 0; restart < 50 && !laid_out; ++restart) {
    std::vector<std::pair<Vec3, double>> placed;
    laid_out = true;
    for (int i = 0; i < spec.object_count && laid_out; ++i) {
      if (!on_floor(i)) continue;
      const double r = radii[i];
      const double lim = spec.region - r;
      bool ok = false;
      for (int attempt = 0; attempt < 400 && !ok && lim > 0.0; ++attempt) {
        const Vec3 c(rng.uniform(-lim, lim), rng.uniform(-lim, lim), 0.0);
        ok = std::all_of(placed.begin(), placed.end(), [&](const auto& p) {
          return (p.first - c).norm() >= p.second + r + spec.clearance;
        });
        if (ok) {
          out.gt.objects[i].pose.t = c;
          placed.emplace_back(c, r);
        }
      }
      if (!ok) {
        laid_out = false;
        stuck = i;
      }
    }
  }
  if (!laid_out)
    throw GenerationError("synth: cannot fit object " + std::to_string(stuck + 1) + " (" + cats[stuck] +
                          ") into the layout region");

  for (int i = 0; i < spec.object_count; ++i) {
    PlacedObject& o = out.gt.objects[i];
    if (on_floor(i)) {
      o.relations.push_back({o.id, RelationKind::SupportedBy, RelationTarget::floor()});
    } else {
      // book on the table top, kept inside the top face
      const PlacedObject& table = out.gt.objects[0];
      double top = -std::numeric_limits<double>::infinity();
      for (const auto& v : table.mesh->vertices) top = std::max(top, table.pose.apply(v).z());
      const Vec3 offset(rng.uniform(-0.08, 0.08), rng.uniform(-0.05, 0.05), 0.0);
      o.pose.t = Vec3(table.pose.t.x(), table.pose.t.y(), top) + table.pose.R * offset;
      o.relations.push_back({o.id, RelationKind::SupportedBy, {RelationTarget::Kind::Object, 1}});
    }
    out.relations.insert(out.relations.end(), o.relations.begin(), o.relations.end());
  }

  const auto cams = orbit_cameras(spec, rng.uniform(0.0, 2.0 * M_PI));
  const int split = spec.fragment_frame >= 0 ? spec.fragment_frame : spec.frames / 3;
  const std::set<int> fragmented(spec.fragment_objects.begin(), spec.fragment_objects.end());
  std::vector<int> seen(out.gt.objects.size(), 0);
  for (int fi = 0; fi < spec.frames; ++fi) {
    Frame frame;
    frame.id = fi;
    frame.camera = cams[fi];
    auto [depth, masks] = render_scene(out.gt, cams[fi]);
    frame.depth = std::move(depth);
    std::set<std::string> vis;
    for (std::size_t k = 0; k < masks.size(); ++k) {
      if (masks[k].count() < static_cast<std::size_t>(spec.min_mask_pixels)) continue;
      const auto& o = out.gt.objects[k];
      const int track = fragmented.count(o.id) && fi >= split ? 100 + o.id : o.id;
      out.track_object[track] = o.id;
      frame.instances.push_back({track, o.category, std::move(masks[k])});
      vis.insert(o.category);
      ++seen[k];
    }
    std::sort(frame.instances.begin(), frame.instances.end(),
              [](const auto& a, const auto& b) { return a.track < b.track; });
    out.visible[fi] = {vis.begin(), vis.end()};
    out.bundle.frames.push_back(std::move(frame));
  }
  for (std::size_t k = 0; k < seen.size(); ++k)
    if (!seen[k])
      throw GenerationError("synth: object " + std::to_string(out.gt.objects[k].id) +
                            " is not visible in any frame");
  return out;
}

// ---------------------------------------------------------------------------
// Oracle providers backed by the ground-truth scene

// Ground-truth object best explaining an observed mask: same category, nearest centroid.
inline const PlacedObject* identify_object(const SceneDescription& gt, const std::string& category,
                                           const Mask& mask, const DepthMap& depth,
                                           const CameraModel& cam) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y) && depth.valid(x, y)) {
        sum += backproject_unchecked(x, y, depth.at(x, y), cam);
        ++n;
      }
  if (n == 0) return nullptr;
  const Vec3 c = sum / static_cast<double>(n);
  const PlacedObject* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  const auto cat = normalize_label(category);
  for (int pass = 0; pass < 2 && !best; ++pass)
    for (const auto& o : gt.objects) {
      if (pass == 0 && normalize_label(o.category) != cat) continue;
      const double d = (world_centroid(o) - c).norm();
      if (d < best_d) {
        best_d = d;
        best = &o;
      }
    }
  return best;
}

// Perturbation about the object's world centroid, seeded by (seed, object id).
inline SimilarityTransform perturbed_pose(const PlacedObject& o, const Perturbation& p,
                                          std::uint64_t seed) {
  Rng rng(mix_seed({static_cast<std::int64_t>(seed), 2, o.id}));
  const Vec3 axis = rng.unit_vector();
  const Vec3 dir = rng.unit_vector();
  const Vec3 c = world_centroid(o);
  SimilarityTransform delta;
  delta.s = p.scale;
  delta.R = axis_angle(axis, p.angle_deg * M_PI / 180.0);
  delta.t = c - p.scale * (delta.R * c) + p.translation * dir;
  return delta.compose(o.pose);
}

// Reveals the categories of the frame's observed instances that the registry lacks.
class OracleLabelProvider : public LabelProvider {
 public:
  std::vector<std::string> novel_labels(const Frame& frame, const CategoryRegistry& registry) override {
    std::vector<std::string> out;
    for (const auto& inst : frame.instances) {
      const auto n = normalize_label(inst.category);
      if (!registry.contains(n) && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    return out;
  }
};

class OracleAssetProvider : public AssetProvider {
 public:
  OracleAssetProvider(SceneDescription gt, Perturbation p, std::uint64_t seed)
      : gt_(std::move(gt)), p_(p), seed_(seed) {}

  Asset generate(const AssetRequest& r) override {
    const PlacedObject* o = identify_object(gt_, r.category, r.mask, r.depth, r.camera);
    if (!o) throw ProviderError("oracle asset: observation has no valid depth");
    return {*o->mesh, perturbed_pose(*o, p_, seed_)};
  }
  bool thread_safe() const override { return true; }

 private:
  SceneDescription gt_;
  Perturbation p_;
  std::uint64_t seed_;
};

inline std::vector<Vec3> sample_mesh_surface(const TriMesh& mesh, std::size_t n, Rng& rng) {
  std::vector<double> cumulative;
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    cumulative.push_back(area);
  }
  std::vector<Vec3> out;
  if (!(area > 0.0)) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * area;
    auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                                      cumulative.begin());
    k = std::min(k, mesh.triangles.size() - 1);
    const auto& t = mesh.triangles[k];
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    out.push_back((1 - r1) * mesh.vertices[t[0]] + r1 * (1 - r2) * mesh.vertices[t[1]] +
                  r1 * r2 * mesh.vertices[t[2]]);
  }
  return out;
}

struct CorrespondenceOracleOptions {
  double noise = 0.0;     // meters, applied to the observed pixel
  double outliers = 0.0;  // fraction of pairs whose rendered pixel is replaced at random
  std::size_t samples = 600;
  double exact_tolerance = 1e-5;  // meters; lifted points must reproduce the surface point
  std::uint64_t seed = 0;
};

// Projects surface points of the asset under the true pose (observed view) and the current pose
// (rendered view). Only points visible and exactly liftable on both sides are kept.
class OracleCorrespondenceProvider : public CorrespondenceProvider {
 public:
  OracleCorrespondenceProvider(SceneDescription gt, CorrespondenceOracleOptions opt)
      : gt_(std::move(gt)), opt_(opt) {}

  std::vector<Correspondence> match(const MatchRequest& r) override {
    std::vector<Correspondence> out;
    const PlacedObject* o = identify_object(gt_, r.category, r.real_mask, r.real_depth, r.camera);
    if (!o) return out;
    Rng rng(mix_seed({static_cast<std::int64_t>(opt_.seed), 3, r.frame_id, r.instance_id, r.iteration}));
    const auto pts = sample_mesh_surface(r.asset, opt_.samples, rng);
    auto visible = [&](const Vec3& world, const DepthMap& depth, Vec2* px) {
      const auto p = project(world, r.camera);
      if (!(p.depth > 0.0) || !r.camera.contains(p.u, p.v)) return false;
      const auto d = sample_depth(depth, p.u, p.v);
      if (!d) return false;
      if ((backproject_unchecked(p.u, p.v, *d, r.camera) - world).norm() > opt_.exact_tolerance)
        return false;
      *px = Vec2(p.u, p.v);
      return true;
    };
    for (const auto& x : pts) {
      Correspondence c;
      if (!visible(o->pose.apply(x), r.real_depth, &c.real)) continue;
      if (!visible(r.pose.apply(x), r.rendered_depth, &c.rendered)) continue;
      out.push_back(c);
    }
    std::vector<Vec2> rendered_px;
    if (opt_.outliers > 0.0)
      for (int y = 0; y < r.rendered_mask.height; ++y)
        for (int x = 0; x < r.rendered_mask.width; ++x)
          if (r.rendered_mask.at(x, y)) rendered_px.emplace_back(x, y);
    for (auto& c : out) {
      if (opt_.noise > 0.0) {
        const auto d = sample_depth(r.real_depth, c.real.x(), c.real.y());
        const double sigma_px = opt_.noise * r.camera.fx / *d;
        c.real.x() = std::clamp(c.real.x() + sigma_px * rng.normal(), 0.0, r.camera.width - 1.0);
        c.real.y() = std::clamp(c.real.y() + sigma_px * rng.normal(), 0.0, r.camera.height - 1.0);
      }
      if (!rendered_px.empty() && rng.uniform() < opt_.outliers)
        c.rendered = rendered_px[rng.index(rendered_px.size())];
    }
    return out;
  }

  bool thread_safe() const override { return true; }

 private:
  SceneDescription gt_;
  CorrespondenceOracleOptions opt_;
};

// Maps ground-truth relations onto draft ids by category and nearest centroid.
class OracleRelationProvider : public RelationProvider {
 public:
  explicit OracleRelationProvider(SceneDescription gt) : gt_(std::move(gt)) {}

  std::vector<SpatialRelation> relations(const SceneDescription& draft, const SceneBundle&) override {
    std::map<int, std::vector<int>> drafts_of;  // gt id -> draft ids, ascending
    for (const auto& d : draft.objects) {
      const Vec3 c = world_centroid(d);
      const PlacedObject* best = nullptr;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& g : gt_.objects) {
        if (normalize_label(g.category) != normalize_label(d.category)) continue;
        const double dist = (world_centroid(g) - c).norm();
        if (dist < best_d) {
          best_d = dist;
          best = &g;
        }
      }
      if (best) drafts_of[best->id].push_back(d.id);
    }
    for (auto& [g, ids] : drafts_of) std::sort(ids.begin(), ids.end());
    std::vector<SpatialRelation> out;
    for (const auto& d : draft.objects) {
      for (const auto& [gid, ids] : drafts_of) {
        if (std::find(ids.begin(), ids.end(), d.id) == ids.end()) continue;
        for (const auto& rel : gt_.find(gid)->relations) {
          SpatialRelation r{d.id, rel.kind, rel.target};
          if (rel.target.kind == RelationTarget::Kind::Object) {
            auto it = drafts_of.find(rel.target.id);
            if (it == drafts_of.end()) continue;
            r.target.id = it->second.front();
          }
          out.push_back(r);
        }
      }
    }
    return out;
  }

 private:
  SceneDescription gt_;
};

// ---------------------------------------------------------------------------
// On-disk synth output:
//   bundle/            scene bundle
//   gt/scene.json      ground truth (+ gt/meshes/*.obj)
//   gt/tracks.txt      track -> ground-truth object
//   providers.json     oracle provider configuration
//   transcript.txt     visible categories per frame
//   relations.txt      ground-truth relation list

inline nlohmann::json oracle_providers_config(const SynthSpec& spec) {
  using nlohmann::json;
  return json{
      {"labels", {{"type", "oracle"}}},
      {"assets",
       {{"type", "oracle"},
        {"scene", "gt/scene.json"},
        {"scale", spec.perturbation.scale},
        {"angle_deg", spec.perturbation.angle_deg},
        {"translation", spec.perturbation.translation},
        {"seed", spec.seed}}},
      {"matcher",
       {{"type", "oracle"},
        {"scene", "gt/scene.json"},
        {"noise", spec.noise},
        {"outliers", spec.outliers},
        {"seed", spec.seed}}},
      {"relations", {{"type", "oracle"}, {"scene", "gt/scene.json"}}},
  };
}

inline void write_synth(const SynthScene& s, const fs::path& dir) {
  save_bundle(s.bundle, dir / "bundle");
  save_scene(s.gt, dir / "gt" / "scene.json");
  write_file_bytes(dir / "gt" / "tracks.txt", format_group_map(s.track_object));
  write_file_bytes(dir / "providers.json", oracle_providers_config(s.spec).dump(2) + "\n");
  write_file_bytes(dir / "transcript.txt", format_transcript(s.visible));
  write_file_bytes(dir / "relations.txt", format_relations(s.relations));
}

}  // namespace c3dr
