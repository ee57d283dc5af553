#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "c3dr/bundle_io.hpp"
#include "c3dr/scene.hpp"

namespace c3dr {

class RelationProvider {
 public:
  virtual ~RelationProvider() = default;
  virtual std::vector<SpatialRelation> relations(const SceneDescription& draft,
                                                 const SceneBundle& bundle) = 0;
};

// Returns a fixed relation list, e.g. parsed from a relation file.
class ListRelationProvider : public RelationProvider {
 public:
  explicit ListRelationProvider(std::vector<SpatialRelation> rels) : rels_(std::move(rels)) {}
  std::vector<SpatialRelation> relations(const SceneDescription&, const SceneBundle&) override {
    return rels_;
  }

 private:
  std::vector<SpatialRelation> rels_;
};

struct PoseCorrection {
  SimilarityTransform pose;
  double angle = 0.0;     // rotation applied, radians
  bool singular = false;  // 180° case resolved about the forward axis
};

namespace detail {

// Smallest rotation taking unit vector `from` onto unit vector `to`. When they are
// anti-parallel, rotates by π about `fallback_axis` (assumed perpendicular to `from`).
inline Mat3 minimal_rotation(const Vec3& from, const Vec3& to, const Vec3& fallback_axis,
                             double* angle, bool* singular) {
  const Vec3 a = from.normalized();
  const Vec3 b = to.normalized();
  const Vec3 axis = a.cross(b);
  const double s = axis.norm();
  const double c = a.dot(b);
  *singular = false;
  if (c < 0.0 && s < 1e-9) {
    *singular = true;
    *angle = M_PI;
    return axis_angle(fallback_axis, M_PI);
  }
  *angle = std::atan2(s, c);
  if (s == 0.0) return Mat3::Identity();
  return axis_angle(axis / s, *angle);
}

}  // namespace detail

// Rotates the pose so the asset's canonical +z maps onto -gravity; the correction axis is
// perpendicular to both, leaving the horizontal heading of the forward axis as is.
inline PoseCorrection gravity_align(const SimilarityTransform& pose, const Vec3& gravity) {
  if (std::abs(gravity.norm() - 1.0) > 1e-6) throw ArgumentError("gravity_align: gravity not unit");
  PoseCorrection out{pose};
  const Mat3 q = detail::minimal_rotation(pose.R * Vec3::UnitZ(), -gravity, pose.R * Vec3::UnitX(),
                                          &out.angle, &out.singular);
  out.pose.R = q * pose.R;
  return out;
}

inline double min_height(const TriMesh& mesh, const SimilarityTransform& pose, const Vec3& up) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) lo = std::min(lo, up.dot(pose.apply(v)));
  return lo;
}

// Shifts t along the vertical so the lowest transformed vertex sits at `support_height`.
inline SimilarityTransform support_snap(const TriMesh& mesh, const SimilarityTransform& pose,
                                        double support_height, const Vec3& gravity) {
  if (mesh.vertices.empty()) throw ArgumentError("support_snap: empty mesh");
  const Vec3 up = -gravity.normalized();
  SimilarityTransform out = pose;
  out.t += (support_height - min_height(mesh, pose, up)) * up;
  return out;
}

// Axis-aligned box in a gravity-aligned frame (horizontal e1, e2; vertical up).
struct GravityBox {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool footprint_overlaps(const GravityBox& o) const {
    return lo.x() <= o.hi.x() && o.lo.x() <= hi.x() && lo.y() <= o.hi.y() && o.lo.y() <= hi.y();
  }
  bool intersects(const GravityBox& o, double eps) const {
    for (int k = 0; k < 3; ++k)
      if (std::min(hi(k), o.hi(k)) - std::max(lo(k), o.lo(k)) <= eps) return false;
    return true;
  }
};

inline Mat3 gravity_frame(const Vec3& gravity) {
  const Vec3 up = -gravity.normalized();
  const Vec3 e1 = up.unitOrthogonal();
  const Vec3 e2 = up.cross(e1);
  Mat3 f;
  f.row(0) = e1.transpose();
  f.row(1) = e2.transpose();
  f.row(2) = up.transpose();
  return f;
}

inline GravityBox gravity_box(const TriMesh& mesh, const SimilarityTransform& pose,
                              const Vec3& gravity) {
  const Mat3 f = gravity_frame(gravity);
  GravityBox b;
  for (const auto& v : mesh.vertices) {
    const Vec3 p = f * pose.apply(v);
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

enum class RefineMode {
  Standard,
  // Placement from relations alone: subjects supported by an object are also moved to the
  // horizontal center of the support's footprint.
  SceneGraphOnly,
};

struct RefineResult {
  SceneDescription scene;
  std::vector<std::string> warnings;
  std::vector<int> singular;  // objects whose gravity alignment hit the 180° case
};

namespace detail {

inline void check_relations(const SceneDescription& scene, const std::vector<SpatialRelation>& rels) {
  for (const auto& r : rels) {
    if (!scene.find(r.subject))
      throw RefinementError("relation references missing subject " + std::to_string(r.subject));
    switch (r.target.kind) {
      case RelationTarget::Kind::Object:
        if (r.target.id == r.subject)
          throw RefinementError("object " + std::to_string(r.subject) + " related to itself");
        if (!scene.find(r.target.id))
          throw RefinementError("relation references missing object " + std::to_string(r.target.id));
        break;
      case RelationTarget::Kind::Wall:
        if (!scene.find_wall(r.target.id))
          throw RefinementError("relation references missing wall " + std::to_string(r.target.id));
        break;
      case RelationTarget::Kind::Floor:
      case RelationTarget::Kind::None:
        break;
    }
    if (r.kind == RelationKind::SupportedBy && r.target.kind != RelationTarget::Kind::Floor &&
        r.target.kind != RelationTarget::Kind::Object)
      throw RefinementError("supported_by relation of " + std::to_string(r.subject) +
                            " needs the floor or an object as target");
    if (r.kind == RelationKind::AttachedToWall && r.target.kind != RelationTarget::Kind::Wall)
      throw RefinementError("attached_to_wall relation of " + std::to_string(r.subject) +
                            " needs a wall target");
  }
}

// Objects ordered so that every support precedes what it supports; throws on cycles.
inline std::vector<int> support_order(const SceneDescription& scene,
                                      const std::vector<SpatialRelation>& rels) {
  std::map<int, std::vector<int>> supports;  // subject -> supporting objects
  for (const auto& r : rels)
    if (r.kind == RelationKind::SupportedBy && r.target.kind == RelationTarget::Kind::Object)
      supports[r.subject].push_back(r.target.id);

  std::map<int, int> state;  // 0 new, 1 on stack, 2 done
  std::map<int, int> level;
  std::vector<int> stack;
  std::function<int(int)> visit = [&](int id) -> int {
    if (state[id] == 2) return level[id];
    if (state[id] == 1) {
      std::string cycle;
      auto it = std::find(stack.begin(), stack.end(), id);
      for (; it != stack.end(); ++it) cycle += std::to_string(*it) + " -> ";
      throw RefinementError("support cycle: " + cycle + std::to_string(id));
    }
    state[id] = 1;
    stack.push_back(id);
    int lv = 0;
    for (int s : supports[id]) lv = std::max(lv, visit(s) + 1);
    stack.pop_back();
    state[id] = 2;
    return level[id] = lv;
  };
  std::vector<std::pair<int, int>> keyed;
  for (const auto& o : scene.objects) keyed.emplace_back(visit(o.id), o.id);
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> out;
  for (auto [lv, id] : keyed) out.push_back(id);
  return out;
}

}  // namespace detail

// Applies relation rules in support order: supported_by = gravity_align + support_snap,
// attached_to_wall = back axis onto the wall normal + snap to the wall plane,
// free_standing = gravity_align. The input scene is not modified.
inline RefineResult refine_scene(const SceneDescription& draft,
                                 const std::vector<SpatialRelation>& relations,
                                 RefineMode mode = RefineMode::Standard) {
  detail::check_relations(draft, relations);
  const auto order = detail::support_order(draft, relations);
  RefineResult res{draft, {}, {}};
  SceneDescription& scene = res.scene;
  for (auto& o : scene.objects) o.relations.clear();
  for (const auto& r : relations) scene.find(r.subject)->relations.push_back(r);

  const Vec3 g = scene.gravity;
  for (int id : order) {
    PlacedObject& obj = *scene.find(id);
    for (const auto& rel : obj.relations) {
      if (!obj.mesh) throw RefinementError("object " + std::to_string(id) + " has no loaded mesh");
      if (rel.kind == RelationKind::FreeStanding || rel.kind == RelationKind::SupportedBy) {
        const auto c = gravity_align(obj.pose, g);
        obj.pose = c.pose;
        if (c.singular) res.singular.push_back(id);
      }
      if (rel.kind == RelationKind::SupportedBy) {
        double height = scene.floor_height;
        if (rel.target.kind == RelationTarget::Kind::Object) {
          const PlacedObject& sup = *scene.find(rel.target.id);
          if (!sup.mesh) {
            res.warnings.push_back("object " + std::to_string(id) + ": support " +
                                   std::to_string(sup.id) + " has no mesh, relation skipped");
            continue;
          }
          const auto sbox = gravity_box(*sup.mesh, sup.pose, g);
          const auto obox = gravity_box(*obj.mesh, obj.pose, g);
          if (!obox.footprint_overlaps(sbox))
            res.warnings.push_back("object " + std::to_string(id) + ": footprint disjoint from support " +
                                   std::to_string(sup.id) + ", using its global top face");
          height = sbox.hi.z();
          if (mode == RefineMode::SceneGraphOnly) {
            const Mat3 f = gravity_frame(g);
            const Vec3 shift((sbox.lo.x() + sbox.hi.x() - obox.lo.x() - obox.hi.x()) / 2.0,
                             (sbox.lo.y() + sbox.hi.y() - obox.lo.y() - obox.hi.y()) / 2.0, 0.0);
            obj.pose.t += f.transpose() * shift;
          }
        }
        obj.pose = support_snap(*obj.mesh, obj.pose, height, g);
      } else if (rel.kind == RelationKind::AttachedToWall) {
        const WallPlane& wall = *scene.find_wall(rel.target.id);
        const Vec3 n = wall.normal.normalized();
        double angle = 0.0;
        bool singular = false;
        const Mat3 q = detail::minimal_rotation(obj.pose.R * Vec3::UnitX(), n,
                                                obj.pose.R * Vec3::UnitZ(), &angle, &singular);
        obj.pose.R = q * obj.pose.R;
        if (singular) res.singular.push_back(id);
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& v : obj.mesh->vertices) lo = std::min(lo, n.dot(obj.pose.apply(v)));
        obj.pose.t += (wall.offset - lo) * n;
      }
    }
  }

  // Sibling penetration is reported, not resolved.
  std::map<std::string, std::vector<int>> siblings;
  for (const auto& r : relations)
    if (r.kind == RelationKind::SupportedBy) siblings[to_string(r.target)].push_back(r.subject);
  for (const auto& [target, ids] : siblings)
    for (std::size_t a = 0; a < ids.size(); ++a)
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        const auto* oa = scene.find(ids[a]);
        const auto* ob = scene.find(ids[b]);
        if (!oa->mesh || !ob->mesh) continue;
        if (gravity_box(*oa->mesh, oa->pose, g).intersects(gravity_box(*ob->mesh, ob->pose, g), 1e-9))
          res.warnings.push_back("objects " + std::to_string(oa->id) + " and " +
                                 std::to_string(ob->id) + " interpenetrate (not resolved)");
      }
  return res;
}

// Lowest vertex height of the subject above its support's top face (floor for floor support).
inline double support_gap(const SceneDescription& scene, const SpatialRelation& rel) {
  const PlacedObject& obj = *scene.find(rel.subject);
  const Vec3 up = -scene.gravity;
  double height = scene.floor_height;
  if (rel.target.kind == RelationTarget::Kind::Object) {
    const PlacedObject& sup = *scene.find(rel.target.id);
    height = gravity_box(*sup.mesh, sup.pose, scene.gravity).hi.z();
  }
  return min_height(*obj.mesh, obj.pose, up) - height;
}

}  // namespace c3dr
