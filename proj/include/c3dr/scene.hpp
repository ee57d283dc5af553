#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c3dr/geometry.hpp"

namespace c3dr {

enum class RelationKind { SupportedBy, AttachedToWall, FreeStanding };

inline const char* to_string(RelationKind k) {
  switch (k) {
    case RelationKind::SupportedBy: return "supported_by";
    case RelationKind::AttachedToWall: return "attached_to_wall";
    case RelationKind::FreeStanding: return "free_standing";
  }
  return "?";
}

inline std::optional<RelationKind> parse_relation_kind(const std::string& s) {
  if (s == "supported_by") return RelationKind::SupportedBy;
  if (s == "attached_to_wall") return RelationKind::AttachedToWall;
  if (s == "free_standing") return RelationKind::FreeStanding;
  return std::nullopt;
}

struct RelationTarget {
  enum class Kind { None, Object, Floor, Wall };
  Kind kind = Kind::None;
  int id = 0;

  static RelationTarget none() { return {}; }
  static RelationTarget floor() { return {Kind::Floor, 0}; }
  static RelationTarget object(int id) { return {Kind::Object, id}; }
  static RelationTarget wall(int id) { return {Kind::Wall, id}; }

  bool operator==(const RelationTarget&) const = default;
};

// Textual form used in relation files: "floor", "wall:<id>", "<object id>", "-".
inline std::string to_string(const RelationTarget& t) {
  switch (t.kind) {
    case RelationTarget::Kind::None: return "-";
    case RelationTarget::Kind::Floor: return "floor";
    case RelationTarget::Kind::Wall: return "wall:" + std::to_string(t.id);
    case RelationTarget::Kind::Object: return std::to_string(t.id);
  }
  return "-";
}

inline std::optional<RelationTarget> parse_relation_target(const std::string& s) {
  if (s == "-") return RelationTarget::none();
  if (s == "floor") return RelationTarget::floor();
  try {
    std::size_t used = 0;
    if (s.rfind("wall:", 0) == 0) {
      const int id = std::stoi(s.substr(5), &used);
      if (used + 5 != s.size()) return std::nullopt;
      return RelationTarget::wall(id);
    }
    const int id = std::stoi(s, &used);
    if (used != s.size()) return std::nullopt;
    return RelationTarget::object(id);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct SpatialRelation {
  int subject = 0;
  RelationKind kind = RelationKind::FreeStanding;
  RelationTarget target;

  bool operator==(const SpatialRelation&) const = default;
};

// Plane normal·x = offset; the normal points into the room.
struct WallPlane {
  int id = 0;
  Vec3 normal = Vec3::UnitX();
  double offset = 0.0;
};

struct PlacedObject {
  int id = 0;
  std::string category;
  std::string mesh_ref;                  // relative to the scene file directory
  std::shared_ptr<const TriMesh> mesh;   // loaded asset, may be null before resolution
  SimilarityTransform pose;
  std::vector<SpatialRelation> relations;
};

struct SceneDescription {
  std::vector<PlacedObject> objects;
  Vec3 gravity = Vec3(0, 0, -1);
  double floor_height = 0.0;  // floor plane height along -gravity
  std::vector<WallPlane> walls;

  const PlacedObject* find(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  PlacedObject* find(int id) {
    for (auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }

  const WallPlane* find_wall(int id) const {
    for (const auto& w : walls)
      if (w.id == id) return &w;
    return nullptr;
  }

  std::vector<SpatialRelation> relations() const {
    std::vector<SpatialRelation> out;
    for (const auto& o : objects) out.insert(out.end(), o.relations.begin(), o.relations.end());
    return out;
  }

  void sort_by_id() {
    std::sort(objects.begin(), objects.end(),
              [](const PlacedObject& a, const PlacedObject& b) { return a.id < b.id; });
  }

  void validate() const {
    std::set<int> ids;
    for (const auto& o : objects) {
      if (!ids.insert(o.id).second)
        throw ArgumentError("scene: duplicate instance id " + std::to_string(o.id));
      o.pose.validate();
      for (const auto& r : o.relations)
        if (r.subject != o.id)
          throw ArgumentError("scene: relation subject does not match object " +
                              std::to_string(o.id));
    }
    if (std::abs(gravity.norm() - 1.0) > 1e-6) throw ArgumentError("scene: gravity not unit");
  }
};

// One relation per line: "<subject> <kind> <target>". '#' starts a comment.
inline std::vector<SpatialRelation> parse_relations(std::istream& in) {
  std::vector<SpatialRelation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string subject, kind, target, extra;
    if (!(ls >> subject)) continue;
    if (!(ls >> kind >> target) || (ls >> extra))
      throw ArgumentError("relations line " + std::to_string(line_no) + ": expected 3 fields");
    const auto k = parse_relation_kind(kind);
    const auto t = parse_relation_target(target);
    const auto s = parse_relation_target(subject);
    if (!k || !t || !s || s->kind != RelationTarget::Kind::Object)
      throw ArgumentError("relations line " + std::to_string(line_no) + ": malformed relation");
    out.push_back({s->id, *k, *t});
  }
  return out;
}

inline std::string format_relations(const std::vector<SpatialRelation>& rels) {
  std::ostringstream os;
  for (const auto& r : rels)
    os << r.subject << ' ' << to_string(r.kind) << ' ' << to_string(r.target) << '\n';
  return os.str();
}

}  // namespace c3dr
