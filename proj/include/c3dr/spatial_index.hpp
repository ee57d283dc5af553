#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "c3dr/geometry.hpp"

namespace c3dr {

// Squared distance evaluated the same way by the index and by a linear scan, so that the
// two agree bit-for-bit.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();
};

// Static k-d tree over a borrowed point array. Queries are exact.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points) : points_(&points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!order_.empty()) nodes_.reserve(2 * order_.size() / kLeafSize + 2);
    if (!order_.empty()) build(0, order_.size());
  }

  std::size_t size() const { return order_.size(); }

  // Nearest point, optionally skipping one index (within-cloud queries).
  Neighbor nearest(const Vec3& query, std::size_t exclude = npos) const {
    Neighbor best;
    if (!nodes_.empty()) search(0, query, exclude, best);
    return best;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  static constexpr std::size_t kLeafSize = 8;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin((*points_)[order_[i]]);
      hi = hi.cwiseMax((*points_)[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (!(hi(axis) > lo(axis))) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    const auto& pts = *points_;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) { return pts[a](axis) < pts[b](axis); });
    const double split = pts[order_[mid]](axis);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::size_t id, const Vec3& q, std::size_t exclude, Neighbor& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == exclude) continue;
        const double d = squared_distance(q, (*points_)[idx]);
        if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
          best = {idx, d};
        }
      }
      return;
    }
    // Left subtree holds coordinates <= split, right subtree >= split.
    const double diff = q(node.axis) - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, exclude, best);
    if (diff * diff <= best.squared_distance) search(far, q, exclude, best);
  }

  const std::vector<Vec3>* points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

// Cross-cloud distance: min over the cloud of ||point - q||.
inline double nearest_neighbor_distance(const Vec3& point, const PointCloud& cloud) {
  if (cloud.empty()) throw ArgumentError("nearest_neighbor_distance: empty cloud");
  const KdTree tree(cloud.points);
  return std::sqrt(tree.nearest(point).squared_distance);
}

// Within-cloud distance from cloud[index] to the nearest other point.
inline double nearest_other_distance(std::size_t index, const PointCloud& cloud) {
  if (cloud.size() < 2) throw ArgumentError("nearest_other_distance: need at least 2 points");
  if (index >= cloud.size()) throw ArgumentError("nearest_other_distance: index out of range");
  const KdTree tree(cloud.points);
  return std::sqrt(tree.nearest(cloud.points[index], index).squared_distance);
}

}  // namespace c3dr
