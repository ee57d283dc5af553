#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "c3dr/bundle_io.hpp"
#include "c3dr/parallel.hpp"
#include "c3dr/spatial_index.hpp"

namespace c3dr {

struct InstanceTrack {
  int id = 0;
  std::string category;
  std::vector<int> frames;  // frame ids holding a mask for this track, ascending
  PointCloud cloud;         // aggregated, filled by aggregate_cloud
  int group = -1;           // merged identity, filled by merge_instances
};

inline const InstanceObservation* find_observation(const SceneBundle& bundle, int frame_id,
                                                   int track) {
  const Frame* f = bundle.find_frame(frame_id);
  if (!f) return nullptr;
  for (const auto& inst : f->instances)
    if (inst.track == track) return &inst;
  return nullptr;
}

// Tracks present in the bundle, ordered by id.
inline std::vector<InstanceTrack> collect_tracks(const SceneBundle& bundle) {
  std::map<int, InstanceTrack> by_id;
  for (const auto& f : bundle.frames) {
    for (const auto& inst : f.instances) {
      auto [it, fresh] = by_id.try_emplace(inst.track);
      auto& t = it->second;
      if (fresh) {
        t.id = inst.track;
        t.category = inst.category;
      } else if (t.category != inst.category) {
        throw ArgumentError("track " + std::to_string(inst.track) +
                            " changes category between frames");
      }
      t.frames.push_back(f.id);
    }
  }
  std::vector<InstanceTrack> out;
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

struct AggregateOptions {
  double voxel_size = 0.01;     // meters; <= 0 disables voxel subsampling
  std::size_t max_points = 50000;
};

// Keeps the first point that falls in each voxel, in input order.
inline PointCloud voxel_subsample(const PointCloud& cloud, double voxel) {
  if (voxel <= 0.0) return cloud;
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      std::size_t h = 1469598103934665603ull;
      for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
      return h;
    }
  };
  std::unordered_set<std::array<std::int64_t, 3>, KeyHash> seen;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    if (!seen.insert(key).second) continue;
    out.points.push_back(p);
    if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

// Back-projects every in-mask pixel with valid depth across the track's frames.
inline PointCloud aggregate_cloud(const InstanceTrack& track, const SceneBundle& bundle,
                                  const AggregateOptions& opt = {}) {
  PointCloud raw;
  for (int fid : track.frames) {
    const Frame* frame = bundle.find_frame(fid);
    const InstanceObservation* obs = find_observation(bundle, fid, track.id);
    if (!frame || !obs) continue;
    for (int y = 0; y < frame->depth.height; ++y)
      for (int x = 0; x < frame->depth.width; ++x)
        if (obs->mask.at(x, y) && frame->depth.valid(x, y))
          raw.points.push_back(backproject_unchecked(x, y, frame->depth.at(x, y), frame->camera));
  }
  if (raw.empty())
    throw EmptyTrackError("track " + std::to_string(track.id) + " has no valid-depth pixels");
  PointCloud out = voxel_subsample(raw, opt.voxel_size);
  if (opt.max_points > 0 && out.size() > opt.max_points) {
    const std::size_t stride = (out.size() + opt.max_points - 1) / opt.max_points;
    PointCloud capped;
    for (std::size_t i = 0; i < out.size(); i += stride) capped.points.push_back(out.points[i]);
    out = std::move(capped);
  }
  return out;
}

inline double cloud_density(const PointCloud& cloud, const KdTree& tree) {
  double sum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    sum += std::sqrt(tree.nearest(cloud.points[i], i).squared_distance);
  return sum / static_cast<double>(cloud.size());
}

// Mean distance from each point to its nearest other point.
inline double cloud_density(const PointCloud& cloud) {
  if (cloud.size() < 2)
    throw DensityUndefinedError("cloud_density: need at least 2 points, got " +
                                std::to_string(cloud.size()));
  const KdTree tree(cloud.points);
  return cloud_density(cloud, tree);
}

inline double overlap_ratio(const PointCloud& src, const KdTree& dst_tree, double tau) {
  std::size_t hits = 0;
  for (const auto& p : src.points)
    hits += std::sqrt(dst_tree.nearest(p).squared_distance) < tau;
  return static_cast<double>(hits) / static_cast<double>(src.size());
}

// Fraction of src points strictly closer than tau to dst.
inline double overlap_ratio(const PointCloud& src, const PointCloud& dst, double tau) {
  if (src.empty()) throw ArgumentError("overlap_ratio: empty source cloud");
  if (dst.empty()) throw ArgumentError("overlap_ratio: empty destination cloud");
  if (!(tau > 0.0)) throw ArgumentError("overlap_ratio: tau must be positive");
  const KdTree tree(dst.points);
  return overlap_ratio(src, tree, tau);
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

struct MergeOptions {
  double tau_multiplier = 3.0;
  double overlap_threshold = 0.5;  // strict: ratio must exceed it
  std::size_t workers = 1;
};

struct PairOverlap {
  int a = 0;
  int b = 0;
  double a_to_b = 0.0;
  double b_to_a = 0.0;
  bool matched = false;
};

struct MergeResult {
  std::map<int, int> group_of;  // track id -> group id (smallest track id in the group)
  std::vector<PairOverlap> pairs;
  std::vector<std::string> warnings;
};

// Pairwise same-category overlap test followed by a union-find fold over the matches.
inline MergeResult merge_instances(std::vector<InstanceTrack>& tracks,
                                   const MergeOptions& opt = {}) {
  std::vector<std::size_t> order(tracks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return tracks[x].id < tracks[y].id; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (tracks[order[i]].id == tracks[order[i - 1]].id)
      throw ArgumentError("merge_instances: duplicate track id " + std::to_string(tracks[order[i]].id));

  MergeResult result;
  const std::size_t n = tracks.size();
  std::vector<std::optional<KdTree>> trees(n);
  std::vector<double> density(n, 0.0);
  std::vector<bool> mergeable(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = order[k];
    if (tracks[i].cloud.size() < 2) {
      result.warnings.push_back("track " + std::to_string(tracks[i].id) +
                                ": density undefined, kept as singleton");
      continue;
    }
    trees[i].emplace(tracks[i].cloud.points);
    density[i] = cloud_density(tracks[i].cloud, *trees[i]);
    mergeable[i] = true;
  }

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) {
      const auto i = order[x], j = order[y];
      if (mergeable[i] && mergeable[j] && tracks[i].category == tracks[j].category)
        candidates.emplace_back(i, j);
    }

  result.pairs.resize(candidates.size());
  parallel_for(candidates.size(), opt.workers, [&](std::size_t c) {
    const auto [i, j] = candidates[c];
    PairOverlap p{tracks[i].id, tracks[j].id};
    p.a_to_b = overlap_ratio(tracks[i].cloud, *trees[j], opt.tau_multiplier * density[i]);
    p.b_to_a = overlap_ratio(tracks[j].cloud, *trees[i], opt.tau_multiplier * density[j]);
    p.matched = p.a_to_b > opt.overlap_threshold || p.b_to_a > opt.overlap_threshold;
    result.pairs[c] = p;
  });

  UnionFind uf(n);
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (result.pairs[c].matched) uf.unite(candidates[c].first, candidates[c].second);

  std::map<std::size_t, int> root_min;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = uf.find(i);
    auto it = root_min.find(r);
    if (it == root_min.end() || tracks[i].id < it->second) root_min[r] = tracks[i].id;
  }
  for (std::size_t i = 0; i < n; ++i) {
    tracks[i].group = root_min[uf.find(i)];
    result.group_of[tracks[i].id] = tracks[i].group;
  }
  return result;
}

// Group map file: "<track id> <group id>" per line, '#' comments.
inline std::string format_group_map(const std::map<int, int>& group_of) {
  std::string out = "# track group\n";
  for (const auto& [t, g] : group_of) out += std::to_string(t) + " " + std::to_string(g) + "\n";
  return out;
}

inline std::map<int, int> parse_group_map(std::istream& in) {
  std::map<int, int> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    int t = 0, g = 0;
    if (!(ls >> t)) continue;
    if (!(ls >> g)) throw ArgumentError("group map line " + std::to_string(line_no) + ": missing group");
    out[t] = g;
  }
  return out;
}

}  // namespace c3dr
