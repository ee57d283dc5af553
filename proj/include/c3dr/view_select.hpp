#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "c3dr/bundle_io.hpp"
#include "c3dr/dedup.hpp"

namespace c3dr {

inline constexpr double kMinDiscontinuity = 0.05;

// δ = max(0.05 m, 5 × median |Δdepth| over 4-neighbor pairs inside the mask).
inline double adaptive_discontinuity(const Mask& mask, const DepthMap& depth) {
  std::vector<double> diffs;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      if (!mask.at(x, y) || !depth.valid(x, y)) continue;
      if (x + 1 < depth.width && mask.at(x + 1, y) && depth.valid(x + 1, y))
        diffs.push_back(std::abs(double(depth.at(x + 1, y)) - depth.at(x, y)));
      if (y + 1 < depth.height && mask.at(x, y + 1) && depth.valid(x, y + 1))
        diffs.push_back(std::abs(double(depth.at(x, y + 1)) - depth.at(x, y)));
    }
  if (diffs.empty()) return kMinDiscontinuity;
  auto mid = diffs.begin() + diffs.size() / 2;
  std::nth_element(diffs.begin(), mid, diffs.end());
  double median = *mid;
  if (diffs.size() % 2 == 0) {
    const double lower = *std::max_element(diffs.begin(), mid);
    median = 0.5 * (median + lower);
  }
  return std::max(kMinDiscontinuity, 5.0 * median);
}

// A steep but continuous face has similar steps on both sides of a pixel pair; a real jump
// stands out against them by this factor.
inline constexpr double kLocalJumpFactor = 5.0;

// Grid triangulation of the in-mask, valid-depth pixels: two triangles per fully covered 2x2
// quad, split along the top-left to bottom-right diagonal. A triangle is dropped when one of
// its axis-aligned edges is a depth jump: larger than `discontinuity` and larger than
// kLocalJumpFactor times both neighboring steps along the same axis.
inline TriMesh lift_mask_surface(const Mask& mask, const DepthMap& depth, const CameraModel& cam,
                                 std::optional<double> discontinuity = std::nullopt) {
  if (mask.width != depth.width || mask.height != depth.height || cam.width != depth.width ||
      cam.height != depth.height)
    throw ArgumentError("lift_mask_surface: mask, depth and camera dimensions differ");
  const double delta = discontinuity ? *discontinuity : adaptive_discontinuity(mask, depth);

  const int w = depth.width, h = depth.height;
  std::vector<int> vid(static_cast<std::size_t>(w) * h, -1);
  TriMesh mesh;
  bool any = false;
  auto usable = [&](int x, int y) { return mask.at(x, y) && depth.valid(x, y); };
  auto vertex = [&](int x, int y) {
    int& slot = vid[static_cast<std::size_t>(y) * w + x];
    if (slot < 0) {
      slot = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(backproject_unchecked(x, y, depth.at(x, y), cam));
    }
    return slot;
  };
  auto step = [&](int x0, int y0, int x1, int y1) {
    if (x0 < 0 || y0 < 0 || x1 >= w || y1 >= h || !usable(x0, y0) || !usable(x1, y1)) return -1.0;
    return std::abs(double(depth.at(x1, y1)) - double(depth.at(x0, y0)));
  };
  // pair (x,y)-(x+dx,y+dy) breaks the surface when it exceeds δ and both flanking steps;
  // at the mask border a flank is missing and the pair is kept
  auto jump = [&](int x, int y, int dx, int dy) {
    const double d = step(x, y, x + dx, y + dy);
    if (d <= delta) return false;
    const double before = step(x - dx, y - dy, x, y), after = step(x + dx, y + dy, x + 2 * dx, y + 2 * dy);
    if (before < 0 || after < 0) return false;
    return d > kLocalJumpFactor * std::max(before, after);
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!usable(x, y)) continue;
      any = true;
      if (x + 1 >= w || y + 1 >= h) continue;
      if (!usable(x + 1, y) || !usable(x, y + 1) || !usable(x + 1, y + 1)) continue;
      const bool top = jump(x, y, 1, 0), bottom = jump(x, y + 1, 1, 0);
      const bool left = jump(x, y, 0, 1), right = jump(x + 1, y, 0, 1);
      if (!top && !right)
        mesh.triangles.push_back({vertex(x, y), vertex(x + 1, y), vertex(x + 1, y + 1)});
      if (!left && !bottom)
        mesh.triangles.push_back({vertex(x, y), vertex(x + 1, y + 1), vertex(x, y + 1)});
    }
  if (!any) throw EmptySurfaceError("lift_mask_surface: no valid in-mask pixels");
  return mesh;
}

inline double surface_area(const TriMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles)
    area += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
  return area;
}

struct GroupObservation {
  int frame_id = 0;
  Mask mask;  // union of the group's track masks in this frame
};

// Per-frame union of the masks of every track in the group, ascending frame id.
inline std::vector<GroupObservation> group_observations(const std::vector<int>& track_ids,
                                                        const SceneBundle& bundle) {
  std::vector<GroupObservation> out;
  for (const auto& f : bundle.frames) {
    std::optional<Mask> merged;
    for (const auto& inst : f.instances) {
      if (std::find(track_ids.begin(), track_ids.end(), inst.track) == track_ids.end()) continue;
      if (!merged) merged = inst.mask;
      else *merged |= inst.mask;
    }
    if (merged) out.push_back({f.id, std::move(*merged)});
  }
  return out;
}

inline Mask group_mask_in_frame(const std::vector<int>& track_ids, const Frame& frame) {
  Mask m(frame.depth.width, frame.depth.height);
  for (const auto& inst : frame.instances)
    if (std::find(track_ids.begin(), track_ids.end(), inst.track) != track_ids.end())
      m |= inst.mask;
  return m;
}

enum class ViewCriterion { SurfaceArea, PixelArea };

struct ViewScore {
  int frame_id = 0;
  double score = 0.0;
  bool empty = true;
};

struct ViewSelection {
  int frame_id = 0;
  std::vector<ViewScore> scores;
};

// argmax of lifted surface area (or mask pixel count) over the observations; ties go to the
// lowest frame id.
inline ViewSelection select_optimal_view(const std::vector<GroupObservation>& observations,
                                         const SceneBundle& bundle,
                                         ViewCriterion criterion = ViewCriterion::SurfaceArea) {
  if (observations.empty()) throw SelectionError("select_optimal_view: no observations");
  ViewSelection sel;
  std::optional<std::size_t> best;
  for (const auto& obs : observations) {
    const Frame* f = bundle.find_frame(obs.frame_id);
    if (!f) throw SelectionError("select_optimal_view: unknown frame " + std::to_string(obs.frame_id));
    ViewScore s{obs.frame_id, 0.0, true};
    if (criterion == ViewCriterion::PixelArea) {
      s.score = static_cast<double>(obs.mask.count());
      s.empty = s.score == 0.0;
    } else {
      try {
        const auto surface = lift_mask_surface(obs.mask, f->depth, f->camera);
        s.score = surface_area(surface);
        s.empty = surface.triangles.empty();
      } catch (const EmptySurfaceError&) {
      }
    }
    sel.scores.push_back(s);
    const auto& cur = sel.scores.back();
    if (cur.empty) continue;
    if (!best || cur.score > sel.scores[*best].score ||
        (cur.score == sel.scores[*best].score && cur.frame_id < sel.scores[*best].frame_id))
      best = sel.scores.size() - 1;
  }
  if (!best) throw SelectionError("select_optimal_view: every observation has an empty surface");
  sel.frame_id = sel.scores[*best].frame_id;
  return sel;
}

struct AssetRequest {
  int instance_id = 0;
  int frame_id = 0;
  std::string category;
  Mask mask;
  DepthMap depth;
  CameraModel camera;
};

// Mesh in the canonical object frame (+z up, +x forward) and its initial placement.
struct Asset {
  TriMesh mesh;
  SimilarityTransform initial_pose;
};

class AssetProvider {
 public:
  virtual ~AssetProvider() = default;
  virtual Asset generate(const AssetRequest& request) = 0;
  // Providers that are not thread-safe are called under a lock by the pipeline.
  virtual bool thread_safe() const { return false; }
};

inline AssetRequest make_asset_request(int instance_id, const std::string& category,
                                       const GroupObservation& obs, const SceneBundle& bundle) {
  const Frame* f = bundle.find_frame(obs.frame_id);
  if (!f) throw ArgumentError("asset request: unknown frame " + std::to_string(obs.frame_id));
  return {instance_id, obs.frame_id, category, obs.mask, f->depth, f->camera};
}

// Passes the selected observation to the provider and validates what comes back.
inline Asset generate_asset(const AssetRequest& request, AssetProvider& provider) {
  Asset asset;
  try {
    asset = provider.generate(request);
  } catch (const Error& e) {
    throw AssetGenerationError("instance " + std::to_string(request.instance_id) + ": " + e.what());
  }
  if (asset.mesh.empty())
    throw AssetGenerationError("instance " + std::to_string(request.instance_id) +
                               ": provider returned an empty mesh");
  try {
    asset.mesh.validate();
    asset.initial_pose.validate();
  } catch (const ArgumentError& e) {
    throw AssetGenerationError("instance " + std::to_string(request.instance_id) + ": " + e.what());
  }
  return asset;
}

// ---------------------------------------------------------------------------
// File protocol for out-of-process asset generators.
//   request dir:  mask.pgm, depth.depth, camera.json, request.json
//   response dir: asset.obj, transform.txt

inline void write_asset_request(const AssetRequest& r, const fs::path& dir) {
  write_file_bytes(dir / "mask.pgm", encode_mask(r.mask));
  write_file_bytes(dir / "depth.depth", encode_depth(r.depth));
  write_file_bytes(dir / "camera.json", detail::camera_to_json(r.camera).dump(1) + "\n");
  nlohmann::json meta{{"instance", r.instance_id}, {"frame", r.frame_id}, {"category", r.category}};
  write_file_bytes(dir / "request.json", meta.dump(1) + "\n");
}

inline AssetRequest read_asset_request(const fs::path& dir) {
  AssetRequest r;
  const auto meta_bytes = read_file_bytes(dir / "request.json", "request");
  const auto cam_bytes = read_file_bytes(dir / "camera.json", "camera");
  try {
    const auto meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
    r.instance_id = meta.at("instance").get<int>();
    r.frame_id = meta.at("frame").get<int>();
    r.category = meta.at("category").get<std::string>();
  } catch (const std::exception& e) {
    throw LoadError((dir / "request.json").string(), "request", e.what());
  }
  nlohmann::json cam;
  try {
    cam = nlohmann::json::parse(cam_bytes.begin(), cam_bytes.end());
  } catch (const std::exception& e) {
    throw LoadError((dir / "camera.json").string(), "camera", e.what());
  }
  r.camera = detail::camera_from_json(cam, (dir / "camera.json").string(), "camera");
  r.mask = decode_mask(read_file_bytes(dir / "mask.pgm", "mask"), (dir / "mask.pgm").string());
  r.depth = decode_depth(read_file_bytes(dir / "depth.depth", "depth"), (dir / "depth.depth").string());
  return r;
}

inline void write_asset_response(const Asset& a, const fs::path& dir) {
  save_obj(a.mesh, dir / "asset.obj");
  write_file_bytes(dir / "transform.txt", format_transform(a.initial_pose));
}

inline Asset read_asset_response(const fs::path& dir) {
  Asset a;
  a.mesh = load_obj(dir / "asset.obj");
  const auto bytes = read_file_bytes(dir / "transform.txt", "transform");
  a.initial_pose = parse_transform(std::string(bytes.begin(), bytes.end()),
                                   (dir / "transform.txt").string());
  return a;
}

// Runs `<command> <request dir> <response dir>` for each request.
class CommandAssetProvider : public AssetProvider {
 public:
  CommandAssetProvider(std::string command, fs::path work_dir)
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {}

  Asset generate(const AssetRequest& request) override {
    const auto tag = "asset_" + std::to_string(request.instance_id);
    const fs::path req = work_dir_ / tag / "request";
    const fs::path resp = work_dir_ / tag / "response";
    fs::create_directories(resp);
    write_asset_request(request, req);
    const std::string cmd = command_ + " '" + req.string() + "' '" + resp.string() + "'";
    if (std::system(cmd.c_str()) != 0) throw ProviderError("asset command failed: " + cmd);
    try {
      return read_asset_response(resp);
    } catch (const LoadError& e) {
      throw ProviderError(std::string("asset command produced no usable response: ") + e.what());
    }
  }

 private:
  std::string command_;
  fs::path work_dir_;
};

}  // namespace c3dr
