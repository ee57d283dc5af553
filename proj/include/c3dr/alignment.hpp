#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "c3dr/bundle_io.hpp"
#include "c3dr/rasterizer.hpp"
#include "c3dr/spatial_index.hpp"
#include "c3dr/view_select.hpp"

namespace c3dr {

struct Correspondence {
  Vec2 real;      // pixel in the observed view
  Vec2 rendered;  // pixel in the rendered view
  double confidence = 1.0;
};

// Everything a matcher may look at for one view. Both images share `camera`.
struct MatchRequest {
  int instance_id;
  int frame_id;
  int iteration;
  const std::string& category;
  const CameraModel& camera;
  const DepthMap& real_depth;
  const Mask& real_mask;
  const DepthMap& rendered_depth;
  const Mask& rendered_mask;
  const TriMesh& asset;
  const SimilarityTransform& pose;
  const std::optional<std::string>& real_image;
};

class CorrespondenceProvider {
 public:
  virtual ~CorrespondenceProvider() = default;
  virtual std::vector<Correspondence> match(const MatchRequest& request) = 0;
  virtual bool thread_safe() const { return false; }
};

struct AlignmentConfig {
  int temporal_radius = 2;
  int iterations = 5;
  double confidence_floor = 0.5;
  double outlier_factor = 3.0;
  double min_inlier_threshold = 1e-6;  // meters; keeps exact correspondences from being trimmed
  int max_trim_rounds = 10;
  RenderOptions render;

  void validate() const {
    if (temporal_radius < 0) throw ArgumentError("alignment: temporal radius must be >= 0");
    if (iterations < 1) throw ArgumentError("alignment: iteration count must be >= 1");
  }
};

// Depth at a sub-pixel location. Integer locations read the raster directly; otherwise inverse
// depth is interpolated bilinearly when all four neighbors are valid and within 5% of each other
// (exact on planar patches), with a nearest-pixel fallback.
inline std::optional<double> sample_depth(const DepthMap& depth, double u, double v) {
  if (!(u >= 0.0 && v >= 0.0 && u <= depth.width - 1 && v <= depth.height - 1)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const double fu = u - x0, fv = v - y0;
  if (fu == 0.0 && fv == 0.0) {
    if (!depth.valid(x0, y0)) return std::nullopt;
    return depth.at(x0, y0);
  }
  const int x1 = std::min(x0 + 1, depth.width - 1);
  const int y1 = std::min(y0 + 1, depth.height - 1);
  const bool all_valid = depth.valid(x0, y0) && depth.valid(x1, y0) && depth.valid(x0, y1) &&
                         depth.valid(x1, y1);
  if (all_valid) {
    const double d[4] = {depth.at(x0, y0), depth.at(x1, y0), depth.at(x0, y1), depth.at(x1, y1)};
    const double lo = std::min({d[0], d[1], d[2], d[3]});
    const double hi = std::max({d[0], d[1], d[2], d[3]});
    if (hi <= lo * 1.05) {
      const double inv = (1 - fu) * (1 - fv) / d[0] + fu * (1 - fv) / d[1] + (1 - fu) * fv / d[2] +
                         fu * fv / d[3];
      return 1.0 / inv;
    }
  }
  const int xn = static_cast<int>(std::lround(u));
  const int yn = static_cast<int>(std::lround(v));
  if (!depth.valid(xn, yn)) return std::nullopt;
  return depth.at(xn, yn);
}

struct LiftedPairs {
  std::vector<Vec3> real;
  std::vector<Vec3> rendered;
  std::size_t dropped = 0;

  std::size_t size() const { return real.size(); }
};

// Back-projects p with the observed depth and q with the rendered depth through the same camera.
// Pairs lacking depth on either side are dropped; order is preserved.
inline LiftedPairs lift_correspondences(const std::vector<Correspondence>& pairs,
                                        const DepthMap& real_depth, const DepthMap& rendered_depth,
                                        const CameraModel& cam) {
  LiftedPairs out;
  for (const auto& c : pairs) {
    const auto dp = sample_depth(real_depth, c.real.x(), c.real.y());
    const auto dq = sample_depth(rendered_depth, c.rendered.x(), c.rendered.y());
    if (!dp || !dq) {
      ++out.dropped;
      continue;
    }
    out.real.push_back(backproject_unchecked(c.real.x(), c.real.y(), *dp, cam));
    out.rendered.push_back(backproject_unchecked(c.rendered.x(), c.rendered.y(), *dq, cam));
  }
  return out;
}

struct AlignmentView {
  int frame_id = 0;
  const Frame* frame = nullptr;
  Mask real_mask;
};

// Frames within `radius` positions of the selected frame, clamped to the sequence.
inline std::vector<AlignmentView> alignment_views(int selected_frame, const SceneBundle& bundle,
                                                  const std::vector<int>& track_ids, int radius) {
  const auto center = bundle.frame_index(selected_frame);
  if (!center) throw ArgumentError("alignment: unknown frame " + std::to_string(selected_frame));
  const long lo = std::max<long>(0, static_cast<long>(*center) - radius);
  const long hi = std::min<long>(static_cast<long>(bundle.frames.size()) - 1,
                                 static_cast<long>(*center) + radius);
  std::vector<AlignmentView> views;
  for (long i = lo; i <= hi; ++i) {
    const Frame& f = bundle.frames[static_cast<std::size_t>(i)];
    views.push_back({f.id, &f, group_mask_in_frame(track_ids, f)});
  }
  return views;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + v.size() / 2;
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

struct RobustFit {
  SimilarityTransform transform;
  std::size_t inliers = 0;
};

// Umeyama fit of rendered -> real with iterated trimming at factor × median residual.
inline RobustFit robust_similarity_fit(const std::vector<Vec3>& rendered,
                                       const std::vector<Vec3>& real, const AlignmentConfig& cfg) {
  RobustFit fit{umeyama_fit(rendered, real), rendered.size()};
  std::vector<char> keep(rendered.size(), 1);
  for (int round = 0; round < cfg.max_trim_rounds; ++round) {
    std::vector<double> res(rendered.size());
    for (std::size_t i = 0; i < rendered.size(); ++i)
      res[i] = (real[i] - fit.transform.apply(rendered[i])).norm();
    const double thr = std::max(cfg.outlier_factor * median_of(res), cfg.min_inlier_threshold);
    std::vector<char> next(rendered.size());
    std::vector<Vec3> src, dst;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
      next[i] = res[i] <= thr;
      if (next[i]) {
        src.push_back(rendered[i]);
        dst.push_back(real[i]);
      }
    }
    if (next == keep || src.size() < 3) break;
    try {
      fit = {umeyama_fit(src, dst), src.size()};
    } catch (const EstimationError&) {
      break;
    }
    keep = std::move(next);
  }
  return fit;
}

struct ViewRender {
  DepthMap depth;
  Mask mask;
};

inline std::vector<ViewRender> render_views(const TriMesh& asset, const SimilarityTransform& pose,
                                            const std::vector<AlignmentView>& views,
                                            const AlignmentConfig& cfg) {
  std::vector<ViewRender> out;
  out.reserve(views.size());
  for (const auto& v : views) {
    auto [d, m] = render_depth_mask(asset, pose, v.frame->camera, cfg.render);
    out.push_back({std::move(d), std::move(m)});
  }
  return out;
}

struct MeanIou {
  double value = 0.0;
  std::size_t counted = 0;  // views with a nonempty real or rendered mask
};

inline MeanIou mean_view_iou(const std::vector<ViewRender>& renders,
                             const std::vector<AlignmentView>& views) {
  MeanIou m;
  double sum = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto iou = mask_iou(renders[i].mask, views[i].real_mask);
    if (iou.both_empty) continue;
    sum += iou.value;
    ++m.counted;
  }
  m.value = m.counted ? sum / static_cast<double>(m.counted) : 0.0;
  return m;
}

struct InstanceContext {
  int instance_id = 0;
  std::string category;
};

struct IterationResult {
  SimilarityTransform pose;
  SimilarityTransform delta;
  bool stalled = false;
  std::size_t pairs = 0;
  std::size_t inliers = 0;
};

inline IterationResult align_from_renders(const TriMesh& asset, const SimilarityTransform& prev,
                                          const std::vector<AlignmentView>& views,
                                          const std::vector<ViewRender>& renders,
                                          CorrespondenceProvider& provider,
                                          const AlignmentConfig& cfg, const InstanceContext& ctx,
                                          int iteration) {
  std::vector<Vec3> real, rendered;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Frame& f = *views[v].frame;
    const MatchRequest req{ctx.instance_id,     views[v].frame_id, iteration,        ctx.category,
                           f.camera,            f.depth,           views[v].real_mask, renders[v].depth,
                           renders[v].mask,     asset,             prev,             f.image};
    std::vector<Correspondence> pairs;
    for (auto& c : provider.match(req))
      if (c.confidence >= cfg.confidence_floor) pairs.push_back(c);
    const auto lifted = lift_correspondences(pairs, f.depth, renders[v].depth, f.camera);
    real.insert(real.end(), lifted.real.begin(), lifted.real.end());
    rendered.insert(rendered.end(), lifted.rendered.begin(), lifted.rendered.end());
  }
  IterationResult r{prev, SimilarityTransform::identity(), true, real.size(), 0};
  if (real.size() < 3) return r;
  try {
    const auto fit = robust_similarity_fit(rendered, real, cfg);
    r.delta = fit.transform;
    r.inliers = fit.inliers;
    r.pose = fit.transform.compose(prev);
    r.stalled = !r.pose.valid();
    if (r.stalled) r.pose = prev;
  } catch (const EstimationError&) {
    r.pose = prev;
  }
  return r;
}

// One render-match-fit step: the fitted correction is composed onto the previous pose.
inline IterationResult align_iteration(const TriMesh& asset, const SimilarityTransform& prev,
                                       const std::vector<AlignmentView>& views,
                                       CorrespondenceProvider& provider, const AlignmentConfig& cfg,
                                       const InstanceContext& ctx = {}, int iteration = 1) {
  const auto renders = render_views(asset, prev, views, cfg);
  return align_from_renders(asset, prev, views, renders, provider, cfg, ctx, iteration);
}

struct AlignmentResult {
  SimilarityTransform pose;
  std::size_t selected = 0;                   // index into iterates; 0 is the initializer
  std::vector<SimilarityTransform> iterates;  // T(0) .. T(K)
  std::vector<double> mean_iou;
  std::vector<bool> stalled;                  // per iterate i >= 1
};

// Runs K iterations and keeps the iterate (initializer included) with the highest mean mask IoU
// over the views; ties go to the earliest iterate.
inline AlignmentResult iterative_align(const TriMesh& asset, const SimilarityTransform& initial,
                                       const std::vector<AlignmentView>& views,
                                       CorrespondenceProvider& provider,
                                       const AlignmentConfig& cfg, const InstanceContext& ctx = {}) {
  cfg.validate();
  initial.validate();
  AlignmentResult res;
  res.iterates.push_back(initial);
  res.stalled.push_back(false);
  bool any_counted = false;
  for (int i = 0;; ++i) {
    const auto renders = render_views(asset, res.iterates.back(), views, cfg);
    const auto iou = mean_view_iou(renders, views);
    any_counted = any_counted || iou.counted > 0;
    res.mean_iou.push_back(iou.value);
    if (i == cfg.iterations) break;
    auto step = align_from_renders(asset, res.iterates.back(), views, renders, provider, cfg, ctx,
                                   i + 1);
    res.iterates.push_back(step.pose);
    res.stalled.push_back(step.stalled);
  }
  const bool all_stalled =
      std::all_of(res.stalled.begin() + 1, res.stalled.end(), [](bool s) { return s; });
  if (all_stalled && !any_counted)
    throw AlignmentError("instance " + std::to_string(ctx.instance_id) +
                         ": no correspondences and nothing rendered in any view");
  for (std::size_t i = 1; i < res.mean_iou.size(); ++i)
    if (res.mean_iou[i] > res.mean_iou[res.selected]) res.selected = i;
  res.pose = res.iterates[res.selected];
  return res;
}

// Classical ICP surrogate: pairs each rendered-surface pixel with the observed in-mask pixel
// whose lifted point is nearest in 3D.
class GeometricNearestNeighborProvider : public CorrespondenceProvider {
 public:
  explicit GeometricNearestNeighborProvider(int stride = 2) : stride_(std::max(1, stride)) {}

  std::vector<Correspondence> match(const MatchRequest& r) override {
    std::vector<Vec3> real_pts;
    std::vector<Vec2> real_px;
    for (int y = 0; y < r.real_depth.height; y += stride_)
      for (int x = 0; x < r.real_depth.width; x += stride_)
        if (r.real_mask.at(x, y) && r.real_depth.valid(x, y)) {
          real_pts.push_back(backproject_unchecked(x, y, r.real_depth.at(x, y), r.camera));
          real_px.emplace_back(x, y);
        }
    std::vector<Correspondence> out;
    if (real_pts.empty()) return out;
    const KdTree tree(real_pts);
    for (int y = 0; y < r.rendered_depth.height; y += stride_)
      for (int x = 0; x < r.rendered_depth.width; x += stride_) {
        if (!r.rendered_mask.at(x, y) || !r.rendered_depth.valid(x, y)) continue;
        const Vec3 q = backproject_unchecked(x, y, r.rendered_depth.at(x, y), r.camera);
        out.push_back({real_px[tree.nearest(q).index], Vec2(x, y), 1.0});
      }
    return out;
  }

  bool thread_safe() const override { return true; }

 private:
  int stride_;
};

// ---------------------------------------------------------------------------
// File protocol for out-of-process matchers.
//   request dir:  real_depth.depth, real_mask.pgm, rendered_depth.depth, rendered_mask.pgm,
//                 camera.json, request.json
//   response:     pairs.txt, one "u_real v_real u_rendered v_rendered confidence" per line

inline std::string format_pairs(const std::vector<Correspondence>& pairs) {
  std::string out;
  for (const auto& c : pairs)
    out += format_real(c.real.x()) + " " + format_real(c.real.y()) + " " +
           format_real(c.rendered.x()) + " " + format_real(c.rendered.y()) + " " +
           format_real(c.confidence) + "\n";
  return out;
}

inline std::vector<Correspondence> parse_pairs(const std::string& text, const std::string& file,
                                               const CameraModel& cam) {
  std::vector<Correspondence> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    Correspondence c;
    if (!(ls >> c.real.x())) continue;
    if (!(ls >> c.real.y() >> c.rendered.x() >> c.rendered.y() >> c.confidence))
      throw LoadError(file, "line " + std::to_string(line_no), "expected 5 numbers");
    if (!cam.contains(c.real.x(), c.real.y()) || !cam.contains(c.rendered.x(), c.rendered.y()))
      throw LoadError(file, "line " + std::to_string(line_no), "pixel outside image bounds");
    if (!(c.confidence >= 0.0 && c.confidence <= 1.0))
      throw LoadError(file, "line " + std::to_string(line_no), "confidence outside [0, 1]");
    out.push_back(c);
  }
  return out;
}

inline void write_match_request(const MatchRequest& r, const fs::path& dir) {
  write_file_bytes(dir / "real_depth.depth", encode_depth(r.real_depth));
  write_file_bytes(dir / "real_mask.pgm", encode_mask(r.real_mask));
  write_file_bytes(dir / "rendered_depth.depth", encode_depth(r.rendered_depth));
  write_file_bytes(dir / "rendered_mask.pgm", encode_mask(r.rendered_mask));
  write_file_bytes(dir / "camera.json", detail::camera_to_json(r.camera).dump(1) + "\n");
  nlohmann::json meta{{"instance", r.instance_id}, {"frame", r.frame_id},
                      {"iteration", r.iteration},  {"category", r.category}};
  if (r.real_image) meta["real_image"] = *r.real_image;
  write_file_bytes(dir / "request.json", meta.dump(1) + "\n");
}

// Runs `<command> <request dir> <pairs file>` per view.
class CommandCorrespondenceProvider : public CorrespondenceProvider {
 public:
  CommandCorrespondenceProvider(std::string command, fs::path work_dir)
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {}

  std::vector<Correspondence> match(const MatchRequest& r) override {
    const fs::path dir = work_dir_ / ("match_" + std::to_string(r.instance_id) + "_" +
                                      std::to_string(r.iteration) + "_" + std::to_string(r.frame_id));
    write_match_request(r, dir);
    const fs::path pairs = dir / "pairs.txt";
    const std::string cmd = command_ + " '" + dir.string() + "' '" + pairs.string() + "'";
    if (std::system(cmd.c_str()) != 0) throw ProviderError("matcher command failed: " + cmd);
    const auto bytes = read_file_bytes(pairs, "pairs");
    return parse_pairs(std::string(bytes.begin(), bytes.end()), pairs.string(), r.camera);
  }

 private:
  std::string command_;
  fs::path work_dir_;
};

}  // namespace c3dr
