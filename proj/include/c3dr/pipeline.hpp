#pragma once

#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "c3dr/alignment.hpp"
#include "c3dr/bundle_io.hpp"
#include "c3dr/dedup.hpp"
#include "c3dr/discovery.hpp"
#include "c3dr/metrics.hpp"
#include "c3dr/parallel.hpp"
#include "c3dr/refinement.hpp"
#include "c3dr/synth.hpp"
#include "c3dr/view_select.hpp"

namespace c3dr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct Ablation {
  bool no_dedup = false;
  bool max_pixel_view = false;
  bool no_align = false;
  bool icp_align = false;
  bool no_refine = false;
  bool sg_only_refine = false;

  std::string label() const {
    std::vector<std::string> parts;
    if (no_dedup) parts.push_back("no-dedup");
    if (max_pixel_view) parts.push_back("max-pixel-view");
    if (no_align) parts.push_back("no-align");
    if (icp_align) parts.push_back("icp-align");
    if (no_refine) parts.push_back("no-refine");
    if (sg_only_refine) parts.push_back("sg-only-refine");
    if (parts.empty()) return "full";
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : "+") + p;
    return out;
  }

  // accepts the names used by `--ablate`
  void enable(const std::string& name) {
    if (name == "no-dedup") no_dedup = true;
    else if (name == "max-pixel-view") max_pixel_view = true;
    else if (name == "no-align") no_align = true;
    else if (name == "icp-align") icp_align = true;
    else if (name == "no-refine") no_refine = true;
    else if (name == "sg-only-refine") sg_only_refine = true;
    else throw ArgumentError("unknown ablation: " + name);
  }
};

struct PipelineConfig {
  std::size_t frames_k = 20;
  std::vector<std::vector<std::string>> synonyms;
  AggregateOptions aggregate;
  MergeOptions merge;
  AlignmentConfig align;
  double f_threshold = 0.05;
  std::size_t eval_samples = 20000;
  double match_gate = 0.5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // never part of any output
  Ablation ablation;

  SynonymTable synonym_table() const {
    SynonymTable t;
    for (const auto& g : synonyms) t.add_group(g);
    return t;
  }

  json to_json() const {
    return json{{"frames_k", frames_k},
                {"synonyms", synonyms},
                {"voxel_size", aggregate.voxel_size},
                {"max_points", aggregate.max_points},
                {"tau_multiplier", merge.tau_multiplier},
                {"overlap_threshold", merge.overlap_threshold},
                {"temporal_radius", align.temporal_radius},
                {"iterations", align.iterations},
                {"confidence_floor", align.confidence_floor},
                {"outlier_factor", align.outlier_factor},
                {"f_threshold", f_threshold},
                {"eval_samples", eval_samples},
                {"match_gate", match_gate},
                {"seed", seed},
                {"variant", ablation.label()}};
  }

  // Overrides from a config file; unknown keys are rejected.
  void apply_json(const json& j) {
    if (!j.is_object()) throw ArgumentError("config: expected a JSON object");
    for (const auto& [key, v] : j.items()) {
      try {
        if (key == "frames_k") frames_k = v.get<std::size_t>();
        else if (key == "synonyms") synonyms = v.get<std::vector<std::vector<std::string>>>();
        else if (key == "voxel_size") aggregate.voxel_size = v.get<double>();
        else if (key == "max_points") aggregate.max_points = v.get<std::size_t>();
        else if (key == "tau_multiplier") merge.tau_multiplier = v.get<double>();
        else if (key == "overlap_threshold") merge.overlap_threshold = v.get<double>();
        else if (key == "temporal_radius") align.temporal_radius = v.get<int>();
        else if (key == "iterations") align.iterations = v.get<int>();
        else if (key == "confidence_floor") align.confidence_floor = v.get<double>();
        else if (key == "outlier_factor") align.outlier_factor = v.get<double>();
        else if (key == "f_threshold") f_threshold = v.get<double>();
        else if (key == "eval_samples") eval_samples = v.get<std::size_t>();
        else if (key == "match_gate") match_gate = v.get<double>();
        else if (key == "seed") seed = v.get<std::uint64_t>();
        else if (key == "ablate") for (const auto& a : v) ablation.enable(a.get<std::string>());
        else throw ArgumentError("config: unknown key '" + key + "'");
      } catch (const json::exception& e) {
        throw ArgumentError("config: bad value for '" + key + "': " + e.what());
      }
    }
    validate();
  }

  void validate() const {
    if (frames_k < 1) throw ArgumentError("config: frames_k must be >= 1");
    if (!(merge.tau_multiplier > 0.0)) throw ArgumentError("config: tau_multiplier must be positive");
    if (!(f_threshold > 0.0)) throw ArgumentError("config: f_threshold must be positive");
    if (eval_samples < 1000) throw ArgumentError("config: eval_samples must be >= 1000");
    align.validate();
  }
};

inline json read_json_file(const fs::path& path, const std::string& field) {
  const auto bytes = read_file_bytes(path, field);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const std::exception& e) {
    throw LoadError(path.string(), field, std::string("malformed JSON: ") + e.what());
  }
}

inline void write_json_file(const fs::path& path, const json& j) { write_file_bytes(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Providers
//
// providers.json holds one entry per capability, each with a "type":
//   labels:    oracle | transcript {path}
//   assets:    oracle {scene, scale, angle_deg, translation, seed} | command {command}
//   matcher:   oracle {scene, noise, outliers, seed, samples} | icp {stride} | command {command}
//   relations: oracle {scene} | file {path} | none
// Relative paths resolve against the directory of providers.json.

class FileRelationProvider : public RelationProvider {
 public:
  explicit FileRelationProvider(std::vector<SpatialRelation> rels) : rels_(std::move(rels)) {}
  std::vector<SpatialRelation> relations(const SceneDescription& draft, const SceneBundle&) override {
    std::vector<SpatialRelation> out;
    for (const auto& r : rels_)
      if (draft.find(r.subject)) out.push_back(r);
    return out;
  }

 private:
  std::vector<SpatialRelation> rels_;
};

struct Providers {
  std::unique_ptr<LabelProvider> labels;
  std::unique_ptr<AssetProvider> assets;
  std::unique_ptr<CorrespondenceProvider> matcher;
  std::unique_ptr<RelationProvider> relations;
  json config;
};

namespace detail {

inline const json& provider_entry(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_object() || !j.at(key).contains("type"))
    throw ArgumentError(std::string("providers: missing '") + key + "' entry with a type");
  return j.at(key);
}

template <class T>
T opt_value(const json& e, const char* key, T fallback) {
  if (!e.contains(key)) return fallback;
  try {
    return e.at(key).get<T>();
  } catch (const json::exception& ex) {
    throw ArgumentError(std::string("providers: bad value for '") + key + "': " + ex.what());
  }
}

inline std::string req_string(const json& e, const char* key, const char* who) {
  if (!e.contains(key) || !e.at(key).is_string())
    throw ArgumentError(std::string("providers: ") + who + " needs a '" + key + "' string");
  return e.at(key).get<std::string>();
}

}  // namespace detail

inline Providers make_providers(const json& j, const fs::path& base_dir, const fs::path& work_dir) {
  if (!j.is_object()) throw ArgumentError("providers: expected a JSON object");
  Providers p;
  p.config = j;
  std::map<std::string, SceneDescription> scenes;
  auto scene_at = [&](const json& e, const char* who) -> const SceneDescription& {
    const auto rel = detail::req_string(e, "scene", who);
    auto it = scenes.find(rel);
    if (it == scenes.end()) it = scenes.emplace(rel, load_scene(base_dir / rel)).first;
    return it->second;
  };

  const auto& labels = detail::provider_entry(j, "labels");
  const auto ltype = labels.at("type").get<std::string>();
  if (ltype == "oracle") {
    p.labels = std::make_unique<OracleLabelProvider>();
  } else if (ltype == "transcript") {
    std::ifstream in(base_dir / detail::req_string(labels, "path", "transcript labels"));
    if (!in) throw ArgumentError("providers: transcript file not readable");
    p.labels = std::make_unique<TranscriptLabelProvider>(TranscriptLabelProvider::parse(in));
  } else {
    throw ArgumentError("providers: unknown labels type '" + ltype + "'");
  }

  const auto& assets = detail::provider_entry(j, "assets");
  const auto atype = assets.at("type").get<std::string>();
  if (atype == "oracle") {
    const Perturbation pert{detail::opt_value(assets, "scale", 1.0), detail::opt_value(assets, "angle_deg", 0.0),
                            detail::opt_value(assets, "translation", 0.0)};
    p.assets = std::make_unique<OracleAssetProvider>(scene_at(assets, "oracle assets"), pert,
                                                     detail::opt_value<std::uint64_t>(assets, "seed", 0));
  } else if (atype == "command") {
    p.assets = std::make_unique<CommandAssetProvider>(detail::req_string(assets, "command", "command assets"),
                                                      work_dir / "asset_requests");
  } else {
    throw ArgumentError("providers: unknown assets type '" + atype + "'");
  }

  const auto& matcher = detail::provider_entry(j, "matcher");
  const auto mtype = matcher.at("type").get<std::string>();
  if (mtype == "oracle") {
    CorrespondenceOracleOptions o;
    o.noise = detail::opt_value(matcher, "noise", 0.0);
    o.outliers = detail::opt_value(matcher, "outliers", 0.0);
    o.samples = detail::opt_value<std::size_t>(matcher, "samples", o.samples);
    o.seed = detail::opt_value<std::uint64_t>(matcher, "seed", 0);
    p.matcher = std::make_unique<OracleCorrespondenceProvider>(scene_at(matcher, "oracle matcher"), o);
  } else if (mtype == "icp") {
    p.matcher = std::make_unique<GeometricNearestNeighborProvider>(detail::opt_value(matcher, "stride", 2));
  } else if (mtype == "command") {
    p.matcher = std::make_unique<CommandCorrespondenceProvider>(
        detail::req_string(matcher, "command", "command matcher"), work_dir / "match_requests");
  } else {
    throw ArgumentError("providers: unknown matcher type '" + mtype + "'");
  }

  const auto& rel = detail::provider_entry(j, "relations");
  const auto rtype = rel.at("type").get<std::string>();
  if (rtype == "oracle") {
    p.relations = std::make_unique<OracleRelationProvider>(scene_at(rel, "oracle relations"));
  } else if (rtype == "file") {
    std::ifstream in(base_dir / detail::req_string(rel, "path", "file relations"));
    if (!in) throw ArgumentError("providers: relation file not readable");
    p.relations = std::make_unique<FileRelationProvider>(parse_relations(in));
  } else if (rtype == "none") {
    p.relations = std::make_unique<ListRelationProvider>(std::vector<SpatialRelation>{});
  } else {
    throw ArgumentError("providers: unknown relations type '" + rtype + "'");
  }
  return p;
}

inline Providers load_providers(const fs::path& path, const fs::path& work_dir) {
  return make_providers(read_json_file(path, "providers"), path.parent_path(), work_dir);
}

// ---------------------------------------------------------------------------
// Stage 1: discovery

inline std::string format_registry(const CategoryRegistry& reg) {
  std::string out;
  for (const auto& c : reg.categories()) out += c + "\n";
  return out;
}

inline CategoryRegistry parse_registry(std::istream& in, const SynonymTable& syn) {
  CategoryRegistry reg(syn);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    reg.add(line);
  }
  return reg;
}

inline json discovery_json(const DiscoveryResult& d) {
  return json{{"registry", d.registry.categories()},
              {"sampled_frames", d.sampled_frames},
              {"raw_labels", d.raw_labels},
              {"per_frame_counts", d.per_frame_counts},
              {"warnings", d.warnings}};
}

// ---------------------------------------------------------------------------
// Stage 2: deduplication

struct InstancePlan {
  int id = 0;  // smallest member track id
  std::string category;
  std::vector<int> tracks;
};

struct DedupOutcome {
  std::vector<InstancePlan> instances;
  std::map<int, int> group_of;
  std::vector<PairOverlap> pairs;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;
};

inline std::vector<InstancePlan> plans_from_groups(const std::map<int, int>& group_of,
                                                   const std::map<int, std::string>& category_of) {
  std::map<int, InstancePlan> by_group;
  for (const auto& [track, group] : group_of) {
    auto& p = by_group[group];
    p.id = group;
    p.tracks.push_back(track);
    if (p.category.empty()) p.category = category_of.at(track);
  }
  std::vector<InstancePlan> out;
  for (auto& [g, p] : by_group) out.push_back(std::move(p));
  return out;
}

// Tracks whose category the registry does not know are left out of the scene.
inline DedupOutcome run_dedup(const SceneBundle& bundle, const CategoryRegistry& registry,
                              const PipelineConfig& cfg) {
  DedupOutcome out;
  std::vector<InstanceTrack> tracks;
  std::map<int, std::string> category_of;
  for (auto& t : collect_tracks(bundle)) {
    const auto canonical = registry.canonical(t.category);
    if (canonical.empty()) {
      out.warnings.push_back("track " + std::to_string(t.id) + ": category '" + t.category +
                             "' not in the registry, dropped");
      continue;
    }
    t.category = canonical;
    try {
      t.cloud = aggregate_cloud(t, bundle, cfg.aggregate);
    } catch (const EmptyTrackError& e) {
      out.failures.push_back(e.what());
      continue;
    }
    category_of[t.id] = t.category;
    tracks.push_back(std::move(t));
  }
  if (cfg.ablation.no_dedup) {
    for (const auto& t : tracks) out.group_of[t.id] = t.id;
  } else {
    MergeOptions m = cfg.merge;
    m.workers = cfg.workers;
    auto merged = merge_instances(tracks, m);
    out.group_of = std::move(merged.group_of);
    out.pairs = std::move(merged.pairs);
    out.warnings.insert(out.warnings.end(), merged.warnings.begin(), merged.warnings.end());
  }
  out.instances = plans_from_groups(out.group_of, category_of);
  return out;
}

inline json dedup_json(const DedupOutcome& d) {
  json pairs = json::array();
  for (const auto& p : d.pairs)
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"a_to_b", p.a_to_b}, {"b_to_a", p.b_to_a}, {"matched", p.matched}});
  json inst = json::array();
  for (const auto& p : d.instances) inst.push_back({{"id", p.id}, {"category", p.category}, {"tracks", p.tracks}});
  return json{{"instances", inst}, {"pairs", pairs}, {"warnings", d.warnings}, {"failures", d.failures}};
}

// ---------------------------------------------------------------------------
// Stage 3: view selection and asset generation

struct ViewOutcome {
  InstancePlan plan;
  bool ok = false;
  std::string error;
  ViewSelection selection;
  Asset asset;
};

namespace detail {

// Serializes calls into providers that are not thread-safe.
template <class Provider, class Fn>
auto call_provider(Provider& p, std::mutex& m, Fn&& fn) {
  if (p.thread_safe()) return fn();
  std::lock_guard<std::mutex> lock(m);
  return fn();
}

}  // namespace detail

inline std::vector<ViewOutcome> run_view_select(const SceneBundle& bundle,
                                                const std::vector<InstancePlan>& instances,
                                                AssetProvider& provider, const PipelineConfig& cfg) {
  std::vector<ViewOutcome> out(instances.size());
  std::mutex lock;
  const auto criterion = cfg.ablation.max_pixel_view ? ViewCriterion::PixelArea : ViewCriterion::SurfaceArea;
  parallel_for(instances.size(), cfg.workers, [&](std::size_t i) {
    ViewOutcome& v = out[i];
    v.plan = instances[i];
    try {
      const auto obs = group_observations(v.plan.tracks, bundle);
      v.selection = select_optimal_view(obs, bundle, criterion);
      const auto it = std::find_if(obs.begin(), obs.end(),
                                   [&](const GroupObservation& o) { return o.frame_id == v.selection.frame_id; });
      const auto request = make_asset_request(v.plan.id, v.plan.category, *it, bundle);
      v.asset = detail::call_provider(provider, lock, [&] { return generate_asset(request, provider); });
      v.ok = true;
    } catch (const Error& e) {
      v.error = "instance " + std::to_string(v.plan.id) + ": " + e.what();
    }
  });
  return out;
}

inline std::string asset_mesh_path(int id) { return "assets/instance_" + std::to_string(id) + ".obj"; }
inline std::string asset_pose_path(int id) { return "assets/instance_" + std::to_string(id) + ".txt"; }

inline json views_json(const std::vector<ViewOutcome>& views) {
  json arr = json::array();
  for (const auto& v : views) {
    json e{{"id", v.plan.id}, {"category", v.plan.category}, {"tracks", v.plan.tracks}, {"ok", v.ok}};
    if (!v.ok) {
      e["error"] = v.error;
    } else {
      e["frame"] = v.selection.frame_id;
      json scores = json::array();
      for (const auto& s : v.selection.scores)
        scores.push_back({{"frame", s.frame_id}, {"score", s.score}, {"empty", s.empty}});
      e["scores"] = scores;
      e["mesh"] = asset_mesh_path(v.plan.id);
      e["initial_pose"] = asset_pose_path(v.plan.id);
    }
    arr.push_back(e);
  }
  return arr;
}

inline void save_views(const std::vector<ViewOutcome>& views, const fs::path& dir) {
  for (const auto& v : views) {
    if (!v.ok) continue;
    save_obj(v.asset.mesh, dir / asset_mesh_path(v.plan.id));
    write_file_bytes(dir / asset_pose_path(v.plan.id), format_transform(v.asset.initial_pose));
  }
  write_json_file(dir / "views.json", views_json(views));
}

inline std::vector<ViewOutcome> load_views(const fs::path& dir) {
  const auto j = read_json_file(dir / "views.json", "views");
  std::vector<ViewOutcome> out;
  try {
    for (const auto& e : j) {
      ViewOutcome v;
      v.plan.id = e.at("id").get<int>();
      v.plan.category = e.at("category").get<std::string>();
      v.plan.tracks = e.at("tracks").get<std::vector<int>>();
      v.ok = e.at("ok").get<bool>();
      if (v.ok) {
        v.selection.frame_id = e.at("frame").get<int>();
        for (const auto& s : e.at("scores"))
          v.selection.scores.push_back({s.at("frame").get<int>(), s.at("score").get<double>(), s.at("empty").get<bool>()});
        v.asset.mesh = load_obj(dir / e.at("mesh").get<std::string>());
        const auto bytes = read_file_bytes(dir / e.at("initial_pose").get<std::string>(), "initial_pose");
        v.asset.initial_pose = parse_transform(std::string(bytes.begin(), bytes.end()),
                                               (dir / e.at("initial_pose").get<std::string>()).string());
      } else {
        v.error = e.value("error", "");
      }
      out.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    throw LoadError((dir / "views.json").string(), "views", e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 4: alignment

struct AlignOutcome {
  int id = 0;
  std::string category;
  bool ok = false;
  std::string error;
  SimilarityTransform pose;
  AlignmentResult result;  // empty under --no-align
};

inline void dump_renders(const TriMesh& mesh, const SimilarityTransform& pose,
                         const std::vector<AlignmentView>& views, const AlignmentConfig& cfg,
                         const fs::path& dir) {
  const auto renders = render_views(mesh, pose, views, cfg);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto tag = "frame_" + std::to_string(views[i].frame_id);
    write_file_bytes(dir / (tag + ".depth"), encode_depth(renders[i].depth));
    write_file_bytes(dir / (tag + ".pgm"), encode_mask(renders[i].mask));
  }
}

inline std::vector<AlignOutcome> run_align(const SceneBundle& bundle, const std::vector<ViewOutcome>& views,
                                           CorrespondenceProvider& matcher, const PipelineConfig& cfg,
                                           const std::optional<fs::path>& render_dump = std::nullopt) {
  std::vector<AlignOutcome> out(views.size());
  std::mutex lock;
  GeometricNearestNeighborProvider icp;
  CorrespondenceProvider& provider = cfg.ablation.icp_align ? static_cast<CorrespondenceProvider&>(icp) : matcher;

  // Guards a provider that is not thread-safe.
  struct Locked : CorrespondenceProvider {
    CorrespondenceProvider& inner;
    std::mutex& m;
    Locked(CorrespondenceProvider& p, std::mutex& mu) : inner(p), m(mu) {}
    std::vector<Correspondence> match(const MatchRequest& r) override {
      if (inner.thread_safe()) return inner.match(r);
      std::lock_guard<std::mutex> g(m);
      return inner.match(r);
    }
    bool thread_safe() const override { return true; }
  };

  parallel_for(views.size(), cfg.workers, [&](std::size_t i) {
    const ViewOutcome& v = views[i];
    AlignOutcome& a = out[i];
    a.id = v.plan.id;
    a.category = v.plan.category;
    if (!v.ok) {
      a.error = v.error;
      return;
    }
    a.pose = v.asset.initial_pose;
    if (cfg.ablation.no_align) {
      a.ok = true;
      return;
    }
    try {
      const auto av = alignment_views(v.selection.frame_id, bundle, v.plan.tracks, cfg.align.temporal_radius);
      Locked guarded(provider, lock);
      a.result = iterative_align(v.asset.mesh, v.asset.initial_pose, av, guarded, cfg.align,
                                 {v.plan.id, v.plan.category});
      a.pose = a.result.pose;
      a.ok = true;
      if (render_dump)
        dump_renders(v.asset.mesh, a.pose, av, cfg.align, *render_dump / ("instance_" + std::to_string(a.id)));
    } catch (const Error& e) {
      // keep the initializer so the object still appears in the scene
      a.error = "instance " + std::to_string(a.id) + ": " + e.what();
    }
  });
  return out;
}

inline json pose_json(const SimilarityTransform& T) {
  json r = json::array();
  for (int k = 0; k < 9; ++k) r.push_back(T.R(k / 3, k % 3));
  return json{{"scale", T.s}, {"rotation", r}, {"translation", {T.t.x(), T.t.y(), T.t.z()}}};
}

inline json alignment_json(const std::vector<AlignOutcome>& align) {
  json arr = json::array();
  for (const auto& a : align) {
    json e{{"id", a.id}, {"ok", a.ok}};
    if (!a.error.empty()) e["error"] = a.error;
    if (!a.result.iterates.empty()) {
      json its = json::array();
      for (std::size_t i = 0; i < a.result.iterates.size(); ++i) {
        json it = pose_json(a.result.iterates[i]);
        it["mean_iou"] = a.result.mean_iou[i];
        it["stalled"] = static_cast<bool>(a.result.stalled[i]);
        its.push_back(it);
      }
      e["iterates"] = its;
      e["selected"] = a.result.selected;
    }
    arr.push_back(e);
  }
  return arr;
}

inline std::string object_mesh_ref(int id) { return "meshes/object_" + std::to_string(id) + ".obj"; }

// Draft scene from the placed instances; instances without an asset are left out.
inline SceneDescription draft_scene(const std::vector<ViewOutcome>& views, const std::vector<AlignOutcome>& align,
                                    const Vec3& gravity) {
  SceneDescription s;
  s.gravity = gravity;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views[i].ok) continue;
    PlacedObject o;
    o.id = views[i].plan.id;
    o.category = views[i].plan.category;
    o.mesh_ref = object_mesh_ref(o.id);
    o.mesh = std::make_shared<TriMesh>(views[i].asset.mesh);
    o.pose = align[i].pose;
    s.objects.push_back(std::move(o));
  }
  s.sort_by_id();
  return s;
}

// ---------------------------------------------------------------------------
// Stage 5: refinement

struct RefineOutcome {
  SceneDescription scene;
  std::vector<SpatialRelation> relations;
  std::vector<std::string> warnings;
  std::vector<int> singular;
  std::string error;  // refinement skipped, draft kept
};

inline RefineOutcome run_refine(const SceneDescription& draft, const SceneBundle& bundle,
                                RelationProvider& provider, const PipelineConfig& cfg) {
  RefineOutcome out;
  out.scene = draft;
  try {
    out.relations = provider.relations(draft, bundle);
  } catch (const Error& e) {
    out.error = std::string("relation provider: ") + e.what();
    return out;
  }
  if (cfg.ablation.no_refine) {
    for (auto& o : out.scene.objects) o.relations.clear();
    for (const auto& r : out.relations)
      if (auto* o = out.scene.find(r.subject)) o->relations.push_back(r);
    return out;
  }
  try {
    auto r = refine_scene(draft, out.relations,
                          cfg.ablation.sg_only_refine ? RefineMode::SceneGraphOnly : RefineMode::Standard);
    out.scene = std::move(r.scene);
    out.warnings = std::move(r.warnings);
    out.singular = std::move(r.singular);
  } catch (const RefinementError& e) {
    out.error = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

inline json number_or_inf(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

inline json evaluate_scene(const SceneDescription& pred, const SceneDescription& gt, const PipelineConfig& cfg) {
  const auto syn = cfg.synonym_table();
  const auto cat = category_scores(pred, gt, syn, cfg.match_gate);
  const auto geo = scene_geometry_score(pred, gt, cfg.eval_samples, cfg.f_threshold, cfg.seed);
  return json{{"rec", cat.recall},
              {"instance_precision", cat.precision},
              {"instance_recall", cat.instance_recall},
              {"f1", cat.f1},
              {"matched", cat.matched},
              {"chamfer", number_or_inf(geo.chamfer)},
              {"fscore", geo.fscore},
              {"normal_consistency", geo.normal_consistency},
              {"sample_spacing", geo.spacing},
              {"f_threshold", geo.threshold},
              {"samples", geo.samples},
              {"match_gate", cfg.match_gate},
              {"lpips", "external"},
              {"musiq", "external"}};
}

// ---------------------------------------------------------------------------
// Full cascade

enum ExitCode { kExitSuccess = 0, kExitFatal = 1, kExitPartial = 2 };

using Logger = std::function<void(const std::string&)>;

struct PipelineRun {
  SceneDescription scene;
  json report;
  int exit_code = kExitSuccess;
};

struct PipelineInputs {
  fs::path bundle;
  fs::path providers;
  fs::path out;
  std::optional<fs::path> gt;  // ground-truth scene for the metric block
  std::optional<fs::path> dump_renders;
};

inline PipelineRun run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg, const Logger& log = {}) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  cfg.validate();
  const SceneBundle bundle = load_bundle(in.bundle);
  for (const auto& w : bundle.warnings) say("bundle: " + w);
  auto providers = load_providers(in.providers, in.out);
  std::optional<SceneDescription> gt;
  if (in.gt) gt = load_scene(*in.gt);
  fs::create_directories(in.out);

  std::vector<std::string> failures;
  say("discovery");
  const auto disc = discover_categories(bundle, *providers.labels, cfg.frames_k, cfg.synonym_table());
  write_file_bytes(in.out / "registry.txt", format_registry(disc.registry));

  say("dedup");
  const auto dedup = run_dedup(bundle, disc.registry, cfg);
  failures.insert(failures.end(), dedup.failures.begin(), dedup.failures.end());
  write_file_bytes(in.out / "groups.txt", format_group_map(dedup.group_of));

  say("view selection: " + std::to_string(dedup.instances.size()) + " instances");
  const auto views = run_view_select(bundle, dedup.instances, *providers.assets, cfg);
  for (const auto& v : views)
    if (!v.ok) failures.push_back(v.error);
  save_views(views, in.out);

  say("alignment");
  const auto align = run_align(bundle, views, *providers.matcher, cfg, in.dump_renders);
  for (std::size_t i = 0; i < align.size(); ++i)
    if (views[i].ok && !align[i].ok) failures.push_back(align[i].error);
  write_json_file(in.out / "alignment.json", alignment_json(align));
  const auto draft = draft_scene(views, align, bundle.gravity);
  save_scene(draft, in.out / "draft" / "scene.json");

  say("refinement");
  const auto refined = run_refine(draft, bundle, *providers.relations, cfg);
  if (!refined.error.empty()) failures.push_back("refinement: " + refined.error);
  write_file_bytes(in.out / "relations.txt", format_relations(refined.relations));
  save_scene(refined.scene, in.out / "scene.json");

  PipelineRun run;
  run.scene = refined.scene;
  run.exit_code = failures.empty() ? kExitSuccess : kExitPartial;
  json report{{"variant", cfg.ablation.label()},
              {"status", failures.empty() ? "success" : "partial"},
              {"config", cfg.to_json()},
              {"providers", providers.config},
              {"discovery", discovery_json(disc)},
              {"dedup", dedup_json(dedup)},
              {"views", views_json(views)},
              {"alignment", alignment_json(align)},
              {"refinement", {{"warnings", refined.warnings}, {"singular", refined.singular}, {"error", refined.error}}},
              {"objects", refined.scene.objects.size()},
              {"failures", failures}};
  if (gt) {
    say("evaluation");
    json metrics = evaluate_scene(refined.scene, *gt, cfg);
    std::set<std::string> gt_cats;
    for (const auto& o : gt->objects) gt_cats.insert(normalize_label(o.category));
    const auto rm = registry_metrics(disc.registry, {gt_cats.begin(), gt_cats.end()}, disc.raw_labels,
                                     disc.per_frame_counts);
    metrics["registry_recall"] = rm.recall;
    metrics["srr"] = rm.redundancy_rate;
    metrics["dgr"] = rm.gain_ratio;
    report["metrics"] = metrics;
  }
  run.report = report;
  write_json_file(in.out / "report.json", report);
  return run;
}

}  // namespace c3dr
