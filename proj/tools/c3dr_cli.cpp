#include <CLI11.hpp>

#include <iostream>

#include "c3dr/pipeline.hpp"

using namespace c3dr;

namespace {

struct Common {
  std::string config;
  std::size_t workers = 1;
  bool quiet = false;
  std::vector<std::string> ablate;
  bool no_dedup = false;
  bool no_align = false;
  bool no_refine = false;

  PipelineConfig load() const {
    PipelineConfig cfg;
    if (!config.empty()) cfg.apply_json(read_json_file(config, "config"));
    cfg.workers = std::max<std::size_t>(1, workers);
    for (const auto& a : ablate) cfg.ablation.enable(a);
    if (no_dedup) cfg.ablation.no_dedup = true;
    if (no_align) cfg.ablation.no_align = true;
    if (no_refine) cfg.ablation.no_refine = true;
    cfg.validate();
    return cfg;
  }

  Logger logger() const {
    if (quiet) return {};
    return [](const std::string& s) { std::cerr << "[c3dr] " << s << "\n"; };
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON file overriding configuration defaults")->check(CLI::ExistingFile);
  app->add_option("--workers", c.workers, "worker threads");
  app->add_flag("-q,--quiet", c.quiet, "suppress progress logging");
}

void add_ablations(CLI::App* app, Common& c) {
  app->add_option("--ablate", c.ablate, "max-pixel-view | icp-align | sg-only-refine (repeatable)")
      ->check(CLI::IsMember({"no-dedup", "max-pixel-view", "no-align", "icp-align", "no-refine", "sg-only-refine"}));
  app->add_flag("--no-dedup", c.no_dedup, "keep every track as its own instance");
  app->add_flag("--no-align", c.no_align, "use the generator's initial pose");
  app->add_flag("--no-refine", c.no_refine, "skip physical refinement");
}

CategoryRegistry read_registry(const fs::path& path, const PipelineConfig& cfg) {
  const auto bytes = read_file_bytes(path, "registry");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  return parse_registry(in, cfg.synonym_table());
}

std::map<int, int> read_groups(const fs::path& path) {
  const auto bytes = read_file_bytes(path, "groups");
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  return parse_group_map(in);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional 3D scene reconstruction from posed RGB-D bundles"};
  app.require_subcommand(1);
  Common common;

  // synth
  SynthSpec spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic bundle with ground truth and oracle providers");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--objects", spec.object_count, "object count");
  synth->add_option("--frames", spec.frames, "frame count");
  synth->add_option("--seed", spec.seed, "random seed");
  synth->add_option("--size", spec.width, "image width and height")->each([&](const std::string& v) {
    spec.height = std::stoi(v);
  });
  synth->add_option("--categories", spec.categories, "category per object");
  synth->add_flag("--stacked", spec.stacked, "place a book on a table");
  synth->add_option("--fragment", spec.fragment_objects, "object ids whose track splits mid-sequence");
  synth->add_option("--scale", spec.perturbation.scale, "asset oracle scale factor");
  synth->add_option("--angle", spec.perturbation.angle_deg, "asset oracle rotation error, degrees");
  synth->add_option("--translation", spec.perturbation.translation, "asset oracle translation error, meters");
  synth->add_option("--noise", spec.noise, "matcher oracle noise, meters");
  synth->add_option("--outliers", spec.outliers, "matcher oracle outlier fraction");
  synth->add_flag("-q,--quiet", common.quiet, "suppress progress logging");

  // discover
  std::string bundle_dir, providers_path, out_dir;
  auto* discover = app.add_subcommand("discover", "build the category registry");
  discover->add_option("--bundle", bundle_dir, "bundle directory")->required();
  discover->add_option("--providers", providers_path, "providers.json")->required()->check(CLI::ExistingFile);
  discover->add_option("--out", out_dir, "output directory")->required();
  add_common(discover, common);

  // dedup
  std::string registry_path;
  auto* dedup = app.add_subcommand("dedup", "aggregate tracks and merge duplicates");
  dedup->add_option("--bundle", bundle_dir, "bundle directory")->required();
  dedup->add_option("--registry", registry_path, "registry.txt")->required()->check(CLI::ExistingFile);
  dedup->add_option("--out", out_dir, "output directory")->required();
  add_common(dedup, common);
  dedup->add_flag("--no-dedup", common.no_dedup, "keep every track as its own instance");

  // select-views
  std::string groups_path;
  auto* select = app.add_subcommand("select-views", "pick a view per instance and generate assets");
  select->add_option("--bundle", bundle_dir, "bundle directory")->required();
  select->add_option("--registry", registry_path, "registry.txt")->required()->check(CLI::ExistingFile);
  select->add_option("--groups", groups_path, "groups.txt")->required()->check(CLI::ExistingFile);
  select->add_option("--providers", providers_path, "providers.json")->required()->check(CLI::ExistingFile);
  select->add_option("--out", out_dir, "output directory")->required();
  add_common(select, common);
  select->add_option("--ablate", common.ablate, "max-pixel-view")->check(CLI::IsMember({"max-pixel-view"}));

  // align
  std::string views_dir, dump_dir;
  auto* align = app.add_subcommand("align", "align assets to the observations");
  align->add_option("--bundle", bundle_dir, "bundle directory")->required();
  align->add_option("--views", views_dir, "select-views output directory")->required()->check(CLI::ExistingDirectory);
  align->add_option("--providers", providers_path, "providers.json")->required()->check(CLI::ExistingFile);
  align->add_option("--out", out_dir, "output directory")->required();
  align->add_option("--dump-renders", dump_dir, "write final renders per instance");
  add_common(align, common);
  align->add_option("--ablate", common.ablate, "icp-align")->check(CLI::IsMember({"icp-align"}));
  align->add_flag("--no-align", common.no_align, "use the generator's initial pose");

  // refine
  std::string scene_path;
  auto* refine = app.add_subcommand("refine", "apply gravity, support and attachment constraints");
  refine->add_option("--bundle", bundle_dir, "bundle directory")->required();
  refine->add_option("--scene", scene_path, "draft scene.json")->required()->check(CLI::ExistingFile);
  refine->add_option("--providers", providers_path, "providers.json")->required()->check(CLI::ExistingFile);
  refine->add_option("--out", out_dir, "output directory")->required();
  add_common(refine, common);
  refine->add_option("--ablate", common.ablate, "sg-only-refine")->check(CLI::IsMember({"sg-only-refine"}));
  refine->add_flag("--no-refine", common.no_refine, "attach relations only");

  // evaluate
  std::string pred_path, gt_path, report_path;
  auto* evaluate = app.add_subcommand("evaluate", "score a scene against ground truth");
  evaluate->add_option("--pred", pred_path, "predicted scene.json")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gt", gt_path, "ground-truth scene.json")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", report_path, "metrics JSON path (stdout when omitted)");
  add_common(evaluate, common);

  // run-all
  auto* run_all = app.add_subcommand("run-all", "run every stage and write scene.json and report.json");
  run_all->add_option("--bundle", bundle_dir, "bundle directory")->required();
  run_all->add_option("--providers", providers_path, "providers.json")->required()->check(CLI::ExistingFile);
  run_all->add_option("--out", out_dir, "output directory")->required();
  run_all->add_option("--gt", gt_path, "ground-truth scene.json for the metric block")->check(CLI::ExistingFile);
  run_all->add_option("--dump-renders", dump_dir, "write final renders per instance");
  add_common(run_all, common);
  add_ablations(run_all, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFatal;
  }

  try {
    const auto log = common.logger();
    auto say = [&](const std::string& s) {
      if (log) log(s);
    };

    if (*synth) {
      const auto scene = generate_scene(spec);
      write_synth(scene, synth_out);
      say("wrote " + std::to_string(scene.gt.objects.size()) + " objects, " +
          std::to_string(scene.bundle.frames.size()) + " frames to " + synth_out);
      return kExitSuccess;
    }

    const PipelineConfig cfg = common.load();

    if (*discover) {
      const auto bundle = load_bundle(bundle_dir);
      auto providers = load_providers(providers_path, out_dir);
      const auto d = discover_categories(bundle, *providers.labels, cfg.frames_k, cfg.synonym_table());
      write_file_bytes(fs::path(out_dir) / "registry.txt", format_registry(d.registry));
      write_json_file(fs::path(out_dir) / "discovery.json", discovery_json(d));
      for (const auto& w : d.warnings) say(w);
      say(std::to_string(d.registry.size()) + " categories");
      return kExitSuccess;
    }

    if (*dedup) {
      const auto bundle = load_bundle(bundle_dir);
      const auto d = run_dedup(bundle, read_registry(registry_path, cfg), cfg);
      write_file_bytes(fs::path(out_dir) / "groups.txt", format_group_map(d.group_of));
      write_json_file(fs::path(out_dir) / "dedup.json", dedup_json(d));
      for (const auto& w : d.warnings) say(w);
      for (const auto& f : d.failures) say("failed: " + f);
      say(std::to_string(d.instances.size()) + " instances");
      return d.failures.empty() ? kExitSuccess : kExitPartial;
    }

    if (*select) {
      const auto bundle = load_bundle(bundle_dir);
      const auto registry = read_registry(registry_path, cfg);
      std::map<int, std::string> category_of;
      for (const auto& t : collect_tracks(bundle)) category_of[t.id] = registry.canonical(t.category);
      const auto groups = read_groups(groups_path);
      for (const auto& [track, g] : groups)
        if (!category_of.count(track)) throw ArgumentError("groups: track " + std::to_string(track) + " not in the bundle");
      auto providers = load_providers(providers_path, out_dir);
      const auto views = run_view_select(bundle, plans_from_groups(groups, category_of), *providers.assets, cfg);
      save_views(views, out_dir);
      bool partial = false;
      for (const auto& v : views)
        if (!v.ok) {
          say("failed: " + v.error);
          partial = true;
        }
      return partial ? kExitPartial : kExitSuccess;
    }

    if (*align) {
      const auto bundle = load_bundle(bundle_dir);
      const auto views = load_views(views_dir);
      auto providers = load_providers(providers_path, out_dir);
      std::optional<fs::path> dump;
      if (!dump_dir.empty()) dump = fs::path(dump_dir);
      const auto result = run_align(bundle, views, *providers.matcher, cfg, dump);
      write_json_file(fs::path(out_dir) / "alignment.json", alignment_json(result));
      save_scene(draft_scene(views, result, bundle.gravity), fs::path(out_dir) / "scene.json");
      bool partial = false;
      for (std::size_t i = 0; i < result.size(); ++i)
        if (!result[i].ok) {
          say("failed: " + result[i].error);
          partial = true;
        }
      return partial ? kExitPartial : kExitSuccess;
    }

    if (*refine) {
      const auto bundle = load_bundle(bundle_dir);
      const auto draft = load_scene(scene_path);
      auto providers = load_providers(providers_path, out_dir);
      const auto r = run_refine(draft, bundle, *providers.relations, cfg);
      write_file_bytes(fs::path(out_dir) / "relations.txt", format_relations(r.relations));
      save_scene(r.scene, fs::path(out_dir) / "scene.json");
      for (const auto& w : r.warnings) say(w);
      if (!r.error.empty()) {
        say("refinement failed, draft kept: " + r.error);
        return kExitPartial;
      }
      return kExitSuccess;
    }

    if (*evaluate) {
      const auto metrics = evaluate_scene(load_scene(pred_path), load_scene(gt_path), cfg);
      if (report_path.empty()) std::cout << metrics.dump(2) << "\n";
      else write_json_file(report_path, metrics);
      return kExitSuccess;
    }

    if (*run_all) {
      PipelineInputs in{bundle_dir, providers_path, out_dir, std::nullopt, std::nullopt};
      if (!gt_path.empty()) in.gt = fs::path(gt_path);
      if (!dump_dir.empty()) in.dump_renders = fs::path(dump_dir);
      const auto run = run_pipeline(in, cfg, log);
      for (const auto& f : run.report.at("failures")) say("failed: " + f.get<std::string>());
      say(run.report.at("status").get<std::string>() + ": " + std::to_string(run.scene.objects.size()) + " objects");
      return run.exit_code;
    }
  } catch (const std::exception& e) {
    std::cerr << "c3dr: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
