#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c3dr/bundle_io.hpp"

namespace c3dr {

// Lower-case, trimmed, internal whitespace collapsed to single spaces.
inline std::string normalize_label(const std::string& raw) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// Equivalence classes of labels. Each class is keyed by its first-declared member.
class SynonymTable {
 public:
  SynonymTable() = default;

  void add_group(const std::vector<std::string>& labels) {
    std::string key;
    for (const auto& l : labels) {
      const auto n = normalize_label(l);
      if (n.empty()) continue;
      if (key.empty()) key = key_of(n);
      const auto existing = key_of(n);
      if (existing != key) {
        // merge classes: re-point everything from `existing` to `key`
        for (auto& [alias, k] : key_)
          if (k == existing) k = key;
      }
      key_[n] = key;
    }
  }

  void add_pair(const std::string& a, const std::string& b) { add_group({a, b}); }

  std::string key_of(const std::string& label) const {
    const auto n = normalize_label(label);
    const auto it = key_.find(n);
    return it == key_.end() ? n : it->second;
  }

  bool equivalent(const std::string& a, const std::string& b) const {
    return key_of(a) == key_of(b);
  }

  // Text form: one class per line, labels separated by commas.
  static SynonymTable parse(std::istream& in) {
    SynonymTable t;
    std::string line;
    while (std::getline(in, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::vector<std::string> labels;
      std::stringstream ls(line);
      std::string item;
      while (std::getline(ls, item, ',')) labels.push_back(item);
      t.add_group(labels);
    }
    return t;
  }

 private:
  std::map<std::string, std::string> key_;
};

class CategoryRegistry {
 public:
  explicit CategoryRegistry(SynonymTable synonyms = {}) : synonyms_(std::move(synonyms)) {}

  const std::vector<std::string>& categories() const { return canonical_; }
  const std::map<std::string, std::string>& aliases() const { return alias_; }
  const SynonymTable& synonyms() const { return synonyms_; }
  std::size_t size() const { return canonical_.size(); }

  // Canonical entry for a label, or "" if the registry has none.
  std::string canonical(const std::string& label) const {
    const auto n = normalize_label(label);
    if (auto it = alias_.find(n); it != alias_.end()) return it->second;
    const auto key = synonyms_.key_of(n);
    for (const auto& c : canonical_)
      if (synonyms_.key_of(c) == key) return c;
    return {};
  }

  bool contains(const std::string& label) const { return !canonical(label).empty(); }

  // Returns true when the label introduced a new canonical entry.
  bool add(const std::string& label) {
    const auto n = normalize_label(label);
    if (n.empty()) return false;
    const auto c = canonical(n);
    if (!c.empty()) {
      if (c != n) alias_[n] = c;
      return false;
    }
    canonical_.push_back(n);
    return true;
  }

  bool operator==(const CategoryRegistry& o) const {
    return canonical_ == o.canonical_ && alias_ == o.alias_;
  }

 private:
  SynonymTable synonyms_;
  std::vector<std::string> canonical_;
  std::map<std::string, std::string> alias_;
};

class LabelProvider {
 public:
  virtual ~LabelProvider() = default;
  // Novel category labels seen in `frame` given what the registry already holds.
  // Failures are reported by throwing ProviderError.
  virtual std::vector<std::string> novel_labels(const Frame& frame,
                                                const CategoryRegistry& registry) = 0;
};

// Replays a transcript "frame_id: label, label, ...". A line "frame_id: !fail" scripts a
// provider failure on that frame. Frames absent from the transcript yield no labels.
class TranscriptLabelProvider : public LabelProvider {
 public:
  explicit TranscriptLabelProvider(std::map<int, std::vector<std::string>> script,
                                   std::set<int> failing = {})
      : script_(std::move(script)), failing_(std::move(failing)) {}

  static TranscriptLabelProvider parse(std::istream& in) {
    std::map<int, std::vector<std::string>> script;
    std::set<int> failing;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (normalize_label(line).empty()) continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos)
        throw ArgumentError("transcript line " + std::to_string(line_no) + ": missing ':'");
      int id = 0;
      try {
        id = std::stoi(line.substr(0, colon));
      } catch (const std::exception&) {
        throw ArgumentError("transcript line " + std::to_string(line_no) + ": bad frame id");
      }
      const auto rest = line.substr(colon + 1);
      if (normalize_label(rest) == "!fail") {
        failing.insert(id);
        continue;
      }
      auto& labels = script[id];
      std::stringstream ls(rest);
      std::string item;
      while (std::getline(ls, item, ','))
        if (!normalize_label(item).empty()) labels.push_back(normalize_label(item));
    }
    return TranscriptLabelProvider(std::move(script), std::move(failing));
  }

  std::vector<std::string> novel_labels(const Frame& frame, const CategoryRegistry&) override {
    if (failing_.count(frame.id)) throw ProviderError("scripted failure on frame " + std::to_string(frame.id));
    const auto it = script_.find(frame.id);
    return it == script_.end() ? std::vector<std::string>{} : it->second;
  }

 private:
  std::map<int, std::vector<std::string>> script_;
  std::set<int> failing_;
};

inline std::string format_transcript(const std::map<int, std::vector<std::string>>& script) {
  std::string out;
  for (const auto& [id, labels] : script) {
    out += std::to_string(id) + ":";
    for (std::size_t i = 0; i < labels.size(); ++i) out += (i ? ", " : " ") + labels[i];
    out += "\n";
  }
  return out;
}

// Greedy farthest-point sampling over camera centers, seeded at the first frame.
// Ties go to the lower frame id.
inline std::vector<int> sample_frames(const SceneBundle& bundle, std::size_t k) {
  if (bundle.frames.empty()) throw ArgumentError("sample_frames: bundle has no frames");
  if (k == 0) throw ArgumentError("sample_frames: k must be at least 1");
  const std::size_t n = bundle.frames.size();
  std::vector<Vec3> centers(n);
  for (std::size_t i = 0; i < n; ++i) centers[i] = bundle.frames[i].camera.center();

  std::vector<int> picked{bundle.frames[0].id};
  std::vector<bool> used(n, false);
  used[0] = true;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t last = 0;
  while (picked.size() < std::min(k, n)) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      dist[i] = std::min(dist[i], (centers[i] - centers[last]).norm());
      // frames are ordered by id, so strict > keeps the lower id on ties
      if (best == n || dist[i] > dist[best]) best = i;
    }
    used[best] = true;
    last = best;
    picked.push_back(bundle.frames[best].id);
  }
  return picked;
}

struct DiscoveryResult {
  CategoryRegistry registry;
  std::vector<int> sampled_frames;
  std::vector<std::string> raw_labels;      // every normalized label the provider emitted
  std::vector<std::size_t> per_frame_counts;  // labels emitted per successfully queried frame
  std::vector<std::string> warnings;
};

inline DiscoveryResult discover_categories(const SceneBundle& bundle, LabelProvider& provider,
                                           std::size_t k, const SynonymTable& synonyms = {}) {
  DiscoveryResult result{CategoryRegistry(synonyms), sample_frames(bundle, k), {}, {}, {}};
  std::size_t failures = 0;
  for (int id : result.sampled_frames) {
    const Frame& frame = *bundle.find_frame(id);
    std::vector<std::string> labels;
    try {
      labels = provider.novel_labels(frame, result.registry);
    } catch (const ProviderError& e) {
      ++failures;
      result.warnings.push_back("frame " + std::to_string(id) + ": " + e.what());
      continue;
    }
    std::size_t emitted = 0;
    for (const auto& l : labels) {
      const auto n = normalize_label(l);
      if (n.empty()) continue;
      ++emitted;
      result.raw_labels.push_back(n);
      result.registry.add(n);
    }
    result.per_frame_counts.push_back(emitted);
  }
  if (failures == result.sampled_frames.size())
    throw DiscoveryError("discovery: label provider failed on every sampled frame");
  return result;
}

struct RegistryMetrics {
  double recall = 0.0;          // Rec
  double redundancy_rate = 0.0;  // SRR
  double gain_ratio = 0.0;       // DGR
};

// Rec = |registry ∩ GT| / |GT|; SRR = repeated canonical forms / raw labels;
// DGR = |registry| / mean per-frame label count (0 when no labels were emitted).
inline RegistryMetrics registry_metrics(const CategoryRegistry& registry,
                                        const std::vector<std::string>& ground_truth,
                                        const std::vector<std::string>& raw_labels,
                                        const std::vector<std::size_t>& per_frame_counts) {
  if (ground_truth.empty()) throw ArgumentError("registry_metrics: recall undefined for empty ground truth");
  const auto& syn = registry.synonyms();
  std::set<std::string> gt_keys, reg_keys;
  for (const auto& g : ground_truth) gt_keys.insert(syn.key_of(g));
  for (const auto& c : registry.categories()) reg_keys.insert(syn.key_of(c));
  std::size_t hit = 0;
  for (const auto& g : gt_keys) hit += reg_keys.count(g);

  RegistryMetrics m;
  m.recall = static_cast<double>(hit) / static_cast<double>(gt_keys.size());
  std::set<std::string> seen;
  std::size_t repeats = 0;
  for (const auto& l : raw_labels)
    if (!seen.insert(syn.key_of(l)).second) ++repeats;
  m.redundancy_rate =
      raw_labels.empty() ? 0.0 : static_cast<double>(repeats) / static_cast<double>(raw_labels.size());
  double total = 0.0;
  for (auto c : per_frame_counts) total += static_cast<double>(c);
  const double mean = per_frame_counts.empty() ? 0.0 : total / static_cast<double>(per_frame_counts.size());
  m.gain_ratio = mean > 0.0 ? static_cast<double>(registry.size()) / mean : 0.0;
  return m;
}

}  // namespace c3dr
