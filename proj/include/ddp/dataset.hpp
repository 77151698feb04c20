#pragma once

// Dataset manifests, MU3D auto-labeling and video-level stratified splits.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddp/core.hpp"

namespace ddp {

enum class DatasetTag { rlt, mu3d, synthetic };

inline std::string_view to_string(DatasetTag t) {
  switch (t) {
    case DatasetTag::rlt: return "rlt";
    case DatasetTag::mu3d: return "mu3d";
    case DatasetTag::synthetic: return "synthetic";
  }
  return "?";
}

inline DatasetTag parse_dataset_tag(std::string_view s) {
  if (s == "rlt") return DatasetTag::rlt;
  if (s == "mu3d") return DatasetTag::mu3d;
  if (s == "synthetic") return DatasetTag::synthetic;
  throw DataError("unknown dataset tag '" + std::string(s) + "'");
}

struct VideoRecord {
  std::string id;
  DatasetTag dataset_tag = DatasetTag::synthetic;
  std::string media_path;
  std::string transcript_path;
  std::optional<Label> label;
  std::optional<double> truth_prop;
  std::optional<std::string> speaker_id;
  std::optional<double> duration_s;

  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

struct DatasetConfig {
  double mu3d_truth_threshold = 0.70;
  double test_fraction = 0.2;
  std::optional<int> n_folds;
  std::uint64_t split_seed = 0;

  void validate() const {
    if (!(mu3d_truth_threshold > 0.0 && mu3d_truth_threshold < 1.0))
      throw UsageError("mu3d_truth_threshold must lie in (0,1)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw UsageError("test_fraction must lie in (0,1)");
    if (n_folds && *n_folds < 2) throw UsageError("n_folds must be >= 2");
  }
};

struct SplitPlan {
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> test_ids;   // sorted
  std::uint64_t seed = 0;
  std::optional<int> fold_index;

  bool in_train(const std::string& id) const {
    return std::binary_search(train_ids.begin(), train_ids.end(), id);
  }
  bool in_test(const std::string& id) const {
    return std::binary_search(test_ids.begin(), test_ids.end(), id);
  }

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

// ---------------------------------------------------------------------------
// Manifest I/O

inline VideoRecord record_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto where = [&] { return " (manifest line " + std::to_string(line_no) + ")"; };
  if (!j.is_object()) throw DataError("manifest entry is not an object" + where());
  VideoRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.dataset_tag = parse_dataset_tag(j.at("dataset").get<std::string>());
    r.media_path = j.value("media", std::string{});
    r.transcript_path = j.value("transcript", std::string{});
    if (j.contains("label") && !j["label"].is_null())
      r.label = parse_label(j["label"].get<std::string>());
    if (j.contains("truth_prop") && !j["truth_prop"].is_null())
      r.truth_prop = j["truth_prop"].get<double>();
    if (j.contains("speaker") && !j["speaker"].is_null())
      r.speaker_id = j["speaker"].get<std::string>();
    if (j.contains("duration_s") && !j["duration_s"].is_null())
      r.duration_s = j["duration_s"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest entry: ") + e.what() + where());
  }
  if (r.id.empty()) throw DataError("empty video id" + where());
  if (r.truth_prop && !(*r.truth_prop >= 0.0 && *r.truth_prop <= 1.0))
    throw DataError("truth_prop outside [0,1] for '" + r.id + "'" + where());
  if (r.dataset_tag != DatasetTag::mu3d && !r.label)
    throw DataError("record '" + r.id + "' requires an explicit label" + where());
  return r;
}

inline nlohmann::ordered_json record_to_json(const VideoRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["dataset"] = to_string(r.dataset_tag);
  j["media"] = r.media_path;
  j["transcript"] = r.transcript_path;
  if (r.label) j["label"] = to_string(*r.label);
  if (r.truth_prop) j["truth_prop"] = *r.truth_prop;
  if (r.speaker_id) j["speaker"] = *r.speaker_id;
  if (r.duration_s) j["duration_s"] = *r.duration_s;
  return j;
}

inline std::vector<VideoRecord> parse_manifest(std::istream& in) {
  std::vector<VideoRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("manifest line " + std::to_string(line_no) + " is not JSON: " + e.what());
    }
    VideoRecord r = record_from_json(j, line_no);
    if (!seen.insert(r.id).second) throw DataError("duplicate video id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<VideoRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

inline void write_manifest(std::ostream& out, const std::vector<VideoRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline void write_manifest(const std::filesystem::path& path,
                           const std::vector<VideoRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  write_manifest(out, records);
}

// ---------------------------------------------------------------------------
// Labels

/// High TruthProp means raters judged the video truthful. The threshold is
/// inclusive: truth_prop == threshold labels truthful.
inline Label label_mu3d(double truth_prop, const DatasetConfig& config) {
  require(truth_prop >= 0.0 && truth_prop <= 1.0, "label_mu3d: truth_prop outside [0,1]");
  return truth_prop >= config.mu3d_truth_threshold ? Label::truthful : Label::deceptive;
}

/// Fill in labels for unlabeled MU3D records that carry a TruthProp.
inline std::vector<VideoRecord> resolve_labels(std::vector<VideoRecord> records,
                                               const DatasetConfig& config) {
  for (auto& r : records)
    if (!r.label && r.dataset_tag == DatasetTag::mu3d && r.truth_prop)
      r.label = label_mu3d(*r.truth_prop, config);
  return records;
}

inline std::map<Label, std::size_t> label_counts(const std::vector<VideoRecord>& records) {
  std::map<Label, std::size_t> counts;
  for (const auto& r : records)
    if (r.label) ++counts[*r.label];
  return counts;
}

// ---------------------------------------------------------------------------
// Splits

namespace detail {

// Per-class id lists, sorted and then shuffled by a class-specific stream.
inline std::map<Label, std::vector<std::string>> shuffled_strata(
    const std::vector<VideoRecord>& records, std::uint64_t seed) {
  std::map<Label, std::vector<std::string>> strata;
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!r.label) throw DataError("record '" + r.id + "' is unlabeled; cannot split");
    if (!ids.insert(r.id).second) throw DataError("duplicate video id '" + r.id + "'");
    strata[*r.label].push_back(r.id);
  }
  for (Label l : {Label::truthful, Label::deceptive}) {
    auto it = strata.find(l);
    if (it == strata.end() || it->second.size() < 2)
      throw DataError("split needs at least 2 videos of each class; '" +
                      std::string(to_string(l)) + "' has " +
                      std::to_string(it == strata.end() ? 0 : it->second.size()));
  }
  for (auto& [label, list] : strata) {
    std::sort(list.begin(), list.end());
    Rng rng(derive_seed(seed, std::string("split:") + std::string(to_string(label))));
    rng.shuffle(list);
  }
  return strata;
}

inline SplitPlan finish(std::vector<std::string> train, std::vector<std::string> test,
                        std::uint64_t seed, std::optional<int> fold) {
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return SplitPlan{std::move(train), std::move(test), seed, fold};
}

}  // namespace detail

/// Video-level stratified hold-out split. Each class contributes
/// round(test_fraction * n_class) test videos, clamped to [1, n_class - 1].
inline SplitPlan make_split(const std::vector<VideoRecord>& records, const DatasetConfig& config) {
  config.validate();
  auto strata = detail::shuffled_strata(records, config.split_seed);
  std::vector<std::string> train, test;
  for (auto& [label, list] : strata) {
    const auto n = static_cast<long>(list.size());
    long n_test = std::lround(config.test_fraction * static_cast<double>(n));
    n_test = std::clamp(n_test, 1L, n - 1);
    test.insert(test.end(), list.begin(), list.begin() + n_test);
    train.insert(train.end(), list.begin() + n_test, list.end());
  }
  return detail::finish(std::move(train), std::move(test), config.split_seed, std::nullopt);
}

/// Fold `fold_index` of a stratified k-fold partition: position i of each
/// shuffled class list goes to fold i mod k.
inline SplitPlan make_fold(const std::vector<VideoRecord>& records, const DatasetConfig& config,
                           int fold_index) {
  config.validate();
  if (!config.n_folds) throw UsageError("make_fold requires n_folds");
  const int k = *config.n_folds;
  require(fold_index >= 0 && fold_index < k, "make_fold: fold index out of range");
  auto strata = detail::shuffled_strata(records, config.split_seed);
  std::vector<std::string> train, test;
  for (auto& [label, list] : strata)
    for (std::size_t i = 0; i < list.size(); ++i)
      (static_cast<int>(i % k) == fold_index ? test : train).push_back(list[i]);
  if (test.empty() || train.empty()) throw DataError("fold " + std::to_string(fold_index) + " is empty");
  return detail::finish(std::move(train), std::move(test), config.split_seed, fold_index);
}

inline nlohmann::ordered_json split_to_json(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  j["seed"] = plan.seed;
  if (plan.fold_index) j["fold"] = *plan.fold_index;
  j["train"] = plan.train_ids;
  j["test"] = plan.test_ids;
  return j;
}

inline SplitPlan split_from_json(const nlohmann::json& j) {
  try {
    SplitPlan p;
    p.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fold")) p.fold_index = j["fold"].get<int>();
    p.train_ids = j.at("train").get<std::vector<std::string>>();
    p.test_ids = j.at("test").get<std::vector<std::string>>();
    std::sort(p.train_ids.begin(), p.train_ids.end());
    std::sort(p.test_ids.begin(), p.test_ids.end());
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split plan: ") + e.what());
  }
}

}  // namespace ddp
