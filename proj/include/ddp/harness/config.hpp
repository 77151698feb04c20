#pragma once

// ExperimentConfig and its JSON file format. Keys mirror the field names
// below; unknown keys and wrongly typed values are usage errors.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddp/acoustic.hpp"
#include "ddp/classifiers/cnn.hpp"
#include "ddp/classifiers/naive_bayes.hpp"
#include "ddp/classifiers/svm.hpp"
#include "ddp/classifiers/trees.hpp"
#include "ddp/dataset.hpp"
#include "ddp/fusion.hpp"
#include "ddp/lexical.hpp"
#include "ddp/media.hpp"
#include "ddp/visual.hpp"

namespace ddp {

struct AcousticModelConfig {
  std::string model = "svm";  // svm | forest | boost
  SVMConfig svm{.C = 2.0, .gamma = 1.0};
  ForestConfig forest;
  BoostConfig boost;
  AcousticConfig features;
  MelConfig mel;
  AugmentConfig augment;
  int augment_copies = 1;  // time-shifted copies per training chunk
};

struct LexicalModelConfig {
  std::string model = "mnb";           // mnb | svm
  std::string features = "embedding";  // svm input: embedding | tfidf
  NBConfig mnb;
  SVMConfig svm{.C = 1.0, .gamma = 9.0};
  EmbeddingConfig embedding;
};

struct VisualModelConfig {
  std::string model = "cnn";
  VisualConfig visual;
  CNNConfig cnn;
  std::string detector = "full_image";  // full_image | replay | command
  std::string detector_dir;             // replay: directory of <video>.jsonl logs
  std::string detector_command;         // command: executable invoked per frame
  std::string detector_version = "1";
};

struct ExperimentConfig {
  std::string manifest;
  std::string cache_dir = "cache";
  std::string output_dir = "out";
  DatasetConfig dataset;
  IngestConfig ingest;
  std::vector<Modality> modalities{Modality::visual, Modality::acoustic, Modality::lexical};
  AcousticModelConfig acoustic;
  LexicalModelConfig lexical;
  VisualModelConfig visual;
  FusionMode fusion = FusionMode::hard_majority;
  std::uint64_t seed = 0;

  bool enabled(Modality m) const {
    for (auto x : modalities)
      if (x == m) return true;
    return false;
  }

  /// Copies the top-level seed into every stochastic component.
  void propagate_seed() {
    dataset.split_seed = seed;
    acoustic.forest.seed = seed;
    acoustic.boost.seed = seed;
    acoustic.augment.seed = seed;
    lexical.embedding.seed = seed;
    visual.cnn.seed = seed;
  }

  /// Checks everything that can be checked without touching the filesystem.
  void validate() const {
    if (manifest.empty()) throw UsageError("config: manifest is required");
    if (modalities.empty()) throw UsageError("config: at least one modality must be enabled");
    dataset.validate();
    ingest.validate();
    if (acoustic.model != "svm" && acoustic.model != "forest" && acoustic.model != "boost")
      throw UsageError("config: unknown acoustic model '" + acoustic.model + "' (svm, forest, boost)");
    if (lexical.model != "mnb" && lexical.model != "svm")
      throw UsageError("config: unknown lexical model '" + lexical.model + "' (mnb, svm)");
    if (lexical.features != "embedding" && lexical.features != "tfidf")
      throw UsageError("config: unknown lexical features '" + lexical.features + "' (embedding, tfidf)");
    if (visual.model != "cnn") throw UsageError("config: unknown visual model '" + visual.model + "' (cnn)");
    if (visual.detector != "full_image" && visual.detector != "replay" && visual.detector != "command")
      throw UsageError("config: unknown detector '" + visual.detector + "' (full_image, replay, command)");
    if (visual.detector == "replay" && visual.detector_dir.empty())
      throw UsageError("config: replay detector needs detector_dir");
    if (visual.detector == "command" && visual.detector_command.empty())
      throw UsageError("config: command detector needs detector_command");
    acoustic.svm.validate();
    acoustic.forest.validate();
    acoustic.boost.validate();
    acoustic.features.validate();
    acoustic.mel.validate();
    if (acoustic.augment_copies < 0) throw UsageError("config: augment_copies must be >= 0");
    lexical.mnb.validate();
    lexical.svm.validate();
    visual.visual.validate();
    visual.cnn.validate();
    if (visual.cnn.input_size != visual.visual.image_size)
      throw UsageError("config: visual.cnn.input_size must equal visual.visual.image_size");
  }
};

namespace detail {

/// Strict reader over one JSON object.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw UsageError("config: " + where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config: " + where_ + "." + key + " has the wrong type");
    }
  }

  const nlohmann::json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw UsageError("config: unknown key " + where_ + "." + k);
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline void read_svm(const nlohmann::json& j, SVMConfig& c, const std::string& where) {
  Fields f(j, where);
  std::string kernel = std::string(to_string(c.kernel));
  f.get("C", c.C);
  f.get("kernel", kernel);
  f.get("gamma", c.gamma);
  f.get("coef0", c.coef0);
  f.get("degree", c.degree);
  f.get("tol", c.tol);
  f.get("max_passes", c.max_passes);
  f.finish();
  try {
    c.kernel = parse_kernel(kernel);
  } catch (const std::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

inline void read_cnn(const nlohmann::json& j, CNNConfig& c) {
  Fields f(j, "visual.cnn");
  f.get("input_size", c.input_size);
  f.get("input_channels", c.input_channels);
  f.get("conv_channels", c.conv_channels);
  f.get("dense_units", c.dense_units);
  f.get("learning_rate", c.learning_rate);
  f.get("batch_size", c.batch_size);
  f.get("epochs", c.epochs);
  if (const auto* e = f.sub("early_stop_accuracy"); e && !e->is_null()) {
    if (!e->is_number()) throw UsageError("config: visual.cnn.early_stop_accuracy has the wrong type");
    c.early_stop_accuracy = e->get<double>();
  }
  f.finish();
}

}  // namespace detail

/// Relative paths are resolved against `base_dir`.
inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::Fields;
  ExperimentConfig c;
  Fields top(j, "config");
  top.get("manifest", c.manifest);
  top.get("cache_dir", c.cache_dir);
  top.get("output_dir", c.output_dir);
  top.get("seed", c.seed);
  std::string fusion = to_string(c.fusion);
  top.get("fusion", fusion);
  c.fusion = parse_fusion_mode(fusion);
  if (const auto* m = top.sub("modalities")) {
    std::vector<std::string> names;
    try {
      names = m->get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config: modalities must be a list of names");
    }
    c.modalities.clear();
    for (const auto& n : names) {
      const Modality mod = parse_modality(n);
      if (c.enabled(mod)) throw UsageError("config: modality '" + n + "' listed twice");
      c.modalities.push_back(mod);
    }
  }
  if (const auto* d = top.sub("dataset")) {
    Fields f(*d, "dataset");
    f.get("mu3d_truth_threshold", c.dataset.mu3d_truth_threshold);
    f.get("test_fraction", c.dataset.test_fraction);
    if (const auto* k = f.sub("n_folds"); k && !k->is_null()) {
      if (!k->is_number_integer()) throw UsageError("config: dataset.n_folds must be an integer");
      c.dataset.n_folds = k->get<int>();
    }
    f.finish();
  }
  if (const auto* d = top.sub("ingest")) {
    Fields f(*d, "ingest");
    f.get("frame_step_s", c.ingest.frame_step_s);
    f.get("target_sample_rate", c.ingest.target_sample_rate);
    f.finish();
  }
  if (const auto* a = top.sub("acoustic")) {
    Fields f(*a, "acoustic");
    f.get("model", c.acoustic.model);
    f.get("augment_copies", c.acoustic.augment_copies);
    if (const auto* s = f.sub("svm")) detail::read_svm(*s, c.acoustic.svm, "acoustic.svm");
    if (const auto* s = f.sub("forest")) {
      Fields g(*s, "acoustic.forest");
      g.get("n_trees", c.acoustic.forest.n_trees);
      g.get("max_depth", c.acoustic.forest.max_depth);
      g.get("bootstrap", c.acoustic.forest.bootstrap);
      g.finish();
    }
    if (const auto* s = f.sub("boost")) {
      Fields g(*s, "acoustic.boost");
      g.get("n_estimators", c.acoustic.boost.n_estimators);
      g.get("learning_rate", c.acoustic.boost.learning_rate);
      g.get("max_depth", c.acoustic.boost.max_depth);
      g.finish();
    }
    if (const auto* s = f.sub("features")) {
      Fields g(*s, "acoustic.features");
      g.get("chunk_len_s", c.acoustic.features.chunk_len_s);
      g.get("remainder_keep_fraction", c.acoustic.features.remainder_keep_fraction);
      g.get("frame_len", c.acoustic.features.frame_len);
      g.get("hop", c.acoustic.features.hop);
      g.get("rolloff_fraction", c.acoustic.features.rolloff_fraction);
      g.get("n_mel_summary_bands", c.acoustic.features.n_mel_summary_bands);
      g.finish();
    }
    if (const auto* s = f.sub("mel")) {
      Fields g(*s, "acoustic.mel");
      g.get("sample_rate", c.acoustic.mel.sample_rate);
      g.get("n_fft", c.acoustic.mel.n_fft);
      g.get("hop", c.acoustic.mel.hop);
      g.get("n_mels", c.acoustic.mel.n_mels);
      g.get("f_min", c.acoustic.mel.f_min);
      g.get("f_max", c.acoustic.mel.f_max);
      g.finish();
    }
    if (const auto* s = f.sub("augment")) {
      Fields g(*s, "acoustic.augment");
      g.get("max_shift_fraction", c.acoustic.augment.max_shift_fraction);
      g.get("n_freq_masks", c.acoustic.augment.n_freq_masks);
      g.get("max_freq_width", c.acoustic.augment.max_freq_width);
      g.get("n_time_masks", c.acoustic.augment.n_time_masks);
      g.get("max_time_width", c.acoustic.augment.max_time_width);
      g.finish();
    }
    f.finish();
  }
  if (const auto* l = top.sub("lexical")) {
    Fields f(*l, "lexical");
    f.get("model", c.lexical.model);
    f.get("features", c.lexical.features);
    if (const auto* s = f.sub("mnb")) {
      Fields g(*s, "lexical.mnb");
      g.get("alpha", c.lexical.mnb.alpha);
      g.finish();
    }
    if (const auto* s = f.sub("svm")) detail::read_svm(*s, c.lexical.svm, "lexical.svm");
    if (const auto* s = f.sub("embedding")) {
      Fields g(*s, "lexical.embedding");
      g.get("dim", c.lexical.embedding.dim);
      g.get("window", c.lexical.embedding.window);
      g.get("negative", c.lexical.embedding.negative);
      g.get("epochs", c.lexical.embedding.epochs);
      g.get("learning_rate", c.lexical.embedding.learning_rate);
      g.finish();
    }
    f.finish();
  }
  if (const auto* v = top.sub("visual")) {
    Fields f(*v, "visual");
    f.get("model", c.visual.model);
    f.get("detector", c.visual.detector);
    f.get("detector_dir", c.visual.detector_dir);
    f.get("detector_command", c.visual.detector_command);
    f.get("detector_version", c.visual.detector_version);
    if (const auto* s = f.sub("visual")) {
      Fields g(*s, "visual.visual");
      std::string mode = std::string(to_string(c.visual.visual.mode));
      g.get("image_size", c.visual.visual.image_size);
      g.get("crop_margin", c.visual.visual.crop_margin);
      g.get("mode", mode);
      g.finish();
      try {
        c.visual.visual.mode = parse_visual_mode(mode);
      } catch (const std::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
      }
    }
    if (const auto* s = f.sub("cnn")) detail::read_cnn(*s, c.visual.cnn);
    f.finish();
  }
  top.finish();

  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative() && !base_dir.empty()) p = (base_dir / p).lexically_normal().string();
  };
  resolve(c.manifest);
  resolve(c.cache_dir);
  resolve(c.output_dir);
  resolve(c.visual.detector_dir);
  c.propagate_seed();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

/// Echo of every result-affecting setting. Machine-local locations (cache and
/// output directories, manifest path) are left out so the echo, and hence the
/// report, depends only on content.
inline nlohmann::ordered_json config_echo(const ExperimentConfig& c) {
  using nlohmann::ordered_json;
  ordered_json mods = ordered_json::array();
  for (auto m : c.modalities) mods.push_back(std::string(to_string(m)));
  ordered_json j;
  j["seed"] = c.seed;
  j["fusion"] = to_string(c.fusion);
  j["modalities"] = mods;
  j["dataset"] = {{"mu3d_truth_threshold", c.dataset.mu3d_truth_threshold},
                  {"test_fraction", c.dataset.test_fraction}};
  j["dataset"]["n_folds"] = c.dataset.n_folds ? ordered_json(*c.dataset.n_folds) : ordered_json(nullptr);
  j["ingest"] = {{"frame_step_s", c.ingest.frame_step_s}, {"target_sample_rate", c.ingest.target_sample_rate}};
  const auto& a = c.acoustic;
  j["acoustic"] = {
      {"model", a.model},
      {"augment_copies", a.augment_copies},
      {"svm", svm_config_to_json(a.svm)},
      {"forest", {{"n_trees", a.forest.n_trees}, {"max_depth", a.forest.max_depth}, {"bootstrap", a.forest.bootstrap}}},
      {"boost",
       {{"n_estimators", a.boost.n_estimators},
        {"learning_rate", a.boost.learning_rate},
        {"max_depth", a.boost.max_depth}}},
      {"features",
       {{"chunk_len_s", a.features.chunk_len_s},
        {"remainder_keep_fraction", a.features.remainder_keep_fraction},
        {"frame_len", a.features.frame_len},
        {"hop", a.features.hop},
        {"rolloff_fraction", a.features.rolloff_fraction},
        {"n_mel_summary_bands", a.features.n_mel_summary_bands}}},
      {"mel",
       {{"sample_rate", a.mel.sample_rate},
        {"n_fft", a.mel.n_fft},
        {"hop", a.mel.hop},
        {"n_mels", a.mel.n_mels},
        {"f_min", a.mel.f_min},
        {"f_max", a.mel.f_max}}},
      {"augment",
       {{"max_shift_fraction", a.augment.max_shift_fraction},
        {"n_freq_masks", a.augment.n_freq_masks},
        {"max_freq_width", a.augment.max_freq_width},
        {"n_time_masks", a.augment.n_time_masks},
        {"max_time_width", a.augment.max_time_width}}}};
  const auto& l = c.lexical;
  j["lexical"] = {{"model", l.model},
                  {"features", l.features},
                  {"mnb", {{"alpha", l.mnb.alpha}}},
                  {"svm", svm_config_to_json(l.svm)},
                  {"embedding",
                   {{"dim", l.embedding.dim},
                    {"window", l.embedding.window},
                    {"negative", l.embedding.negative},
                    {"epochs", l.embedding.epochs},
                    {"learning_rate", l.embedding.learning_rate}}}};
  const auto& v = c.visual;
  ordered_json cnn = cnn_config_to_json(v.cnn);
  cnn.erase("seed");
  j["visual"] = {{"model", v.model},
                 {"detector", v.detector},
                 {"detector_version", v.detector_version},
                 {"visual",
                  {{"image_size", v.visual.image_size},
                   {"crop_margin", v.visual.crop_margin},
                   {"mode", std::string(to_string(v.visual.mode))}}},
                 {"cnn", cnn}};
  return j;
}

}  // namespace ddp
