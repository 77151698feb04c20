#pragma once

// Experiment orchestration: manifest -> splits -> ingest (cached) -> per
// modality train/predict -> per-video verdicts -> vote -> metrics -> report.
//
// Caches live under config.cache_dir (or $DDP_CACHE_DIR):
//   ingest/<content key>/{frames/,audio.raw,noaudio,complete}
//   detections/<detector>-<version>/<video>.jsonl
//   models/<modality>-<key>.art

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ddp/acoustic.hpp"
#include "ddp/classifiers/artifact.hpp"
#include "ddp/classifiers/cnn.hpp"
#include "ddp/classifiers/naive_bayes.hpp"
#include "ddp/classifiers/svm.hpp"
#include "ddp/classifiers/trees.hpp"
#include "ddp/dataset.hpp"
#include "ddp/fusion.hpp"
#include "ddp/harness/config.hpp"
#include "ddp/harness/metrics.hpp"
#include "ddp/harness/reference.hpp"
#include "ddp/lexical.hpp"
#include "ddp/media.hpp"
#include "ddp/visual.hpp"

namespace ddp {

inline constexpr int kReportFormatVersion = 1;

// ---------------------------------------------------------------------------
// Error context

/// Re-throws any library error with "[stage] video: " prepended, keeping its kind.
template <typename Fn>
auto in_stage(const std::string& stage, const std::string& video_id, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = "[" + stage + "]" + (video_id.empty() ? "" : " video '" + video_id + "'") + ": ";
  try {
    return fn();
  } catch (const DetectorError& e) {
    throw DetectorError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const UsageError& e) {
    throw UsageError(prefix + e.what());
  } catch (const ContractError& e) {
    throw ContractError(prefix + e.what());
  }
}

// ---------------------------------------------------------------------------
// Corpus and splits

struct Corpus {
  ExperimentConfig config;
  std::vector<VideoRecord> records;  // labels resolved
  std::filesystem::path manifest_dir;
  std::string manifest_hash;
  std::map<std::string, Label> truth;

  std::filesystem::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_relative() ? manifest_dir / path : path;
  }
  const VideoRecord& record(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return r;
    throw ContractError("unknown video id '" + id + "'");
  }
  /// "rlt" or "mu3d" when the whole manifest is one of the published datasets.
  std::optional<std::string> reference_dataset() const {
    std::optional<DatasetTag> tag;
    for (const auto& r : records) {
      if (tag && *tag != r.dataset_tag) return std::nullopt;
      tag = r.dataset_tag;
    }
    if (!tag || *tag == DatasetTag::synthetic) return std::nullopt;
    return std::string(to_string(*tag));
  }
};

inline std::filesystem::path effective_cache_dir(const ExperimentConfig& c) {
  if (const char* env = std::getenv("DDP_CACHE_DIR"); env && *env) return env;
  return c.cache_dir;
}

inline Corpus load_corpus(const ExperimentConfig& config) {
  config.validate();
  Corpus c;
  c.config = config;
  const std::filesystem::path manifest(config.manifest);
  if (!std::filesystem::is_regular_file(manifest)) throw DataError("manifest not found: " + manifest.string());
  c.manifest_dir = manifest.parent_path();
  c.manifest_hash = Fnv64{}.add(detail::read_file_bytes(manifest)).hex();
  c.records = in_stage("manifest", "", [&] { return resolve_labels(load_manifest(manifest), config.dataset); });
  if (c.records.empty()) throw DataError("[manifest] no records in " + manifest.string());
  for (const auto& r : c.records) c.truth[r.id] = *r.label;
  return c;
}

inline std::vector<SplitPlan> plan_splits(const Corpus& c) {
  return in_stage("split", "", [&] {
    std::vector<SplitPlan> plans;
    if (c.config.dataset.n_folds) {
      for (int k = 0; k < *c.config.dataset.n_folds; ++k) plans.push_back(make_fold(c.records, c.config.dataset, k));
    } else {
      plans.push_back(make_split(c.records, c.config.dataset));
    }
    return plans;
  });
}

// ---------------------------------------------------------------------------
// Leakage guard

struct LeakageGuard {
  std::size_t checks = 0;
  std::vector<std::pair<std::string, std::string>> train_log;  // (source video, unit) in check order

  void train_unit(const SplitPlan& plan, const std::string& source_video, const std::string& unit) {
    ++checks;
    train_log.emplace_back(source_video, unit);
    if (!plan.in_train(source_video))
      throw ContractError("leakage: training unit '" + unit + "' comes from non-training video '" + source_video + "'");
  }
  void test_unit(const SplitPlan& plan, const std::string& source_video, const std::string& unit) {
    ++checks;
    if (!plan.in_test(source_video))
      throw ContractError("leakage: scored unit '" + unit + "' comes from non-test video '" + source_video + "'");
  }
};

// ---------------------------------------------------------------------------
// Ingest

struct IngestedVideo {
  std::string id;
  std::string content_hash;  // media + transcript bytes
  std::vector<Frame> frames;
  std::optional<AudioClip> audio;
  RawDocument transcript;
};

using IngestedCorpus = std::map<std::string, IngestedVideo>;

inline IngestedVideo ingest_video(const Corpus& c, const VideoRecord& r) {
  namespace fs = std::filesystem;
  return in_stage("ingest", r.id, [&] {
    IngestedVideo v;
    v.id = r.id;
    const fs::path media = c.resolve(r.media_path);
    if (media.empty() || !fs::is_regular_file(media)) throw DataError("media file not found: " + media.string());
    const std::string media_hash = Fnv64{}.add(detail::read_file_bytes(media)).hex();
    std::string text_hash = "none";
    if (!r.transcript_path.empty()) {
      v.transcript = load_transcript(c.resolve(r.transcript_path), r.id);
      text_hash = Fnv64{}.add(v.transcript.text).hex();
    } else {
      v.transcript = RawDocument{"", r.id};
    }
    v.content_hash = Fnv64{}.add(media_hash).add(text_hash).hex();

    const auto& ic = c.config.ingest;
    Fnv64 key;
    key.add("ingest-v1").add(media_hash).add(static_cast<std::uint64_t>(std::llround(ic.frame_step_s * 1e6)));
    key.add(static_cast<std::uint64_t>(ic.target_sample_rate));
    const fs::path dir = effective_cache_dir(c.config) / "ingest" / key.hex();
    if (!fs::exists(dir / "complete")) {
      fs::remove_all(dir);
      const auto source = open_media(media);
      write_frame_cache(dir, extract_frames(*source, r.id, ic));
      if (source->has_audio())
        write_audio_cache(dir, extract_audio(*source, r.id, ic));
      else
        detail::write_file_bytes(dir / "noaudio", "");
      detail::write_file_bytes(dir / "complete", "");
    }
    // Always read back from the cache so cold and warm runs see identical data.
    v.frames = read_frame_cache(dir, r.id);
    if (!fs::exists(dir / "noaudio")) v.audio = read_audio_cache(dir, r.id);
    return v;
  });
}

inline IngestedCorpus ingest_corpus(const Corpus& c) {
  IngestedCorpus out;
  for (const auto& r : c.records) out.emplace(r.id, ingest_video(c, r));
  return out;
}

// ---------------------------------------------------------------------------
// Artifact bundles: several artifacts stored as one, blocks prefixed "part/".

inline Artifact pack_bundle(const std::string& kind, const std::vector<std::pair<std::string, Artifact>>& parts) {
  Artifact b = new_artifact(kind);
  b.header["parts"] = nlohmann::ordered_json::array();
  for (const auto& [name, a] : parts) {
    nlohmann::ordered_json h = a.header;
    b.header["parts"].push_back({{"name", name}, {"header", h}});
    for (const auto& [bn, values] : a.blocks) b.add_block(name + "/" + bn, values);
  }
  return b;
}

inline Artifact unpack_part(const Artifact& bundle, const std::string& name) {
  for (const auto& p : bundle.header.at("parts")) {
    if (p.at("name") != name) continue;
    Artifact a;
    a.header = p.at("header");
    const std::string prefix = name + "/";
    for (const auto& [bn, values] : bundle.blocks)
      if (bn.rfind(prefix, 0) == 0) a.add_block(bn.substr(prefix.size()), values);
    return a;
  }
  throw DataError("bundle has no part '" + name + "'");
}

inline Artifact norm_to_artifact(const NormStats& s) {
  Artifact a = new_artifact("norm");
  a.header["fitted_on"] = s.fitted_on;
  a.add_block("mean", s.mean);
  a.add_block("std", s.std);
  return a;
}

inline NormStats norm_from_artifact(const Artifact& a) {
  a.expect_kind("norm");
  return NormStats{a.block("mean"), a.block("std"), a.header.value("fitted_on", std::string{})};
}

inline Artifact tfidf_to_artifact(const TfidfModel& m) {
  Artifact a = new_artifact("tfidf");
  std::vector<std::string> tokens(m.size());
  for (const auto& [t, i] : m.vocabulary) tokens[i] = t;
  a.header["tokens"] = tokens;
  a.header["n_docs"] = m.n_docs;
  a.add_block("idf", m.idf);
  return a;
}

inline TfidfModel tfidf_from_artifact(const Artifact& a) {
  a.expect_kind("tfidf");
  TfidfModel m;
  const auto tokens = a.header.at("tokens").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < tokens.size(); ++i) m.vocabulary.emplace(tokens[i], i);
  m.idf = a.block("idf");
  m.n_docs = a.header.at("n_docs");
  if (m.idf.size() != tokens.size()) throw DataError("tfidf artifact: idf size mismatch");
  return m;
}

inline Artifact embedding_to_artifact(const EmbeddingTable& t) {
  Artifact a = new_artifact("embedding");
  a.header["dim"] = t.dim;
  a.header["tokens"] = t.tokens;
  a.add_block("vectors", t.vectors);
  return a;
}

inline EmbeddingTable embedding_from_artifact(const Artifact& a) {
  a.expect_kind("embedding");
  EmbeddingTable t;
  t.dim = a.header.at("dim");
  t.tokens = a.header.at("tokens").get<std::vector<std::string>>();
  t.vectors = a.block("vectors");
  if (t.vectors.size() != t.tokens.size() * t.dim) throw DataError("embedding artifact: size mismatch");
  return t;
}

/// One fitted vector classifier of any classical kind.
struct VectorModel {
  std::variant<SVMModel, ForestModel, BoostModel, MNBModel> model;

  Prediction predict(std::span<const double> x, std::string unit) const {
    return std::visit(
        [&](const auto& m) -> Prediction {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, SVMModel>) return svm_predict(m, x, std::move(unit));
          else if constexpr (std::is_same_v<M, ForestModel>) return forest_predict(m, x, std::move(unit));
          else if constexpr (std::is_same_v<M, BoostModel>) return boost_predict(m, x, std::move(unit));
          else return mnb_predict(m, x, std::move(unit));
        },
        model);
  }

  Artifact to_artifact() const {
    return std::visit(
        [](const auto& m) -> Artifact {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, SVMModel>) return svm_to_artifact(m);
          else if constexpr (std::is_same_v<M, ForestModel>) return forest_to_artifact(m);
          else if constexpr (std::is_same_v<M, BoostModel>) return boost_to_artifact(m);
          else return mnb_to_artifact(m);
        },
        model);
  }

  static VectorModel from_artifact(const Artifact& a) {
    const std::string k = a.kind();
    if (k == "svm") return {svm_from_artifact(a)};
    if (k == "forest") return {forest_from_artifact(a)};
    if (k == "boost") return {boost_from_artifact(a)};
    if (k == "mnb") return {mnb_from_artifact(a)};
    throw DataError("unknown model artifact kind '" + k + "'");
  }
};

// ---------------------------------------------------------------------------
// Per-modality unit extraction

struct UnitRows {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> unit_ids;
  std::vector<std::string> videos;
};

/// Chunk features for one video. With `copy` > 0 each chunk is first
/// circularly time-shifted with a copy-specific seed (training only).
inline UnitRows acoustic_units(const IngestedVideo& v, const AcousticModelConfig& ac, int copy) {
  UnitRows out;
  if (!v.audio || v.audio->samples.empty()) return out;
  for (const auto& chunk : chunk_audio(*v.audio, ac.features)) {
    AudioClip input = chunk;
    if (copy > 0) {
      AugmentConfig aug = ac.augment;
      aug.seed = derive_seed(ac.augment.seed, "copy:" + std::to_string(copy));
      input = time_shift(chunk, aug);
    }
    MelConfig mel = ac.mel;
    mel.sample_rate = input.sample_rate;
    const auto f = acoustic_features(input, ac.features, mel);
    if (f.abstain) continue;
    out.rows.emplace_back(f.values.begin(), f.values.end());
    out.unit_ids.push_back(f.clip_id + (copy > 0 ? "#aug" + std::to_string(copy) : ""));
    out.videos.push_back(v.id);
  }
  return out;
}

/// Detector wrapper that persists detections per video and replays them.
class CachingDetector final : public FaceDetector {
 public:
  CachingDetector(std::unique_ptr<FaceDetector> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {}
  std::string name() const override { return inner_->name(); }
  std::string version() const override { return inner_->version(); }
  std::vector<FaceBox> detect(const Frame& frame) const override {
    auto it = logs_.find(frame.source_video);
    const auto path = dir_ / (frame.source_video + ".jsonl");
    if (it == logs_.end())
      it = logs_.emplace(frame.source_video, std::filesystem::exists(path) ? read_detection_log(path) : DetectionLog{})
               .first;
    const auto cs = centiseconds(frame.timestamp_s);
    if (auto hit = it->second.find(cs); hit != it->second.end()) return hit->second;
    auto boxes = inner_->detect(frame);
    it->second[cs] = boxes;
    write_detection_log(path, it->second);
    return boxes;
  }

 private:
  std::unique_ptr<FaceDetector> inner_;
  std::filesystem::path dir_;
  mutable std::map<std::string, DetectionLog> logs_;
};

inline std::unique_ptr<FaceDetector> make_detector(const ExperimentConfig& c) {
  const auto& v = c.visual;
  if (v.detector == "full_image") return std::make_unique<FullImageDetector>();
  if (v.detector == "replay") return std::make_unique<ReplayDetector>(v.detector_dir);
  auto inner = std::make_unique<ExternalCommandDetector>(v.detector_command, v.detector_version);
  const auto dir = effective_cache_dir(c) / "detections" / (inner->name() + "-" + inner->version());
  return std::make_unique<CachingDetector>(std::move(inner), dir);
}

// ---------------------------------------------------------------------------
// Training and prediction per modality

struct TrainedModality {
  Modality modality = Modality::visual;
  Artifact bundle;
  std::string cache_key;
  std::size_t n_train_units = 0;
  bool from_cache = false;
};

inline std::string modality_cache_key(const Corpus& c, const IngestedCorpus& data, const SplitPlan& plan, Modality m) {
  const auto echo = config_echo(c.config);
  Fnv64 h;
  h.add("model-v2").add(std::string(to_string(m))).add(echo.at(std::string(to_string(m))).dump());
  h.add(echo.at("ingest").dump()).add(c.config.seed);
  h.add(static_cast<std::uint64_t>(kArtifactFormatVersion));
  for (const auto& id : plan.train_ids) h.add(id).add(data.at(id).content_hash).add(std::string(to_string(c.truth.at(id))));
  return h.hex();
}

inline std::vector<Label> labels_of(const Corpus& c, const std::vector<std::string>& videos) {
  std::vector<Label> y;
  y.reserve(videos.size());
  for (const auto& v : videos) y.push_back(c.truth.at(v));
  return y;
}

inline Artifact train_acoustic(const Corpus& c, const IngestedCorpus& data, const SplitPlan& plan, LeakageGuard& guard,
                               std::size_t& n_units) {
  const auto& ac = c.config.acoustic;
  UnitRows train;
  for (const auto& id : plan.train_ids) {
    for (int copy = 0; copy <= ac.augment_copies; ++copy) {
      auto u = in_stage("acoustic.features", id, [&] { return acoustic_units(data.at(id), ac, copy); });
      for (std::size_t i = 0; i < u.rows.size(); ++i) {
        guard.train_unit(plan, u.videos[i], u.unit_ids[i]);
        train.rows.push_back(std::move(u.rows[i]));
        train.unit_ids.push_back(u.unit_ids[i]);
        train.videos.push_back(u.videos[i]);
      }
    }
  }
  n_units = train.rows.size();
  const auto stats = in_stage("acoustic.normalize", "", [&] { return fit_normalizer(train.rows, "train"); });
  const auto X = apply_normalizer(train.rows, stats);
  const auto y = labels_of(c, train.videos);
  VectorModel model = in_stage("acoustic.train", "", [&]() -> VectorModel {
    if (ac.model == "svm") return {svm_train(X, y, ac.svm)};
    if (ac.model == "forest") return {forest_train(X, y, ac.forest)};
    return {boost_train(X, y, ac.boost)};
  });
  return pack_bundle("acoustic_bundle", {{"norm", norm_to_artifact(stats)}, {"model", model.to_artifact()}});
}

inline std::vector<TokenizedDocument> lexical_docs(const IngestedCorpus& data, const std::vector<std::string>& ids) {
  std::vector<TokenizedDocument> docs;
  for (const auto& id : ids) docs.push_back(in_stage("lexical.normalize", id, [&] { return normalize_text(data.at(id).transcript); }));
  return docs;
}

/// Feature row for one document, or nullopt when the document abstains.
inline std::optional<std::vector<double>> lexical_row(const TokenizedDocument& doc, const LexicalModelConfig& lc,
                                                      const TfidfModel& tfidf, const EmbeddingTable* emb) {
  if (lc.model == "mnb") {
    const auto counts = term_counts(doc, tfidf);
    if (counts.empty()) return std::nullopt;
    return densify(counts, tfidf.size());
  }
  if (lc.features == "tfidf") {
    const auto v = tfidf_transform(doc, tfidf);
    if (v.empty()) return std::nullopt;
    return densify(v, tfidf.size());
  }
  const auto e = embed_document(doc, tfidf, *emb);
  if (e.abstain) return std::nullopt;
  return e.values;
}

inline Artifact train_lexical(const Corpus& c, const IngestedCorpus& data, const SplitPlan& plan, LeakageGuard& guard,
                              std::size_t& n_units) {
  const auto& lc = c.config.lexical;
  const auto docs = lexical_docs(data, plan.train_ids);
  for (const auto& d : docs) guard.train_unit(plan, d.source_video, d.source_video + "#doc");
  const auto tfidf = in_stage("lexical.tfidf", "", [&] { return tfidf_fit(docs); });
  std::optional<EmbeddingTable> emb;
  if (lc.model == "svm" && lc.features == "embedding")
    emb = in_stage("lexical.embedding", "", [&] { return train_word_embeddings(docs, lc.embedding); });
  std::vector<std::vector<double>> X;
  std::vector<std::string> videos;
  for (const auto& d : docs) {
    if (auto row = lexical_row(d, lc, tfidf, emb ? &*emb : nullptr)) {
      X.push_back(std::move(*row));
      videos.push_back(d.source_video);
    }
  }
  n_units = X.size();
  const auto y = labels_of(c, videos);
  VectorModel model = in_stage("lexical.train", "", [&]() -> VectorModel {
    if (lc.model == "mnb") return {mnb_train(X, y, lc.mnb)};
    return {svm_train(X, y, lc.svm)};
  });
  std::vector<std::pair<std::string, Artifact>> parts{{"tfidf", tfidf_to_artifact(tfidf)}};
  if (emb) parts.emplace_back("embedding", embedding_to_artifact(*emb));
  parts.emplace_back("model", model.to_artifact());
  return pack_bundle("lexical_bundle", parts);
}

inline std::vector<Frame> visual_units(const Corpus& c, const IngestedVideo& v, const FaceDetector& detector) {
  return in_stage("visual.filter_and_crop", v.id, [&] { return filter_and_crop(v.frames, detector, c.config.visual.visual); });
}

inline Artifact train_visual(const Corpus& c, const IngestedCorpus& data, const SplitPlan& plan, LeakageGuard& guard,
                             std::size_t& n_units) {
  const auto detector = make_detector(c.config);
  std::vector<Image> images;
  std::vector<Label> labels;
  for (const auto& id : plan.train_ids) {
    for (auto& f : visual_units(c, data.at(id), *detector)) {
      guard.train_unit(plan, f.source_video, frame_id(f));
      images.push_back(std::move(f.pixels));
      labels.push_back(c.truth.at(id));
    }
  }
  n_units = images.size();
  const auto model = in_stage("visual.train", "", [&] { return cnn_train(images, labels, c.config.visual.cnn); });
  return pack_bundle("visual_bundle", {{"model", cnn_to_artifact(model)}});
}

inline TrainedModality train_modality(const Corpus& c, const IngestedCorpus& data, const SplitPlan& plan, Modality m,
                                      LeakageGuard& guard) {
  TrainedModality t;
  t.modality = m;
  t.cache_key = modality_cache_key(c, data, plan, m);
  const auto path = effective_cache_dir(c.config) / "models" / (std::string(to_string(m)) + "-" + t.cache_key + ".art");
  if (std::filesystem::exists(path)) {
    t.bundle = load_artifact(path);
    t.n_train_units = t.bundle.header.value("n_train_units", std::size_t{0});
    t.from_cache = true;
    // Re-check the cached model's provenance against the current split.
    const auto& sources = t.bundle.header.at("train_unit_sources");
    for (const auto& e : sources) guard.train_unit(plan, e.at(0).get<std::string>(), e.at(1).get<std::string>());
    return t;
  }
  const std::size_t log_start = guard.train_log.size();
  switch (m) {
    case Modality::acoustic: t.bundle = train_acoustic(c, data, plan, guard, t.n_train_units); break;
    case Modality::lexical: t.bundle = train_lexical(c, data, plan, guard, t.n_train_units); break;
    case Modality::visual: t.bundle = train_visual(c, data, plan, guard, t.n_train_units); break;
  }
  t.bundle.header["modality"] = std::string(to_string(m));
  t.bundle.header["seed"] = c.config.seed;
  t.bundle.header["split"] = split_to_json(plan);
  t.bundle.header["n_train_units"] = t.n_train_units;
  auto sources = nlohmann::ordered_json::array();
  for (std::size_t i = log_start; i < guard.train_log.size(); ++i)
    sources.push_back({guard.train_log[i].first, guard.train_log[i].second});
  t.bundle.header["train_unit_sources"] = sources;
  save_artifact(path, t.bundle);
  return t;
}

/// Verdict per test video of `plan`.
inline std::map<std::string, ModalityVerdict> predict_modality(const Corpus& c, const IngestedCorpus& data,
                                                               const SplitPlan& plan, const TrainedModality& t,
                                                               LeakageGuard& guard) {
  std::map<std::string, ModalityVerdict> out;
  const Modality m = t.modality;
  auto finish = [&](const std::string& id, const std::vector<Prediction>& preds) {
    for (const auto& p : preds) guard.test_unit(plan, id, p.unit_id);
    out[id] = aggregate_units(preds, m, id);
  };
  if (m == Modality::acoustic) {
    const auto stats = norm_from_artifact(unpack_part(t.bundle, "norm"));
    const auto model = VectorModel::from_artifact(unpack_part(t.bundle, "model"));
    for (const auto& id : plan.test_ids) {
      const auto u = in_stage("acoustic.features", id, [&] { return acoustic_units(data.at(id), c.config.acoustic, 0); });
      std::vector<Prediction> preds;
      for (std::size_t i = 0; i < u.rows.size(); ++i)
        preds.push_back(in_stage("acoustic.predict", id, [&] {
          return model.predict(apply_normalizer(u.rows[i], stats), u.unit_ids[i]);
        }));
      finish(id, preds);
    }
  } else if (m == Modality::lexical) {
    const auto& lc = c.config.lexical;
    const auto tfidf = tfidf_from_artifact(unpack_part(t.bundle, "tfidf"));
    std::optional<EmbeddingTable> emb;
    if (lc.model == "svm" && lc.features == "embedding") emb = embedding_from_artifact(unpack_part(t.bundle, "embedding"));
    const auto model = VectorModel::from_artifact(unpack_part(t.bundle, "model"));
    const auto docs = lexical_docs(data, plan.test_ids);
    for (const auto& d : docs) {
      std::vector<Prediction> preds;
      if (auto row = lexical_row(d, lc, tfidf, emb ? &*emb : nullptr))
        preds.push_back(in_stage("lexical.predict", d.source_video, [&] { return model.predict(*row, d.source_video + "#doc"); }));
      finish(d.source_video, preds);
    }
  } else {
    const auto model = cnn_from_artifact(unpack_part(t.bundle, "model"));
    const auto detector = make_detector(c.config);
    for (const auto& id : plan.test_ids) {
      const auto frames = visual_units(c, data.at(id), *detector);
      std::vector<Image> images;
      std::vector<std::string> ids;
      for (const auto& f : frames) {
        images.push_back(f.pixels);
        ids.push_back(frame_id(f));
      }
      finish(id, in_stage("visual.predict", id, [&] { return cnn_predict_all(model, images, ids); }));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fusion over a set of per-modality verdicts

struct FusionOutcome {
  std::vector<FusedVerdict> fused;      // one per video that had evidence
  std::vector<std::string> no_evidence;  // videos where every modality abstained
};

inline FusionOutcome fuse_verdicts(const std::vector<std::string>& video_ids,
                                   const std::map<Modality, std::map<std::string, ModalityVerdict>>& verdicts,
                                   FusionMode mode) {
  FusionOutcome out;
  for (const auto& id : video_ids) {
    std::array<ModalityVerdict, 3> three;
    for (Modality m : kAllModalities) {
      ModalityVerdict v = abstain_verdict(m, id);
      if (auto it = verdicts.find(m); it != verdicts.end())
        if (auto jt = it->second.find(id); jt != it->second.end()) v = jt->second;
      three[modality_index(m)] = v;
    }
    try {
      out.fused.push_back(vote(three, mode));
    } catch (const DataError&) {
      out.no_evidence.push_back(id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report bundle

struct ReportBundle {
  int format_version = kReportFormatVersion;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::string manifest_hash;
  std::vector<SplitPlan> splits;
  std::map<Modality, Metrics> modality_metrics;
  std::map<Modality, std::size_t> train_units;
  std::map<FusionMode, Metrics> fused_metrics;
  FusionMode primary_mode = FusionMode::hard_majority;
  std::map<Modality, std::map<std::string, ModalityVerdict>> verdicts;  // pooled over folds
  std::vector<FusedVerdict> fused;                                      // primary mode
  std::vector<std::string> no_evidence;
  std::size_t leakage_checks = 0;
  std::optional<std::string> reference_dataset;
  std::vector<ComparisonRow> comparison;
};

inline std::map<std::string, std::optional<Label>> verdict_labels(const std::vector<std::string>& ids,
                                                                  const std::map<std::string, ModalityVerdict>& v) {
  std::map<std::string, std::optional<Label>> out;
  for (const auto& id : ids) {
    auto it = v.find(id);
    out[id] = it == v.end() ? std::nullopt : it->second.label;
  }
  return out;
}

inline Metrics fused_metrics(const std::vector<std::string>& ids, const FusionOutcome& f,
                             const std::map<std::string, Label>& truth) {
  std::map<std::string, std::optional<Label>> pred;
  for (const auto& id : ids) pred[id] = std::nullopt;
  for (const auto& v : f.fused) pred[v.video_id] = v.label;
  return evaluate(pred, truth);
}

/// Full pipeline. Metrics for a modality with no scored video are omitted.
inline ReportBundle run_experiment(const ExperimentConfig& config) {
  const Corpus corpus = load_corpus(config);
  ReportBundle rb;
  rb.seed = config.seed;
  rb.config = config_echo(config);
  rb.manifest_hash = corpus.manifest_hash;
  rb.primary_mode = config.fusion;
  rb.splits = plan_splits(corpus);
  const IngestedCorpus data = ingest_corpus(corpus);

  LeakageGuard guard;
  std::vector<std::string> tested;
  for (const auto& plan : rb.splits) {
    tested.insert(tested.end(), plan.test_ids.begin(), plan.test_ids.end());
    for (Modality m : config.modalities) {
      const auto trained = train_modality(corpus, data, plan, m, guard);
      rb.train_units[m] += trained.n_train_units;
      for (auto& [id, v] : predict_modality(corpus, data, plan, trained, guard)) rb.verdicts[m][id] = v;
    }
  }
  std::sort(tested.begin(), tested.end());
  if (std::adjacent_find(tested.begin(), tested.end()) != tested.end())
    throw ContractError("a video was tested in more than one fold");
  rb.leakage_checks = guard.checks;

  for (Modality m : config.modalities) {
    const auto labels = verdict_labels(tested, rb.verdicts[m]);
    bool any = false;
    for (const auto& [id, l] : labels) any = any || l.has_value();
    if (any) rb.modality_metrics[m] = evaluate(labels, corpus.truth);
  }
  for (FusionMode mode : {FusionMode::hard_majority, FusionMode::soft_mean}) {
    const auto outcome = fuse_verdicts(tested, rb.verdicts, mode);
    if (!outcome.fused.empty()) rb.fused_metrics[mode] = fused_metrics(tested, outcome, corpus.truth);
    if (mode == config.fusion) {
      rb.fused = outcome.fused;
      rb.no_evidence = outcome.no_evidence;
    }
  }

  rb.reference_dataset = corpus.reference_dataset();
  for (const std::string ds : {"rlt", "mu3d"}) {
    std::optional<double> ours[4];
    if (rb.reference_dataset == ds) {
      const Modality order[3] = {Modality::visual, Modality::acoustic, Modality::lexical};
      for (int i = 0; i < 3; ++i)
        if (auto it = rb.modality_metrics.find(order[i]); it != rb.modality_metrics.end()) ours[i] = it->second.accuracy;
      if (auto it = rb.fused_metrics.find(config.fusion); it != rb.fused_metrics.end()) ours[3] = it->second.accuracy;
    }
    for (auto& row : compare_to_reference(ds, ours)) rb.comparison.push_back(std::move(row));
  }
  return rb;
}

}  // namespace ddp
