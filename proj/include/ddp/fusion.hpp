#pragma once

// Late fusion: unit predictions -> per-video modality verdicts -> one vote.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddp/classifiers/artifact.hpp"
#include "ddp/core.hpp"

namespace ddp {

enum class FusionMode { hard_majority, soft_mean };

inline std::string to_string(FusionMode m) { return m == FusionMode::hard_majority ? "hard_majority" : "soft_mean"; }

inline FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "hard_majority") return FusionMode::hard_majority;
  if (s == "soft_mean") return FusionMode::soft_mean;
  throw UsageError("unknown fusion mode '" + s + "' (expected hard_majority or soft_mean)");
}

struct ModalityVerdict {
  Modality modality = Modality::visual;
  std::string video_id;
  std::optional<double> score;  // absent when abstaining
  std::optional<Label> label;
  std::size_t n_units = 0;

  bool abstain() const { return !score.has_value(); }
};

inline ModalityVerdict abstain_verdict(Modality m, std::string video_id) {
  return ModalityVerdict{m, std::move(video_id), std::nullopt, std::nullopt, 0};
}

inline ModalityVerdict make_verdict(Modality m, std::string video_id, double score, std::size_t n_units = 1) {
  require(score >= 0.0 && score <= 1.0, "verdict score outside [0,1]");
  require(n_units > 0, "a scored verdict needs at least one unit");
  return ModalityVerdict{m, std::move(video_id), score, label_from_score(score), n_units};
}

/// Mean unit score; `source_videos[i]` names the video of `preds[i]`.
inline ModalityVerdict aggregate_units(const std::vector<Prediction>& preds,
                                       const std::vector<std::string>& source_videos, Modality modality,
                                       const std::string& video_id) {
  require(preds.size() == source_videos.size(), "aggregate_units: one source video per prediction");
  for (const auto& v : source_videos)
    if (v != video_id) throw ContractError("aggregate_units: unit from video '" + v + "' in verdict for '" + video_id + "'");
  if (preds.empty()) return abstain_verdict(modality, video_id);
  double sum = 0.0;
  for (const auto& p : preds) sum += p.score;
  return make_verdict(modality, video_id, sum / static_cast<double>(preds.size()), preds.size());
}

inline ModalityVerdict aggregate_units(const std::vector<Prediction>& preds, Modality modality,
                                       const std::string& video_id) {
  return aggregate_units(preds, std::vector<std::string>(preds.size(), video_id), modality, video_id);
}

struct FusedVerdict {
  std::string video_id;
  Label label = Label::deceptive;
  FusionMode mode = FusionMode::hard_majority;
  std::array<ModalityVerdict, 3> contributing;  // indexed by modality enum order
  bool tie_break = false;                      // two voters disagreed and confidence decided
  std::optional<double> fused_score;            // soft_mean only
};

inline std::size_t modality_index(Modality m) { return static_cast<std::size_t>(m); }

inline FusedVerdict vote(const std::array<ModalityVerdict, 3>& verdicts, FusionMode mode) {
  std::array<bool, 3> seen{};
  const std::string& vid = verdicts[0].video_id;
  std::array<ModalityVerdict, 3> ordered;
  for (const auto& v : verdicts) {
    const auto k = modality_index(v.modality);
    if (seen[k]) throw ContractError("vote: duplicate modality " + std::string(to_string(v.modality)));
    if (v.video_id != vid) throw ContractError("vote: verdicts from different videos");
    seen[k] = true;
    ordered[k] = v;
  }
  FusedVerdict out;
  out.video_id = vid;
  out.mode = mode;
  out.contributing = ordered;

  std::vector<const ModalityVerdict*> active;
  for (const auto& v : ordered)
    if (!v.abstain()) active.push_back(&v);
  if (active.empty()) throw DataError("no evidence: every modality abstained for video '" + vid + "'");

  if (mode == FusionMode::soft_mean) {
    double s = 0.0;
    for (const auto* v : active) s += *v->score;
    out.fused_score = s / static_cast<double>(active.size());
    out.label = label_from_score(*out.fused_score);
    return out;
  }

  int deceptive = 0;
  for (const auto* v : active) deceptive += *v->label == Label::deceptive ? 1 : 0;
  const int truthful = static_cast<int>(active.size()) - deceptive;
  if (deceptive != truthful) {
    out.label = deceptive > truthful ? Label::deceptive : Label::truthful;
    return out;
  }
  // Only reachable with two disagreeing voters.
  const double c0 = std::abs(*active[0]->score - 0.5), c1 = std::abs(*active[1]->score - 0.5);
  out.tie_break = true;
  if (c0 == c1)
    out.label = Label::deceptive;  // equal confidence falls to the inclusive threshold's side
  else
    out.label = *(c0 > c1 ? active[0] : active[1])->label;
  return out;
}

inline nlohmann::ordered_json fused_to_json(const FusedVerdict& f) {
  nlohmann::ordered_json scores = nlohmann::ordered_json::object();
  for (const auto& v : f.contributing)
    scores[std::string(to_string(v.modality))] = v.score ? nlohmann::ordered_json(*v.score) : nlohmann::ordered_json(nullptr);
  return {{"video_id", f.video_id}, {"label", std::string(to_string(f.label))}, {"mode", to_string(f.mode)},
          {"modality_scores", scores}};
}

}  // namespace ddp
