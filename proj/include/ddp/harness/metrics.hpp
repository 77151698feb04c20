#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "ddp/core.hpp"

namespace ddp {

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing was predicted deceptive
  double recall = 0.0;     // 0 when no deceptive video was scored
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t n_videos = 0;  // scored + abstained
  std::size_t n_abstained = 0;

  std::size_t n_scored() const { return tp + fp + fn + tn; }
};

/// `predicted[id]` is empty for an abstention. Every predicted id must have a
/// truth label.
inline Metrics evaluate(const std::map<std::string, std::optional<Label>>& predicted,
                        const std::map<std::string, Label>& truth) {
  Metrics m;
  for (const auto& [id, pred] : predicted) {
    auto it = truth.find(id);
    if (it == truth.end()) throw ContractError("evaluate: no truth label for video '" + id + "'");
    ++m.n_videos;
    if (!pred) {
      ++m.n_abstained;
      continue;
    }
    const bool p = *pred == Label::deceptive, t = it->second == Label::deceptive;
    if (p && t) ++m.tp;
    else if (p) ++m.fp;
    else if (t) ++m.fn;
    else ++m.tn;
  }
  const std::size_t n = m.n_scored();
  if (n == 0) throw DataError("evaluate: no scored videos");
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(n);
  m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

inline nlohmann::ordered_json metrics_to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"confusion", {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}}},
          {"n_videos", m.n_videos},
          {"n_scored", m.n_scored()},
          {"n_abstained", m.n_abstained}};
}

}  // namespace ddp
