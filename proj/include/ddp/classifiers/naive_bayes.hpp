#pragma once

// Multinomial naive Bayes with additive (Laplace) smoothing.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ddp/classifiers/artifact.hpp"
#include "ddp/core.hpp"

namespace ddp {

struct NBConfig {
  double alpha = 1.0;

  void validate() const {
    if (!(alpha > 0.0)) throw UsageError("naive Bayes alpha must be positive");
  }
};

struct MNBModel {
  NBConfig config;
  std::size_t n_features = 0;
  std::array<double, 2> log_prior{};                   // indexed by to_int(Label)
  std::array<std::vector<double>, 2> log_likelihood;   // per class, per feature

  /// Posterior P(class | counts), indexed by to_int(Label).
  std::array<double, 2> posterior(std::span<const double> counts) const {
    if (counts.size() != n_features) throw ContractError("mnb: feature dimension mismatch");
    std::array<double, 2> jll = log_prior;
    for (std::size_t j = 0; j < n_features; ++j) {
      if (counts[j] < 0.0) throw DataError("mnb: negative count");
      if (counts[j] == 0.0) continue;
      for (int c = 0; c < 2; ++c) jll[c] += counts[j] * log_likelihood[c][j];
    }
    const double mx = std::max(jll[0], jll[1]);
    const double e0 = std::exp(jll[0] - mx), e1 = std::exp(jll[1] - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
  }
};

inline MNBModel mnb_train(const std::vector<std::vector<double>>& counts, const std::vector<Label>& labels,
                          const NBConfig& config = {}) {
  config.validate();
  if (counts.empty() || counts.size() != labels.size())
    throw ContractError("mnb_train: need one label per non-empty count row");
  MNBModel m;
  m.config = config;
  m.n_features = counts.front().size();
  std::array<double, 2> n_docs{};
  std::array<std::vector<double>, 2> totals{std::vector<double>(m.n_features, 0.0),
                                            std::vector<double>(m.n_features, 0.0)};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != m.n_features) throw ContractError("mnb_train: ragged count rows");
    const int c = to_int(labels[i]);
    n_docs[c] += 1.0;
    for (std::size_t j = 0; j < m.n_features; ++j) {
      const double v = counts[i][j];
      if (v < 0.0 || !std::isfinite(v)) throw DataError("mnb_train: counts must be finite and nonnegative");
      totals[c][j] += v;
    }
  }
  if (n_docs[0] == 0.0 || n_docs[1] == 0.0) throw DataError("mnb_train: both classes must be present");
  const double n = n_docs[0] + n_docs[1];
  for (int c = 0; c < 2; ++c) {
    m.log_prior[c] = std::log(n_docs[c] / n);
    double class_total = 0.0;
    for (double v : totals[c]) class_total += v;
    const double denom = class_total + config.alpha * static_cast<double>(m.n_features);
    m.log_likelihood[c].resize(m.n_features);
    for (std::size_t j = 0; j < m.n_features; ++j)
      m.log_likelihood[c][j] = std::log((totals[c][j] + config.alpha) / denom);
  }
  return m;
}

/// Equal posteriors score exactly 0.5, which labels deceptive.
inline Prediction mnb_predict(const MNBModel& model, std::span<const double> counts, std::string unit_id = {}) {
  return make_prediction(std::move(unit_id), model.posterior(counts)[to_int(Label::deceptive)]);
}

inline Artifact mnb_to_artifact(const MNBModel& m) {
  Artifact a = new_artifact("mnb");
  a.header["config"] = {{"alpha", m.config.alpha}};
  a.header["n_features"] = m.n_features;
  a.add_block("log_prior", {m.log_prior[0], m.log_prior[1]});
  a.add_block("log_likelihood_truthful", m.log_likelihood[0]);
  a.add_block("log_likelihood_deceptive", m.log_likelihood[1]);
  return a;
}

inline MNBModel mnb_from_artifact(const Artifact& a) {
  a.expect_kind("mnb");
  MNBModel m;
  m.config.alpha = a.header.at("config").at("alpha");
  m.n_features = a.header.at("n_features");
  const auto& lp = a.block("log_prior");
  if (lp.size() != 2) throw DataError("mnb artifact: bad prior block");
  m.log_prior = {lp[0], lp[1]};
  m.log_likelihood[0] = a.block("log_likelihood_truthful");
  m.log_likelihood[1] = a.block("log_likelihood_deceptive");
  if (m.log_likelihood[0].size() != m.n_features || m.log_likelihood[1].size() != m.n_features)
    throw DataError("mnb artifact: likelihood block size mismatch");
  return m;
}

}  // namespace ddp
