#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ddp/fusion.hpp"
#include "support/test_util.hpp"

using namespace ddp;

namespace {

using Triple = std::array<ModalityVerdict, 3>;

// Scores chosen so the label is unambiguous and confidences differ.
double score_for(Label l, double confidence) { return l == Label::deceptive ? 0.5 + confidence : 0.5 - confidence; }

Triple triple(const std::array<std::optional<double>, 3>& scores, const std::string& vid = "v") {
  Triple t;
  for (std::size_t k = 0; k < 3; ++k)
    t[k] = scores[k] ? make_verdict(kAllModalities[k], vid, *scores[k]) : abstain_verdict(kAllModalities[k], vid);
  return t;
}

// Independent statement of the voting rule.
Label oracle_vote(const std::array<std::optional<double>, 3>& scores) {
  int dec = 0, tru = 0;
  std::vector<double> active;
  for (const auto& s : scores)
    if (s) {
      active.push_back(*s);
      (*s >= 0.5 ? dec : tru) += 1;
    }
  if (dec > tru) return Label::deceptive;
  if (tru > dec) return Label::truthful;
  const double c0 = std::fabs(active[0] - 0.5), c1 = std::fabs(active[1] - 0.5);
  if (c0 == c1) return Label::deceptive;
  const double winner = c0 > c1 ? active[0] : active[1];
  return winner >= 0.5 ? Label::deceptive : Label::truthful;
}

}  // namespace

TEST(Vote, AllLabelCombinations) {
  for (int mask = 0; mask < 8; ++mask) {
    std::array<std::optional<double>, 3> s;
    int dec = 0;
    for (int k = 0; k < 3; ++k) {
      const bool d = (mask >> k) & 1;
      dec += d;
      s[k] = score_for(d ? Label::deceptive : Label::truthful, 0.1 + 0.1 * k);
    }
    const auto f = vote(triple(s), FusionMode::hard_majority);
    EXPECT_EQ(f.label, dec >= 2 ? Label::deceptive : Label::truthful) << mask;
    EXPECT_FALSE(f.tie_break);
  }
}

TEST(Vote, OneAbstentionPatterns) {
  // 3 abstaining positions x 4 label pairs = 12 patterns.
  int patterns = 0;
  for (int off = 0; off < 3; ++off)
    for (int mask = 0; mask < 4; ++mask) {
      std::array<std::optional<double>, 3> s;
      std::array<Label, 2> labels{};
      std::array<double, 2> conf{0.3, 0.1};  // the first active voter is the more confident one
      int a = 0;
      for (int k = 0; k < 3; ++k) {
        if (k == off) continue;
        labels[a] = ((mask >> a) & 1) ? Label::deceptive : Label::truthful;
        s[k] = score_for(labels[a], conf[a]);
        ++a;
      }
      const auto f = vote(triple(s), FusionMode::hard_majority);
      const Label want = labels[0];  // agreement, or the more confident of two
      EXPECT_EQ(f.label, want) << off << "/" << mask;
      EXPECT_EQ(f.tie_break, labels[0] != labels[1]);
      EXPECT_TRUE(f.contributing[static_cast<std::size_t>(off)].abstain());
      ++patterns;

      // Swap confidences: the disagreeing case follows the other voter.
      a = 0;
      for (int k = 0; k < 3; ++k) {
        if (k == off) continue;
        s[k] = score_for(labels[a], conf[1 - a]);
        ++a;
      }
      EXPECT_EQ(vote(triple(s), FusionMode::hard_majority).label, labels[1]);
    }
  EXPECT_EQ(patterns, 12);
}

TEST(Vote, EqualConfidenceTieGoesDeceptive) {
  const auto f = vote(triple({0.75, 0.25, std::nullopt}), FusionMode::hard_majority);
  EXPECT_TRUE(f.tie_break);
  EXPECT_EQ(f.label, Label::deceptive);
}

TEST(Vote, SingleVoterAndNoEvidence) {
  EXPECT_EQ(vote(triple({std::nullopt, 0.2, std::nullopt}), FusionMode::hard_majority).label, Label::truthful);
  EXPECT_EQ(vote(triple({std::nullopt, std::nullopt, 0.5}), FusionMode::hard_majority).label, Label::deceptive);
  EXPECT_THROW(vote(triple({std::nullopt, std::nullopt, std::nullopt}), FusionMode::hard_majority), DataError);
}

TEST(Vote, ContractViolations) {
  auto t = triple({0.6, 0.6, 0.6});
  t[1].modality = Modality::visual;
  EXPECT_THROW(vote(t, FusionMode::hard_majority), ContractError);
  auto u = triple({0.6, 0.6, 0.6});
  u[2].video_id = "other";
  EXPECT_THROW(vote(u, FusionMode::hard_majority), ContractError);
  EXPECT_THROW(parse_fusion_mode("max"), UsageError);
}

TEST(Vote, SoftMeanOverActiveModalities) {
  const auto f = vote(triple({0.9, std::nullopt, 0.2}), FusionMode::soft_mean);
  ASSERT_TRUE(f.fused_score);
  EXPECT_NEAR(*f.fused_score, 0.55, 1e-12);
  EXPECT_EQ(f.label, Label::deceptive);
}

TEST(Vote, PermutationInvariantAndMatchesOracleOnFuzz) {
  Rng rng(60);
  for (int i = 0; i < 1000; ++i) {
    std::array<std::optional<double>, 3> s;
    do {
      for (auto& x : s) {
        if (rng.uniform() < 0.25)
          x.reset();
        else
          x = rng.uniform() < 0.1 ? 0.5 : rng.uniform();  // exact threshold now and then
      }
    } while (!s[0] && !s[1] && !s[2]);
    const auto base = triple(s);
    const Label want = oracle_vote(s);
    std::array<int, 3> perm{0, 1, 2};
    do {
      Triple shuffled;
      for (int k = 0; k < 3; ++k) shuffled[k] = base[perm[k]];
      const auto f = vote(shuffled, FusionMode::hard_majority);
      ASSERT_EQ(f.label, want) << i;
      const auto g = vote(shuffled, FusionMode::soft_mean);
      ASSERT_EQ(g.label, vote(base, FusionMode::soft_mean).label);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(Aggregate, MeanOfUnitScores) {
  const std::vector<Prediction> preds{make_prediction("a", 0.2), make_prediction("b", 0.9), make_prediction("c", 0.4)};
  const auto v = aggregate_units(preds, Modality::acoustic, "vid");
  EXPECT_NEAR(*v.score, 0.5, 1e-15);
  EXPECT_EQ(*v.label, Label::deceptive);
  EXPECT_EQ(v.n_units, 3u);
  EXPECT_TRUE(aggregate_units({}, Modality::acoustic, "vid").abstain());
  EXPECT_THROW(aggregate_units(preds, {"vid", "vid", "other"}, Modality::acoustic, "vid"), ContractError);
}

TEST(Aggregate, JsonShape) {
  const auto f = vote(triple({0.9, std::nullopt, 0.2}), FusionMode::hard_majority);
  const auto j = fused_to_json(f);
  EXPECT_EQ(j["label"], "deceptive");
  EXPECT_TRUE(j["modality_scores"]["acoustic"].is_null());
  EXPECT_EQ(j["modality_scores"]["visual"], 0.9);
}
