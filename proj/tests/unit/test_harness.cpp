#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "ddp/harness/report.hpp"
#include "ddp/harness/synthetic.hpp"
#include "support/test_util.hpp"

using namespace ddp;
using ddp::testing::TempDir;

namespace {

nlohmann::json minimal_config() { return {{"manifest", "m.jsonl"}}; }

// Small, fast end-to-end configuration on a synthetic corpus.
ExperimentConfig tiny_config(const std::filesystem::path& root, std::uint64_t seed) {
  nlohmann::json j = {{"manifest", "manifest.jsonl"},
                      {"cache_dir", "cache"},
                      {"output_dir", "out"},
                      {"seed", seed},
                      {"lexical", {{"embedding", {{"dim", 16}, {"epochs", 2}}}}},
                      {"visual",
                       {{"detector", "replay"},
                        {"detector_dir", "detections"},
                        {"visual", {{"image_size", 16}}},
                        {"cnn", {{"input_size", 16}, {"conv_channels", {4}}, {"dense_units", 8}, {"epochs", 1}}}}}};
  return config_from_json(j, root);
}

}  // namespace

TEST(Config, DefaultsAndPathResolution) {
  const auto c = config_from_json(minimal_config(), "/base");
  EXPECT_EQ(c.manifest, "/base/m.jsonl");
  EXPECT_EQ(c.cache_dir, "/base/cache");
  EXPECT_EQ(c.modalities.size(), 3u);
  EXPECT_EQ(c.fusion, FusionMode::hard_majority);
  EXPECT_EQ(c.acoustic.svm.gamma, 1.0);
  EXPECT_EQ(c.visual.cnn.epochs, 10);
}

TEST(Config, SeedPropagatesEverywhere) {
  auto j = minimal_config();
  j["seed"] = 77;
  const auto c = config_from_json(j);
  EXPECT_EQ(c.dataset.split_seed, 77u);
  EXPECT_EQ(c.acoustic.forest.seed, 77u);
  EXPECT_EQ(c.acoustic.boost.seed, 77u);
  EXPECT_EQ(c.acoustic.augment.seed, 77u);
  EXPECT_EQ(c.lexical.embedding.seed, 77u);
  EXPECT_EQ(c.visual.cnn.seed, 77u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto bad = [](nlohmann::json patch) {
    auto j = minimal_config();
    j.merge_patch(patch);
    return j;
  };
  EXPECT_THROW(config_from_json(bad({{"sede", 1}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"acoustic", {{"svm", {{"C", "big"}}}}}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"acoustic", {{"model", "knn"}}}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"modalities", {"visual", "visual"}}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"modalities", nlohmann::json::array()}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"fusion", "max"}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"dataset", {{"test_fraction", 1.5}}}})), UsageError);
  EXPECT_THROW(config_from_json(bad({{"visual", {{"cnn", {{"input_size", 32}}}}}})), UsageError);
  EXPECT_THROW(config_from_json(nlohmann::json::object()), UsageError);
}

TEST(Config, EchoOmitsMachineLocalPaths) {
  auto a = config_from_json(minimal_config(), "/one");
  auto j = minimal_config();
  j["cache_dir"] = "/elsewhere/cache";
  j["output_dir"] = "/elsewhere/out";
  const auto b = config_from_json(j, "/two");
  EXPECT_EQ(config_echo(a).dump(), config_echo(b).dump());
  const auto echo = config_echo(a).dump();
  EXPECT_EQ(echo.find("/one"), std::string::npos);
  a.acoustic.svm.C = 5;
  EXPECT_NE(config_echo(a).dump(), config_echo(b).dump());
}

TEST(Metrics, ConfusionExample) {
  const std::map<std::string, Label> truth{{"a", Label::deceptive}, {"b", Label::deceptive}, {"c", Label::truthful},
                                           {"d", Label::truthful},  {"e", Label::truthful}};
  const std::map<std::string, std::optional<Label>> pred{
      {"a", Label::deceptive}, {"b", Label::truthful}, {"c", Label::deceptive}, {"d", Label::truthful}, {"e", std::nullopt}};
  const auto m = evaluate(pred, truth);
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_EQ(m.n_abstained, 1u);
  EXPECT_EQ(m.n_videos, 5u);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  EXPECT_THROW(evaluate({{"zz", Label::truthful}}, truth), ContractError);
  EXPECT_THROW(evaluate({{"a", std::nullopt}}, truth), DataError);
}

TEST(Metrics, MatchesCountingOracleOnFuzz) {
  Rng rng(70);
  for (int trial = 0; trial < 300; ++trial) {
    std::map<std::string, Label> truth;
    std::map<std::string, std::optional<Label>> pred;
    const auto n = rng.between(1, 40);
    for (int i = 0; i < n; ++i) {
      const std::string id = "v" + std::to_string(i);
      truth[id] = rng.uniform() < 0.5 ? Label::deceptive : Label::truthful;
      if (i == 0 || rng.uniform() > 0.1) pred[id] = rng.uniform() < 0.5 ? Label::deceptive : Label::truthful;
      else pred[id] = std::nullopt;
    }
    const auto m = evaluate(pred, truth);
    double right = 0, scored = 0, pp = 0, tp = 0, ap = 0;
    for (const auto& [id, p] : pred) {
      if (!p) continue;
      scored += 1;
      right += *p == truth[id];
      pp += *p == Label::deceptive;
      ap += truth[id] == Label::deceptive;
      tp += *p == Label::deceptive && truth[id] == Label::deceptive;
    }
    ASSERT_DOUBLE_EQ(m.accuracy, right / scored);
    ASSERT_DOUBLE_EQ(m.precision, pp > 0 ? tp / pp : 0.0);
    ASSERT_DOUBLE_EQ(m.recall, ap > 0 ? tp / ap : 0.0);
    ASSERT_EQ(m.n_scored() + m.n_abstained, static_cast<std::size_t>(n));
  }
}

TEST(Reference, EveryRowRendersWithCitation) {
  const std::optional<double> ours[4] = {0.9, std::nullopt, 0.8, 0.95};
  for (const std::string ds : {"rlt", "mu3d"}) {
    const auto rows = compare_to_reference(ds, ours);
    ASSERT_EQ(rows.size(), 4u);
    const auto md = render_comparison_markdown(rows);
    for (const auto& r : rows) {
      ASSERT_FALSE(r.references.empty()) << r.row;
      for (const auto* ref : r.references) {
        EXPECT_FALSE(ref->citation.empty());
        EXPECT_NE(md.find(std::string(ref->citation)), std::string::npos) << ref->citation;
        EXPECT_NE(md.find(format_fixed(ref->value)), std::string::npos);
      }
    }
  }
  for (const auto& g : kGridReference) EXPECT_FALSE(g.citation.empty());
}

TEST(Reference, InconsistentPairIsFlaggedAndDeltaComputed) {
  const std::optional<double> ours[4] = {std::nullopt, std::nullopt, std::nullopt, 0.93};
  const auto rows = compare_to_reference("rlt", ours);
  EXPECT_TRUE(rows[3].flagged());
  EXPECT_FALSE(rows[0].flagged());
  const auto md = render_comparison_markdown(rows);
  EXPECT_NE(md.find("fused (inconsistent pair) | 0.9300 | 0.9700 | -0.0400"), std::string::npos) << md;
  EXPECT_NE(md.find("| 0.9000 | 0.0300 |"), std::string::npos) << md;
  EXPECT_NE(md.find("visual | n/a | 0.9700 | n/a"), std::string::npos) << md;
  const auto j = comparison_to_json(rows);
  EXPECT_TRUE(j[3]["flagged_inconsistent"].get<bool>());
  EXPECT_NEAR(j[3]["references"][0]["delta"].get<double>(), 0.93 - 0.97, 1e-15);
}

TEST(Reference, FixedFormatting) {
  EXPECT_EQ(format_fixed(0.5), "0.5000");
  EXPECT_EQ(format_fixed(-0.00001), "0.0000");
  EXPECT_EQ(format_fixed(1.0 / 3.0, 2), "0.33");
}

TEST(LeakageGuard, FiresExactlyOnCrossPartitionUnitsOnFuzz) {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const auto recs = ddp::testing::labeled_records(4 + rng.below(20), 4 + rng.below(20));
    DatasetConfig dc;
    dc.split_seed = rng.next();
    const auto plan = make_split(recs, dc);
    LeakageGuard guard;
    for (int k = 0; k < 20; ++k) {
      const auto& src = recs[rng.below(recs.size())].id;
      const bool train_side = rng.uniform() < 0.5;
      const bool legal = train_side ? plan.in_train(src) : plan.in_test(src);
      auto call = [&] {
        if (train_side)
          guard.train_unit(plan, src, src + "@0ms");
        else
          guard.test_unit(plan, src, src + "@0ms");
      };
      if (legal)
        ASSERT_NO_THROW(call());
      else
        ASSERT_THROW(call(), ContractError);
    }
    ASSERT_EQ(guard.checks, 20u);
  }
}

TEST(FuseVerdicts, MissingModalitiesAbstainAndNoEvidenceIsListed) {
  std::map<Modality, std::map<std::string, ModalityVerdict>> v;
  v[Modality::acoustic]["a"] = make_verdict(Modality::acoustic, "a", 0.8);
  v[Modality::lexical]["a"] = make_verdict(Modality::lexical, "a", 0.3);
  v[Modality::lexical]["b"] = make_verdict(Modality::lexical, "b", 0.1);
  const auto out = fuse_verdicts({"a", "b", "c"}, v, FusionMode::hard_majority);
  ASSERT_EQ(out.fused.size(), 2u);
  EXPECT_EQ(out.fused[0].label, Label::deceptive);  // 0.8 is more confident than 0.3
  EXPECT_TRUE(out.fused[0].tie_break);
  EXPECT_EQ(out.fused[1].label, Label::truthful);
  EXPECT_EQ(out.no_evidence, std::vector<std::string>{"c"});
}

TEST(InStage, PrefixesMessageAndKeepsKind) {
  try {
    in_stage("ingest", "v9", [] { throw DetectorError("boom"); });
    FAIL();
  } catch (const DetectorError& e) {
    EXPECT_EQ(std::string(e.what()), "[ingest] video 'v9': boom");
  }
  EXPECT_THROW(in_stage("x", "", [] { throw NumericError("nan"); }), NumericError);
}

TEST(Synthetic, CorpusShapeAndDeterminism) {
  TempDir a("syn_a"), b("syn_b");
  const auto ma = generate_synthetic_corpus(8, 5, a.path());
  const auto mb = generate_synthetic_corpus(8, 5, b.path());
  EXPECT_EQ(detail::read_file_bytes(ma), detail::read_file_bytes(mb));
  const auto recs = load_manifest(ma);
  ASSERT_EQ(recs.size(), 8u);
  const auto counts = label_counts(recs);
  EXPECT_EQ(counts.at(Label::deceptive), 4u);
  EXPECT_EQ(counts.at(Label::truthful), 4u);
  for (const auto& r : recs) {
    EXPECT_EQ(detail::read_file_bytes(a.path() / r.media_path), detail::read_file_bytes(b.path() / r.media_path));
    EXPECT_GE(r.duration_s, 4.0);
    EXPECT_LE(r.duration_s, 4.8 + 1e-9);
    const auto src = open_media(a.path() / r.media_path);
    EXPECT_TRUE(src->has_audio());
    const auto text = load_transcript(a.path() / r.transcript_path, r.id);
    EXPECT_FALSE(text.text.empty());
  }
  EXPECT_THROW(generate_synthetic_corpus(7, 1, a.path()), UsageError);
}

TEST(Experiment, TinyRunIsLeakFreeAndReproducible) {
  TempDir root("tiny_run");
  generate_synthetic_corpus(8, 3, root.path());
  const auto cfg = tiny_config(root.path(), 3);
  const auto r1 = run_experiment(cfg);
  const auto r2 = run_experiment(cfg);  // second run reads every cache
  EXPECT_GT(r1.leakage_checks, 0u);
  EXPECT_EQ(report_to_json(r1).dump(2), report_to_json(r2).dump(2));
  EXPECT_EQ(report_to_markdown(r1), report_to_markdown(r2));
  ASSERT_EQ(r1.splits.size(), 1u);
  for (const auto& [m, per_video] : r1.verdicts)
    for (const auto& [id, v] : per_video) EXPECT_TRUE(r1.splits[0].in_test(id)) << id;
  EXPECT_FALSE(r1.reference_dataset.has_value());
  EXPECT_EQ(r1.comparison.size(), 8u);
  write_report(root.path() / "out", r1);
  EXPECT_TRUE(std::filesystem::exists(root.path() / "out" / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(root.path() / "out" / "fused.jsonl"));
}
