#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "ddp/dataset.hpp"
#include "support/test_util.hpp"

using namespace ddp;
using ddp::testing::labeled_records;
using ddp::testing::TempDir;

namespace {

std::vector<VideoRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in);
}

}  // namespace

TEST(Manifest, RltCountsAreKept) {
  std::ostringstream text;
  for (int i = 0; i < 121; ++i)
    text << R"({"id":"trial_)" << i << R"(","dataset":"rlt","media":"m.mp4","transcript":"t.txt","label":")"
         << (i < 61 ? "deceptive" : "truthful") << "\"}\n";
  const auto records = parse(text.str());
  ASSERT_EQ(records.size(), 121u);
  const auto counts = label_counts(records);
  EXPECT_EQ(counts.at(Label::deceptive), 61u);
  EXPECT_EQ(counts.at(Label::truthful), 60u);
  EXPECT_EQ(records.front().id, "trial_0");
  EXPECT_EQ(records.back().id, "trial_120");
}

TEST(Manifest, EmptyFileIsEmpty) {
  TempDir dir("manifest_empty");
  write_manifest(dir.path() / "m.jsonl", {});
  EXPECT_TRUE(load_manifest(dir.path() / "m.jsonl").empty());
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse(R"({"id":"a","dataset":"mu3d","truth_prop":1.3})"), DataError);
  EXPECT_THROW(parse(R"({"id":"a","dataset":"mu3d","truth_prop":-0.1})"), DataError);
  EXPECT_THROW(parse("{\"id\":\"a\",\"dataset\":\"rlt\",\"label\":\"truthful\"}\n"
                     "{\"id\":\"a\",\"dataset\":\"rlt\",\"label\":\"deceptive\"}\n"),
               DataError);
  EXPECT_THROW(parse(R"({"id":"a","dataset":"rlt"})"), DataError);  // rlt needs a label
  EXPECT_THROW(parse("not json\n"), DataError);
  EXPECT_THROW(load_manifest("/nonexistent/manifest.jsonl"), DataError);
}

TEST(Manifest, DuplicateIdErrorNamesTheId) {
  try {
    parse("{\"id\":\"clip_42\",\"dataset\":\"mu3d\"}\n{\"id\":\"clip_42\",\"dataset\":\"mu3d\"}\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("clip_42"), std::string::npos);
  }
}

TEST(Manifest, UnknownKeysIgnoredAndMu3dMayBeUnlabeled) {
  const auto r = parse(R"({"id":"x","dataset":"mu3d","truth_prop":0.4,"extra":[1,2],"speaker":"s1"})");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_FALSE(r[0].label.has_value());
  EXPECT_DOUBLE_EQ(*r[0].truth_prop, 0.4);
  EXPECT_EQ(*r[0].speaker_id, "s1");
}

TEST(Manifest, RoundTripOnFuzzedRecords) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<VideoRecord> records;
    const int n = static_cast<int>(rng.between(0, 30));
    for (int i = 0; i < n; ++i) {
      VideoRecord r;
      r.id = "id_" + std::to_string(trial) + "_" + std::to_string(i);
      r.dataset_tag = static_cast<DatasetTag>(rng.below(3));
      r.media_path = "media/" + r.id + ".mp4";
      r.transcript_path = rng.uniform() < 0.5 ? "" : "t/" + r.id + ".txt";
      if (r.dataset_tag != DatasetTag::mu3d || rng.uniform() < 0.5)
        r.label = rng.uniform() < 0.5 ? Label::deceptive : Label::truthful;
      if (rng.uniform() < 0.5) r.truth_prop = rng.uniform();
      if (rng.uniform() < 0.5) r.speaker_id = "spk" + std::to_string(rng.below(5));
      if (rng.uniform() < 0.5) r.duration_s = rng.uniform(0.5, 60.0);
      records.push_back(r);
    }
    std::ostringstream out;
    write_manifest(out, records);
    EXPECT_EQ(parse(out.str()), records);
  }
}

TEST(LabelMu3d, Examples) {
  const DatasetConfig c;
  EXPECT_EQ(label_mu3d(0.69, c), Label::deceptive);
  EXPECT_EQ(label_mu3d(1.0, c), Label::truthful);
  EXPECT_EQ(label_mu3d(0.70, c), Label::truthful);
  EXPECT_EQ(label_mu3d(0.0, c), Label::deceptive);
}

TEST(LabelMu3d, Monotone) {
  const DatasetConfig c;
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    if (label_mu3d(a, c) == Label::truthful) EXPECT_EQ(label_mu3d(b, c), Label::truthful);
  }
}

TEST(LabelMu3d, ResolveFillsOnlyUnlabeledMu3d) {
  auto records = parse(
      "{\"id\":\"a\",\"dataset\":\"mu3d\",\"truth_prop\":0.9}\n"
      "{\"id\":\"b\",\"dataset\":\"mu3d\",\"truth_prop\":0.2}\n"
      "{\"id\":\"c\",\"dataset\":\"mu3d\",\"truth_prop\":0.9,\"label\":\"deceptive\"}\n");
  records = resolve_labels(records, DatasetConfig{});
  EXPECT_EQ(*records[0].label, Label::truthful);
  EXPECT_EQ(*records[1].label, Label::deceptive);
  EXPECT_EQ(*records[2].label, Label::deceptive);
}

TEST(MakeSplit, TenRecordsSeedSeven) {
  DatasetConfig c;
  c.split_seed = 7;
  const auto records = labeled_records(5, 5);
  const auto plan = make_split(records, c);
  ASSERT_EQ(plan.test_ids.size(), 2u);
  int dec = 0;
  for (const auto& id : plan.test_ids)
    for (const auto& r : records)
      if (r.id == id && r.label == Label::deceptive) ++dec;
  EXPECT_EQ(dec, 1);
  EXPECT_EQ(make_split(records, c), plan);
}

// Independent enumeration of the declared draw: per class, sort the ids,
// shuffle them with the class stream of the split seed, and take the first
// round(test_fraction * n) as test.
TEST(MakeSplit, StratifiedDrawMatchesDeclaredRule) {
  DatasetConfig c;
  c.split_seed = 7;
  const auto records = labeled_records(61, 60, "trial_");
  const auto plan = make_split(records, c);

  std::set<std::string> expected;
  for (Label l : {Label::deceptive, Label::truthful}) {
    std::vector<std::string> ids;
    for (const auto& r : records)
      if (r.label == l) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(7, "split:" + std::string(to_string(l))));
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    const auto k = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(ids.size())));
    expected.insert(ids.begin(), ids.begin() + static_cast<long>(k));
  }
  EXPECT_EQ(std::set<std::string>(plan.test_ids.begin(), plan.test_ids.end()), expected);
  EXPECT_TRUE(plan.test_ids.size() == 24u || plan.test_ids.size() == 25u);

  int dec = 0;
  for (const auto& r : records)
    if (plan.in_test(r.id) && r.label == Label::deceptive) ++dec;
  const int tru = static_cast<int>(plan.test_ids.size()) - dec;
  EXPECT_LE(std::abs(dec - 12.2), 1.0);
  EXPECT_LE(std::abs(tru - 12.0), 1.0);
}

TEST(MakeSplit, SingleClassRejected) {
  EXPECT_THROW(make_split(labeled_records(3, 0), DatasetConfig{}), DataError);
  EXPECT_THROW(make_split(labeled_records(5, 1), DatasetConfig{}), DataError);
}

TEST(MakeSplit, UnlabeledRejected) {
  auto records = labeled_records(3, 3);
  records[0].label.reset();
  EXPECT_THROW(make_split(records, DatasetConfig{}), DataError);
}

TEST(MakeSplit, FuzzedManifestsNeverLeak) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.between(4, 200));
    const int n_dec = static_cast<int>(rng.between(2, n - 2));
    DatasetConfig c;
    c.split_seed = rng.next();
    c.test_fraction = rng.uniform(0.05, 0.6);
    const auto records = labeled_records(n_dec, n - n_dec, "f" + std::to_string(trial) + "_");
    const auto plan = make_split(records, c);
    std::set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
    for (const auto& id : plan.test_ids) ASSERT_FALSE(train.count(id)) << id;
    ASSERT_EQ(plan.train_ids.size() + plan.test_ids.size(), records.size());
    ASSERT_EQ(make_split(records, c), plan);
  }
}

TEST(MakeFold, FoldsPartitionTheCorpus) {
  DatasetConfig c;
  c.n_folds = 5;
  c.split_seed = 9;
  const auto records = labeled_records(23, 19);
  std::multiset<std::string> seen;
  for (int k = 0; k < 5; ++k) {
    const auto plan = make_fold(records, c, k);
    for (const auto& id : plan.test_ids) {
      seen.insert(id);
      EXPECT_FALSE(plan.in_train(id));
    }
    EXPECT_EQ(plan.train_ids.size() + plan.test_ids.size(), records.size());
  }
  EXPECT_EQ(seen.size(), records.size());
  for (const auto& r : records) EXPECT_EQ(seen.count(r.id), 1u);
}

TEST(SplitPlanJson, RoundTrip) {
  DatasetConfig c;
  c.split_seed = 5;
  const auto plan = make_split(labeled_records(6, 6), c);
  const auto j = split_to_json(plan);
  EXPECT_EQ(j.at("seed"), 5u);
  EXPECT_EQ(split_from_json(nlohmann::json::parse(j.dump())), plan);
  EXPECT_THROW(split_from_json(nlohmann::json::parse(R"({"train":[]})")), DataError);
}

TEST(DatasetConfig, Validation) {
  DatasetConfig c;
  c.mu3d_truth_threshold = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.test_fraction = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.n_folds = 1;
  EXPECT_THROW(c.validate(), UsageError);
}
