#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ddp/lexical.hpp"

using namespace ddp;

namespace {

TokenizedDocument doc(std::vector<std::string> tokens) { return TokenizedDocument{std::move(tokens), "v"}; }

TokenizedDocument norm(const std::string& text) { return normalize_text(RawDocument{text, "v"}); }

std::string read_data(const std::string& name) {
  std::ifstream in(std::string(DDP_DATA_DIR) + "/" + name, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(LexiconData, EmbeddedCopiesMatchShippedFiles) {
  EXPECT_EQ(read_data("stopwords_en_v1.txt"), std::string(lexicon_data::kStopwords));
  EXPECT_EQ(read_data("lemma_exceptions_v1.tsv"), std::string(lexicon_data::kLemmaExceptions));
}

TEST(Stopwords, FrozenListShape) {
  const auto& s = StopwordSet::english();
  EXPECT_EQ(s.size(), 127u);
  for (const char* filler : {"um", "uh", "ah"}) EXPECT_FALSE(s.contains(filler)) << filler;
  EXPECT_TRUE(s.contains("the"));
}

TEST(NormalizeText, Examples) {
  EXPECT_EQ(norm("The WITNESS um lied").tokens, (std::vector<std::string>{"witness", "um", "lie"}));
  EXPECT_TRUE(norm("").tokens.empty());
  // "i" and "it" are listed; the contraction is not, and survives as one token.
  EXPECT_FALSE(StopwordSet::english().contains("didn't"));
  EXPECT_EQ(norm("I didn't see it").tokens, (std::vector<std::string>{"didn't", "see"}));
}

TEST(NormalizeText, ApostrophesStayInside) {
  EXPECT_EQ(tokenize("'quoted' o'brien's car."), (std::vector<std::string>{"quoted", "o'brien's", "car"}));
  EXPECT_EQ(tokenize("A-B c3po"), (std::vector<std::string>{"a", "b", "c3po"}));
}

TEST(NormalizeText, IdempotentNoStopwordsNoUppercase) {
  Rng rng(30);
  const std::vector<std::string> vocab{"The",      "witness", "LIED",    "running", "cars",   "um",    "uh",
                                       "studies",  "was",     "Walked",  "happily", "boxes",  "I",     "didn't",
                                       "children", "went",    "better",  "stopped", "making", "ah",    "Money",
                                       "tried",    "flies",   "mice",    "quickly", "it's",   "Driving", "saw"};
  for (int i = 0; i < 300; ++i) {
    std::string text;
    const auto n = rng.between(0, 25);
    for (int k = 0; k < n; ++k) text += vocab[rng.below(vocab.size())] + (rng.uniform() < 0.2 ? ", " : " ");
    const auto once = norm(text);
    EXPECT_EQ(norm(join_tokens(once)).tokens, once.tokens) << text;
    for (const auto& t : once.tokens) {
      EXPECT_FALSE(StopwordSet::english().contains(t)) << t;
      EXPECT_TRUE(std::none_of(t.begin(), t.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) << t;
      EXPECT_EQ(t.find(' '), std::string::npos);
    }
  }
}

TEST(Tfidf, IdfExamples) {
  const auto m = tfidf_fit({doc({"a", "b"}), doc({"a"})});
  EXPECT_DOUBLE_EQ(m.idf[*m.index("a")], 1.0);
  EXPECT_NEAR(m.idf[*m.index("b")], std::log(1.5) + 1.0, 1e-15);
  EXPECT_NEAR(m.idf[*m.index("b")], 1.40546, 1e-5);
  EXPECT_THROW(tfidf_fit({doc({}), doc({})}), DataError);
}

TEST(Tfidf, IdfMatchesRecount) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenizedDocument> docs;
    const auto n = rng.between(1, 30);
    for (int d = 0; d < n; ++d) {
      std::vector<std::string> toks;
      for (auto k = rng.between(0, 20); k > 0; --k) toks.push_back("w" + std::to_string(rng.below(25)));
      docs.push_back(doc(toks));
    }
    docs[0].tokens.push_back("anchor");
    const auto m = tfidf_fit(docs);
    ASSERT_EQ(m.n_docs, static_cast<std::size_t>(n));
    std::set<std::string> all;
    for (const auto& d : docs) all.insert(d.tokens.begin(), d.tokens.end());
    ASSERT_EQ(m.size(), all.size());
    std::set<std::size_t> cols;
    for (const auto& t : all) {
      int df = 0;
      for (const auto& d : docs) df += std::find(d.tokens.begin(), d.tokens.end(), t) != d.tokens.end();
      const double want = std::log((1.0 + n) / (1.0 + df)) + 1.0;
      ASSERT_LE(std::abs(m.idf[*m.index(t)] - want), 1e-12);
      ASSERT_GE(m.idf[*m.index(t)], 1.0 - std::log(2.0));
      cols.insert(*m.index(t));
    }
    ASSERT_EQ(*cols.rbegin(), all.size() - 1);  // dense 0..V-1
  }
}

TEST(Tfidf, TransformExamples) {
  const auto m = tfidf_fit({doc({"a", "a", "b"})});
  const auto v = densify(tfidf_transform(doc({"a", "a", "b"}), m), m.size());
  EXPECT_NEAR(v[*m.index("a")], 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(v[*m.index("a")], 0.89443, 1e-5);
  EXPECT_NEAR(v[*m.index("b")], 0.44721, 1e-5);
  EXPECT_TRUE(tfidf_transform(doc({}), m).empty());
  EXPECT_TRUE(tfidf_transform(doc({"zzz"}), m).empty());
}

TEST(Tfidf, UnitNormAndOrderInvariance) {
  Rng rng(32);
  std::vector<TokenizedDocument> docs;
  for (int d = 0; d < 20; ++d) {
    std::vector<std::string> toks;
    for (int k = 0; k < 10; ++k) toks.push_back("w" + std::to_string(rng.below(15)));
    docs.push_back(doc(toks));
  }
  const auto m = tfidf_fit(docs);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> toks;
    for (auto k = rng.between(1, 15); k > 0; --k) toks.push_back("w" + std::to_string(rng.below(20)));
    const auto v = tfidf_transform(doc(toks), m);
    if (!v.empty()) {
      double n2 = 0;
      for (const auto& [j, x] : v) n2 += x * x;
      ASSERT_NEAR(std::sqrt(n2), 1.0, 1e-12);
    }
    auto shuffled = toks;
    rng.shuffle(shuffled);
    ASSERT_EQ(tfidf_transform(doc(shuffled), m), v);
  }
}

TEST(Embeddings, CooccurrenceShapesSimilarity) {
  std::vector<TokenizedDocument> docs;
  Rng rng(33);
  const std::vector<std::string> other{"delta", "epsilon", "zeta", "eta"};
  for (int i = 0; i < 200; ++i) {
    if (i % 2 == 0)
      docs.push_back(doc({"alpha", "beta", "alpha", "beta"}));
    else
      docs.push_back(doc({"gamma", other[rng.below(4)], other[rng.below(4)], "gamma"}));
  }
  EmbeddingConfig c;
  c.dim = 20;
  c.seed = 4;
  const auto t = train_word_embeddings(docs, c);
  EXPECT_GT(cosine(t.vector("alpha"), t.vector("beta")), cosine(t.vector("alpha"), t.vector("gamma")));
}

TEST(Embeddings, ShapeAndDeterminism) {
  const std::vector<TokenizedDocument> docs{doc({"a", "b", "c", "a"}), doc({"c", "d", "e"})};
  EmbeddingConfig c;
  c.seed = 9;
  const auto t1 = train_word_embeddings(docs, c);
  const auto t2 = train_word_embeddings(docs, c);
  EXPECT_EQ(t1.vectors, t2.vectors);
  EXPECT_EQ(t1.tokens, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
  for (const auto& tok : t1.tokens) {
    ASSERT_EQ(t1.vector(tok).size(), 100u);
    for (double x : t1.vector(tok)) ASSERT_TRUE(std::isfinite(x));
  }
  EXPECT_THROW(train_word_embeddings({doc({"a", "a"})}, c), DataError);
}

TEST(EmbedDocument, Examples) {
  const auto tf = tfidf_fit({doc({"x", "y"})});
  EmbeddingTable e;
  e.dim = 2;
  e.tokens = {"x", "y"};
  e.vectors = {1, 0, 0, 1};
  const auto d = embed_document(doc({"x", "y"}), tf, e);
  EXPECT_FALSE(d.abstain);
  EXPECT_NEAR(d.values[0], 0.5, 1e-15);
  EXPECT_NEAR(d.values[1], 0.5, 1e-15);
  EXPECT_TRUE(embed_document(doc({}), tf, e).abstain);
  EXPECT_TRUE(embed_document(doc({"zzz"}), tf, e).abstain);

  e.vectors = {0.3, -0.7, 0.3, -0.7};
  const auto same = embed_document(doc({"x", "x", "y"}), tf, e);
  EXPECT_NEAR(same.values[0], 0.3, 1e-15);
  EXPECT_NEAR(same.values[1], -0.7, 1e-15);
}

// Oracle uses unnormalized counts x idf as weights; equality with the library
// (which uses L2-normalized weights) is the scale-invariance property.
TEST(EmbedDocument, MatchesWeightedSumOracle) {
  Rng rng(34);
  std::vector<TokenizedDocument> docs;
  for (int d = 0; d < 15; ++d) {
    std::vector<std::string> toks;
    for (int k = 0; k < 8; ++k) toks.push_back("w" + std::to_string(rng.below(12)));
    docs.push_back(doc(toks));
  }
  const auto tf = tfidf_fit(docs);
  EmbeddingConfig c;
  c.dim = 7;
  c.seed = 2;
  const auto emb = train_word_embeddings(docs, c);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> toks;
    for (auto k = rng.between(1, 12); k > 0; --k) toks.push_back("w" + std::to_string(rng.below(14)));
    const auto got = embed_document(doc(toks), tf, emb);
    std::map<std::string, double> counts;
    for (const auto& t : toks)
      if (tf.index(t)) counts[t] += 1.0;
    const double scale = rng.uniform(0.1, 10.0);
    std::vector<long double> acc(7, 0.0L);
    long double wsum = 0.0L;
    for (const auto& [t, n] : counts) {
      const double w = scale * n * tf.idf[*tf.index(t)];
      for (int k = 0; k < 7; ++k) acc[k] += w * emb.vector(t)[k];
      wsum += w;
    }
    if (counts.empty()) {
      ASSERT_TRUE(got.abstain);
      continue;
    }
    for (int k = 0; k < 7; ++k) ASSERT_LE(std::abs(got.values[k] - static_cast<double>(acc[k] / wsum)), 1e-12);
  }
}
