#pragma once

// Transcript normalization, TF-IDF, skip-gram word embeddings and
// TF-IDF-weighted document embeddings.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ddp/core.hpp"
#include "ddp/lexicon_data.hpp"
#include "ddp/media.hpp"

namespace ddp {

struct TokenizedDocument {
  std::vector<std::string> tokens;
  std::string source_video;
};

// ---------------------------------------------------------------------------
// Stopwords and lemmatization

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      words_.insert(line);
    }
  }
  /// The frozen 127-entry English list. Fillers (um, uh, ah) are not in it.
  static const StopwordSet& english() {
    static const StopwordSet set(lexicon_data::kStopwords);
    return set;
  }
  bool contains(const std::string& w) const { return words_.count(w) > 0; }
  std::size_t size() const { return words_.size(); }
  const std::set<std::string>& words() const { return words_; }

 private:
  std::set<std::string> words_;
};

enum class PosTag { noun, verb, adj, adv, num };

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  virtual std::string lemma(const std::string& token) const = 0;
};

/// Suffix stripper with an exception lexicon. Suffix-derived POS guesses
/// select which rules apply. The one-step rules are iterated to a fixed
/// point, so lemma(lemma(w)) == lemma(w).
class RuleLemmatizer final : public Lemmatizer {
 public:
  RuleLemmatizer() : RuleLemmatizer(lexicon_data::kLemmaExceptions) {}
  explicit RuleLemmatizer(std::string_view tsv) {
    std::istringstream in{std::string(tsv)};
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      std::string word, lemma, pos;
      row >> word >> lemma >> pos;
      if (word.empty() || lemma.empty()) continue;
      exceptions_[word] = Entry{lemma, parse_pos(pos)};
    }
  }

  static const RuleLemmatizer& default_instance() {
    static const RuleLemmatizer lem;
    return lem;
  }

  PosTag pos(const std::string& w) const {
    if (auto it = exceptions_.find(w); it != exceptions_.end()) return it->second.pos;
    if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; }))
      return PosTag::num;
    if (ends_with(w, "ly")) return PosTag::adv;
    if (ends_with(w, "ing") || ends_with(w, "ed")) return PosTag::verb;
    return PosTag::noun;
  }

  std::string lemma(const std::string& token) const override {
    std::string cur = token;
    for (int guard = 0; guard < 64; ++guard) {
      std::string next = step(cur);
      if (next == cur) break;
      cur = std::move(next);
    }
    return cur;
  }

 private:
  struct Entry {
    std::string lemma;
    PosTag pos;
  };

  static PosTag parse_pos(const std::string& s) {
    if (s == "VERB") return PosTag::verb;
    if (s == "ADJ") return PosTag::adj;
    if (s == "ADV") return PosTag::adv;
    if (s == "NUM") return PosTag::num;
    return PosTag::noun;
  }
  static bool ends_with(const std::string& w, std::string_view suf) {
    return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
  }
  static bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }
  static bool has_vowel(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return is_vowel(c) || c == 'y'; });
  }
  static bool is_consonant(char c) { return c >= 'a' && c <= 'z' && !is_vowel(c); }

  static std::string undouble(std::string stem) {
    const auto n = stem.size();
    if (n >= 2 && stem[n - 1] == stem[n - 2] && is_consonant(stem[n - 1]) && stem[n - 1] != 'l' &&
        stem[n - 1] != 's' && stem[n - 1] != 'z')
      stem.pop_back();
    else if (n == 3 && is_consonant(stem[0]) && is_vowel(stem[1]) && is_consonant(stem[2]) &&
             stem[2] != 'w' && stem[2] != 'x' && stem[2] != 'y')
      stem.push_back('e');
    return stem;
  }

  static std::string trim_apostrophes(std::string w) {
    while (!w.empty() && w.back() == '\'') w.pop_back();
    while (!w.empty() && w.front() == '\'') w.erase(w.begin());
    return w;
  }

  std::string step(const std::string& w) const {
    if (auto it = exceptions_.find(w); it != exceptions_.end()) return it->second.lemma;
    if (ends_with(w, "'s")) return trim_apostrophes(w.substr(0, w.size() - 2));
    switch (pos(w)) {
      case PosTag::verb: {
        if (ends_with(w, "ied") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
        if (ends_with(w, "ed")) {
          const std::string stem = w.substr(0, w.size() - 2);
          if (stem.size() >= 3 && has_vowel(stem)) return undouble(stem);
        }
        if (ends_with(w, "ing")) {
          const std::string stem = w.substr(0, w.size() - 3);
          if (stem.size() >= 3 && has_vowel(stem)) return undouble(stem);
        }
        return w;
      }
      case PosTag::noun: {
        if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
        if (ends_with(w, "sses")) return w.substr(0, w.size() - 2);
        if (ends_with(w, "s") && w.size() > 3 && !ends_with(w, "ss") && !ends_with(w, "us") &&
            !ends_with(w, "is") && !ends_with(w, "'s"))
          return trim_apostrophes(w.substr(0, w.size() - 1));
        return w;
      }
      default:
        return w;
    }
  }

  std::unordered_map<std::string, Entry> exceptions_;
};

/// Lowercase ASCII; bytes >= 0x80 (UTF-8 sequences) count as word characters.
/// Apostrophes stay inside tokens and are trimmed from token ends.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    std::size_t lead = 0;
    while (lead < cur.size() && cur[lead] == '\'') ++lead;
    if (lead < cur.size()) out.push_back(cur.substr(lead));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80 || c == '\'') {
      cur.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// lowercase -> tokenize -> drop stopwords -> lemmatize. Lemmas that land on
/// a stopword are dropped as well.
inline TokenizedDocument normalize_text(const RawDocument& doc,
                                        const StopwordSet& stopwords = StopwordSet::english(),
                                        const Lemmatizer& lemmatizer = RuleLemmatizer::default_instance()) {
  TokenizedDocument out;
  out.source_video = doc.source_video;
  for (auto& tok : tokenize(doc.text)) {
    if (stopwords.contains(tok)) continue;
    std::string lem = lemmatizer.lemma(tok);
    if (lem.empty() || stopwords.contains(lem)) continue;
    out.tokens.push_back(std::move(lem));
  }
  return out;
}

inline std::string join_tokens(const TokenizedDocument& doc) {
  std::string s;
  for (const auto& t : doc.tokens) {
    if (!s.empty()) s.push_back(' ');
    s += t;
  }
  return s;
}

// ---------------------------------------------------------------------------
// TF-IDF

using SparseVector = std::vector<std::pair<std::size_t, double>>;  // sorted by index

struct TfidfModel {
  std::map<std::string, std::size_t> vocabulary;  // dense indices in lexicographic order
  std::vector<double> idf;
  std::size_t n_docs = 0;

  std::size_t size() const { return idf.size(); }
  std::optional<std::size_t> index(const std::string& token) const {
    auto it = vocabulary.find(token);
    if (it == vocabulary.end()) return std::nullopt;
    return it->second;
  }
};

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1.
inline TfidfModel tfidf_fit(const std::vector<TokenizedDocument>& docs) {
  std::map<std::string, std::size_t> df;
  bool any = false;
  for (const auto& d : docs) {
    std::set<std::string> uniq(d.tokens.begin(), d.tokens.end());
    any = any || !uniq.empty();
    for (const auto& t : uniq) ++df[t];
  }
  if (!any) throw DataError("tfidf_fit: corpus has no tokens");
  TfidfModel m;
  m.n_docs = docs.size();
  const double n = static_cast<double>(m.n_docs);
  for (const auto& [tok, count] : df) {
    m.vocabulary.emplace(tok, m.idf.size());
    m.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  return m;
}

/// In-vocabulary term counts, sorted by column.
inline SparseVector term_counts(const TokenizedDocument& doc, const TfidfModel& model) {
  std::map<std::size_t, double> counts;
  for (const auto& t : doc.tokens)
    if (auto idx = model.index(t)) counts[*idx] += 1.0;
  return SparseVector(counts.begin(), counts.end());
}

/// Counts x idf, L2-normalized; all-OOV documents give the empty vector.
inline SparseVector tfidf_transform(const TokenizedDocument& doc, const TfidfModel& model) {
  SparseVector v = term_counts(doc, model);
  double norm2 = 0.0;
  for (auto& [j, x] : v) {
    x *= model.idf[j];
    norm2 += x * x;
  }
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& [j, x] : v) x *= inv;
  }
  return v;
}

inline std::vector<double> densify(const SparseVector& v, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  for (const auto& [j, x] : v) out[j] = x;
  return out;
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling

struct EmbeddingConfig {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negative = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 0;
};

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> tokens;  // sorted
  std::vector<double> vectors;      // tokens.size() x dim
  EmbeddingConfig config;

  std::optional<std::size_t> index(const std::string& t) const {
    auto it = std::lower_bound(tokens.begin(), tokens.end(), t);
    if (it == tokens.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - tokens.begin());
  }
  std::span<const double> vector(std::size_t i) const { return {vectors.data() + i * dim, dim}; }
  std::span<const double> vector(const std::string& t) const {
    auto i = index(t);
    require(i.has_value(), "EmbeddingTable: unknown token '" + t + "'");
    return vector(*i);
  }
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

inline EmbeddingTable train_word_embeddings(const std::vector<TokenizedDocument>& docs,
                                            const EmbeddingConfig& config) {
  require(config.dim >= 1 && config.window >= 1, "train_word_embeddings: dim and window must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : docs)
    for (const auto& t : d.tokens) ++counts[t];
  if (counts.size() < 2) throw DataError("train_word_embeddings: need at least 2 distinct tokens");

  EmbeddingTable table;
  table.dim = config.dim;
  table.config = config;
  std::vector<double> freq;
  for (const auto& [t, c] : counts) {
    table.tokens.push_back(t);
    freq.push_back(std::pow(static_cast<double>(c), 0.75));
  }
  const std::size_t V = table.tokens.size(), D = config.dim;
  std::vector<double> cdf(V);
  double acc = 0.0;
  for (std::size_t i = 0; i < V; ++i) cdf[i] = (acc += freq[i]);
  for (auto& c : cdf) c /= acc;

  Rng rng(derive_seed(config.seed, "word2vec"));
  table.vectors.resize(V * D);
  for (auto& x : table.vectors) x = (rng.uniform() - 0.5) / static_cast<double>(D);
  std::vector<double> out_vecs(V * D, 0.0);

  std::vector<std::vector<std::size_t>> corpus;
  std::size_t total_tokens = 0;
  for (const auto& d : docs) {
    std::vector<std::size_t> ids;
    for (const auto& t : d.tokens) ids.push_back(*table.index(t));
    total_tokens += ids.size();
    corpus.push_back(std::move(ids));
  }
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, total_tokens * config.epochs));
  double step = 0.0;
  std::vector<double> grad(D);

  auto update = [&](std::size_t center, std::size_t target, double label, double lr) {
    double* in = &table.vectors[center * D];
    double* out = &out_vecs[target * D];
    double dot = 0.0;
    for (std::size_t k = 0; k < D; ++k) dot += in[k] * out[k];
    const double g = (label - sigmoid(dot)) * lr;
    for (std::size_t k = 0; k < D; ++k) {
      grad[k] += g * out[k];
      out[k] += g * in[k];
    }
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& sent : corpus) {
      for (std::size_t pos = 0; pos < sent.size(); ++pos, step += 1.0) {
        const double lr = std::max(config.learning_rate * 1e-4,
                                   config.learning_rate * (1.0 - step / total_steps));
        const auto b = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(config.window)));
        const std::size_t lo = pos >= b ? pos - b : 0;
        const std::size_t hi = std::min(sent.size() - 1, pos + b);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          std::fill(grad.begin(), grad.end(), 0.0);
          update(sent[pos], sent[c], 1.0, lr);
          for (std::size_t n = 0; n < config.negative; ++n) {
            const double u = rng.uniform();
            auto neg = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            neg = std::min(neg, V - 1);
            if (neg == sent[c]) continue;
            update(sent[pos], neg, 0.0, lr);
          }
          double* in = &table.vectors[sent[pos] * D];
          for (std::size_t k = 0; k < D; ++k) in[k] += grad[k];
        }
      }
    }
  }
  for (double x : table.vectors) check_finite(x, "word embeddings");
  return table;
}

struct DocumentEmbedding {
  std::vector<double> values;
  bool abstain = false;
};

/// Σ_t w(t)·tfidf(t,d) / Σ_t tfidf(t,d) over tokens known to both models.
inline DocumentEmbedding embed_document(const TokenizedDocument& doc, const TfidfModel& tfidf,
                                        const EmbeddingTable& emb) {
  DocumentEmbedding out{std::vector<double>(emb.dim, 0.0), false};
  const auto weights = tfidf_transform(doc, tfidf);
  std::vector<std::string> by_index(tfidf.size());
  for (const auto& [tok, idx] : tfidf.vocabulary) by_index[idx] = tok;
  double wsum = 0.0;
  for (const auto& [j, w] : weights) {
    auto e = emb.index(by_index[j]);
    if (!e || w <= 0.0) continue;
    const auto v = emb.vector(*e);
    for (std::size_t k = 0; k < emb.dim; ++k) out.values[k] += w * v[k];
    wsum += w;
  }
  if (wsum <= 0.0) {
    out.abstain = true;
    return out;
  }
  for (auto& x : out.values) x /= wsum;
  return out;
}

}  // namespace ddp
