#pragma once

// CART trees, a bagged random forest (Gini splits, vote-fraction scores) and
// gradient boosting with logistic loss (squared-error split search on the
// negative gradient, per-leaf line search for the step).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ddp/classifiers/artifact.hpp"
#include "ddp/classifiers/svm.hpp"
#include "ddp/core.hpp"

namespace ddp {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  int leaf_index(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
      const auto& n = nodes[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return i;
  }
  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }

  int depth() const {
    std::function<int(int)> rec = [&](int i) -> int {
      if (nodes[i].feature < 0) return 0;
      return 1 + std::max(rec(nodes[i].left), rec(nodes[i].right));
    };
    return nodes.empty() ? 0 : rec(0);
  }
};

enum class SplitCriterion { gini, squared_error };

struct TreeGrowth {
  int max_depth = 1;
  std::size_t max_features = 0;  // 0 = all features
  std::size_t min_samples_split = 2;
  SplitCriterion criterion = SplitCriterion::gini;
};

namespace detail {

/// Impurity-weighted cost of a node holding `n` samples with target sum
/// `s` and square sum `ss` (gini uses s as the positive count).
inline double node_cost(SplitCriterion c, double n, double s, double ss) {
  if (n <= 0) return 0.0;
  if (c == SplitCriterion::gini) {
    const double p = s / n;
    return n * 2.0 * p * (1.0 - p);
  }
  return ss - s * s / n;
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& X, std::span<const double> target, const TreeGrowth& g,
              Rng* rng)
      : X_(X), t_(target), g_(g), rng_(rng), d_(X.front().size()) {}

  Tree build(std::vector<std::size_t> samples) {
    Tree tree;
    grow(tree, std::move(samples), 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::size_t> idx, int depth) {
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    double s = 0.0, ss = 0.0;
    for (auto i : idx) s += t_[i], ss += t_[i] * t_[i];
    const double n = static_cast<double>(idx.size());
    tree.nodes[me].value = n > 0 ? s / n : 0.0;
    const double parent_cost = node_cost(g_.criterion, n, s, ss);
    if (depth >= g_.max_depth || idx.size() < g_.min_samples_split || parent_cost <= 1e-12) return me;

    std::vector<std::size_t> features(d_);
    std::iota(features.begin(), features.end(), 0);
    if (g_.max_features > 0 && g_.max_features < d_ && rng_ != nullptr) {
      rng_->shuffle(features);
      features.resize(g_.max_features);
      std::sort(features.begin(), features.end());
    }

    double best_cost = parent_cost - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order = idx;
    for (auto f : features) {
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return X_[a][f] < X_[b][f]; });
      double ls = 0.0, lss = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const double v = t_[order[k]];
        ls += v;
        lss += v * v;
        const double xa = X_[order[k]][f], xb = X_[order[k + 1]][f];
        if (!(xa < xb)) continue;
        const double nl = static_cast<double>(k + 1), nr = n - nl;
        const double cost = node_cost(g_.criterion, nl, ls, lss) + node_cost(g_.criterion, nr, s - ls, ss - lss);
        if (cost < best_cost) {
          best_cost = cost;
          best_feature = static_cast<int>(f);
          best_threshold = xa + (xb - xa) / 2.0;
        }
      }
    }
    if (best_feature < 0) return me;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (X_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    if (left.empty() || right.empty()) return me;
    tree.nodes[me].feature = best_feature;
    tree.nodes[me].threshold = best_threshold;
    const int l = grow(tree, std::move(left), depth + 1);
    tree.nodes[me].left = l;
    const int r = grow(tree, std::move(right), depth + 1);
    tree.nodes[me].right = r;
    return me;
  }

  const std::vector<std::vector<double>>& X_;
  std::span<const double> t_;
  TreeGrowth g_;
  Rng* rng_;
  std::size_t d_;
};

inline std::vector<double> flatten_trees(const std::vector<Tree>& trees) {
  std::vector<double> out;
  for (const auto& t : trees)
    for (const auto& n : t.nodes)
      out.insert(out.end(), {static_cast<double>(n.feature), n.threshold, static_cast<double>(n.left),
                             static_cast<double>(n.right), n.value});
  return out;
}

inline std::vector<Tree> unflatten_trees(const std::vector<double>& flat, const std::vector<std::size_t>& sizes) {
  std::vector<Tree> trees;
  std::size_t k = 0;
  for (auto sz : sizes) {
    Tree t;
    for (std::size_t i = 0; i < sz; ++i, k += 5) {
      if (k + 5 > flat.size()) throw DataError("tree artifact: node block too short");
      t.nodes.push_back(TreeNode{static_cast<int>(flat[k]), flat[k + 1], static_cast<int>(flat[k + 2]),
                                 static_cast<int>(flat[k + 3]), flat[k + 4]});
    }
    trees.push_back(std::move(t));
  }
  if (k != flat.size()) throw DataError("tree artifact: node block size mismatch");
  return trees;
}

inline std::vector<std::size_t> tree_sizes(const std::vector<Tree>& trees) {
  std::vector<std::size_t> s;
  for (const auto& t : trees) s.push_back(t.nodes.size());
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random forest

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 4;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw UsageError("forest n_trees must be >= 1");
    if (max_depth < 1) throw UsageError("forest max_depth must be >= 1");
  }
};

struct ForestModel {
  ForestConfig config;
  std::size_t dim = 0;
  std::vector<Tree> trees;

  /// Fraction of trees voting deceptive; a tree votes deceptive when its
  /// leaf's deceptive fraction is >= 0.5.
  double score(std::span<const double> x) const {
    if (x.size() != dim) throw ContractError("forest: feature dimension mismatch");
    double votes = 0.0;
    for (const auto& t : trees) votes += t.predict(x) >= 0.5 ? 1.0 : 0.0;
    return votes / static_cast<double>(trees.size());
  }
};

inline ForestModel forest_train(const std::vector<std::vector<double>>& X, const std::vector<Label>& labels,
                                const ForestConfig& config) {
  config.validate();
  if (X.empty()) throw DataError("forest_train: no training rows");
  detail::check_binary_problem(X, labels, "forest_train");
  const std::size_t n = X.size(), d = X.front().size();
  std::vector<double> target(n);
  for (std::size_t i = 0; i < n; ++i) target[i] = to_int(labels[i]);
  TreeGrowth g;
  g.max_depth = config.max_depth;
  g.criterion = SplitCriterion::gini;
  g.max_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d)))));
  ForestModel m;
  m.config = config;
  m.dim = d;
  Rng rng(derive_seed(config.seed, "forest"));
  for (int t = 0; t < config.n_trees; ++t) {
    std::vector<std::size_t> sample(n);
    if (config.bootstrap)
      for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    else
      std::iota(sample.begin(), sample.end(), 0);
    detail::TreeBuilder builder(X, target, g, &rng);
    m.trees.push_back(builder.build(std::move(sample)));
  }
  return m;
}

inline Prediction forest_predict(const ForestModel& m, std::span<const double> x, std::string unit_id = {}) {
  return make_prediction(std::move(unit_id), m.score(x));
}

inline Artifact forest_to_artifact(const ForestModel& m) {
  Artifact a = new_artifact("forest");
  a.header["config"] = {{"n_trees", m.config.n_trees},
                        {"max_depth", m.config.max_depth},
                        {"bootstrap", m.config.bootstrap},
                        {"seed", m.config.seed}};
  a.header["dim"] = m.dim;
  a.header["tree_sizes"] = detail::tree_sizes(m.trees);
  a.add_block("nodes", detail::flatten_trees(m.trees));
  return a;
}

inline ForestModel forest_from_artifact(const Artifact& a) {
  a.expect_kind("forest");
  ForestModel m;
  const auto& c = a.header.at("config");
  m.config.n_trees = c.at("n_trees");
  m.config.max_depth = c.at("max_depth");
  m.config.bootstrap = c.at("bootstrap");
  m.config.seed = c.at("seed");
  m.dim = a.header.at("dim");
  m.trees = detail::unflatten_trees(a.block("nodes"), a.header.at("tree_sizes").get<std::vector<std::size_t>>());
  return m;
}

// ---------------------------------------------------------------------------
// Gradient boosting, logistic loss

struct BoostConfig {
  int n_estimators = 50;
  double learning_rate = 1.0;
  int max_depth = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_estimators < 0) throw UsageError("boost n_estimators must be >= 0");
    if (!(learning_rate > 0.0)) throw UsageError("boost learning_rate must be positive");
    if (max_depth < 1) throw UsageError("boost max_depth must be >= 1");
  }
};

struct BoostModel {
  BoostConfig config;
  std::size_t dim = 0;
  double init = 0.0;  // empirical log-odds
  std::vector<Tree> trees;
  std::vector<double> train_loss;  // mean logistic loss after 0..n stages

  double margin(std::span<const double> x) const {
    if (x.size() != dim) throw ContractError("boost: feature dimension mismatch");
    double f = init;
    for (const auto& t : trees) f += t.predict(x);
    return f;
  }
};

/// Mean of log(1 + e^F) - y F.
inline double logistic_loss(std::span<const double> margins, std::span<const double> y01) {
  double acc = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const double f = margins[i];
    const double softplus = f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
    acc += softplus - y01[i] * f;
  }
  return acc / static_cast<double>(margins.size());
}

namespace detail {

inline constexpr double kMaxLeafStep = 10.0;

/// argmin over |v| <= kMaxLeafStep of Σ_i loss(F_i + v), by bisection on the
/// monotone derivative Σ_i (σ(F_i + v) - y_i).
inline double leaf_line_search(const std::vector<std::size_t>& members, std::span<const double> F,
                               std::span<const double> y) {
  auto deriv = [&](double v) {
    double g = 0.0;
    for (auto i : members) g += sigmoid(F[i] + v) - y[i];
    return g;
  };
  double lo = -kMaxLeafStep, hi = kMaxLeafStep;
  if (deriv(lo) >= 0.0) return lo;
  if (deriv(hi) <= 0.0) return hi;
  for (int it = 0; it < 100; ++it) {
    const double mid = lo + (hi - lo) / 2.0;
    (deriv(mid) > 0.0 ? hi : lo) = mid;
  }
  return lo + (hi - lo) / 2.0;
}

inline double leaf_loss(const std::vector<std::size_t>& members, std::span<const double> F, std::span<const double> y,
                        double v) {
  double acc = 0.0;
  for (auto i : members) {
    const double f = F[i] + v;
    acc += (f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f))) - y[i] * f;
  }
  return acc;
}

}  // namespace detail

inline BoostModel boost_train(const std::vector<std::vector<double>>& X, const std::vector<Label>& labels,
                              const BoostConfig& config) {
  config.validate();
  if (X.empty()) throw DataError("boost_train: no training rows");
  detail::check_binary_problem(X, labels, "boost_train");
  const std::size_t n = X.size();
  std::vector<double> y(n);
  double pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) pos += (y[i] = to_int(labels[i]));
  const double p = pos / static_cast<double>(n);

  BoostModel m;
  m.config = config;
  m.dim = X.front().size();
  m.init = std::log(p / (1.0 - p));
  std::vector<double> F(n, m.init), residual(n);
  m.train_loss.push_back(logistic_loss(F, y));

  TreeGrowth g;
  g.max_depth = config.max_depth;
  g.criterion = SplitCriterion::squared_error;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (int stage = 0; stage < config.n_estimators; ++stage) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - sigmoid(F[i]);
    detail::TreeBuilder builder(X, residual, g, nullptr);
    Tree tree = builder.build(all);
    std::vector<std::vector<std::size_t>> members(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(tree.leaf_index(X[i]))].push_back(i);
    for (std::size_t leaf = 0; leaf < tree.nodes.size(); ++leaf) {
      if (tree.nodes[leaf].feature >= 0) continue;
      const auto& mem = members[leaf];
      double step = mem.empty() ? 0.0 : config.learning_rate * detail::leaf_line_search(mem, F, y);
      // Convexity makes this a no-op for learning_rate <= 1 up to rounding.
      if (!mem.empty() && detail::leaf_loss(mem, F, y, step) > detail::leaf_loss(mem, F, y, 0.0)) step = 0.0;
      tree.nodes[leaf].value = step;
    }
    for (std::size_t i = 0; i < n; ++i) F[i] += tree.predict(X[i]);
    m.trees.push_back(std::move(tree));
    const double loss = logistic_loss(F, y);
    check_finite(loss, "boosting training loss");
    m.train_loss.push_back(loss);
  }
  return m;
}

inline Prediction boost_predict(const BoostModel& m, std::span<const double> x, std::string unit_id = {}) {
  return make_prediction(std::move(unit_id), sigmoid(m.margin(x)));
}

inline Artifact boost_to_artifact(const BoostModel& m) {
  Artifact a = new_artifact("boost");
  a.header["config"] = {{"n_estimators", m.config.n_estimators},
                        {"learning_rate", m.config.learning_rate},
                        {"max_depth", m.config.max_depth},
                        {"seed", m.config.seed}};
  a.header["dim"] = m.dim;
  a.header["tree_sizes"] = detail::tree_sizes(m.trees);
  a.add_block("init", {m.init});
  a.add_block("nodes", detail::flatten_trees(m.trees));
  a.add_block("train_loss", m.train_loss);
  return a;
}

inline BoostModel boost_from_artifact(const Artifact& a) {
  a.expect_kind("boost");
  BoostModel m;
  const auto& c = a.header.at("config");
  m.config.n_estimators = c.at("n_estimators");
  m.config.learning_rate = c.at("learning_rate");
  m.config.max_depth = c.at("max_depth");
  m.config.seed = c.at("seed");
  m.dim = a.header.at("dim");
  m.init = a.block("init").at(0);
  m.trees = detail::unflatten_trees(a.block("nodes"), a.header.at("tree_sizes").get<std::vector<std::size_t>>());
  m.train_loss = a.block("train_loss");
  return m;
}

}  // namespace ddp
