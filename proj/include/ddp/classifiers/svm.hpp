#pragma once

// C-SVC trained by sequential minimal optimization with second-order
// working-set selection (Fan, Chen & Lin style), plus kernel evaluation and
// sigmoid-calibrated prediction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ddp/classifiers/artifact.hpp"
#include "ddp/core.hpp"

namespace ddp {

enum class KernelKind { rbf, poly, linear };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::poly: return "poly";
    case KernelKind::linear: return "linear";
  }
  return "?";
}

inline KernelKind parse_kernel(std::string_view s) {
  if (s == "rbf") return KernelKind::rbf;
  if (s == "poly") return KernelKind::poly;
  if (s == "linear") return KernelKind::linear;
  throw UsageError("unknown kernel '" + std::string(s) + "'");
}

struct KernelParams {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;
  double coef0 = 0.0;
  int degree = 3;
};

struct SVMConfig {
  double C = 1.0;
  KernelKind kernel = KernelKind::rbf;
  double gamma = 1.0;
  double coef0 = 0.0;
  int degree = 3;
  double tol = 1e-3;
  long max_passes = 10'000'000;

  KernelParams kernel_params() const { return {kernel, gamma, coef0, degree}; }

  void validate() const {
    if (!(C > 0.0)) throw UsageError("SVM C must be positive");
    if (kernel != KernelKind::linear && !(gamma > 0.0)) throw UsageError("SVM gamma must be positive");
    if (degree < 1) throw UsageError("SVM degree must be >= 1");
    if (!(tol > 0.0)) throw UsageError("SVM tol must be positive");
    if (max_passes < 1) throw UsageError("SVM max_passes must be >= 1");
  }
};

inline double kernel_eval(const KernelParams& p, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("kernel_eval: vector length mismatch");
  switch (p.kind) {
    case KernelKind::rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
      return std::exp(-p.gamma * d2);
    }
    case KernelKind::poly: {
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      return std::pow(p.gamma * dot + p.coef0, p.degree);
    }
    case KernelKind::linear: {
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      return dot;
    }
  }
  return 0.0;
}

struct SVMModel {
  SVMConfig config;
  std::size_t dim = 0;
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> alpha;  // 0 <= alpha <= C
  std::vector<double> y;      // +1 deceptive, -1 truthful
  double bias = 0.0;
  long iterations = 0;

  /// f(x) = Σ αᵢ yᵢ K(xᵢ, x) + b
  double decision(std::span<const double> x) const {
    if (x.size() != dim) throw ContractError("svm: feature dimension mismatch");
    const auto kp = config.kernel_params();
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i)
      f += alpha[i] * y[i] * kernel_eval(kp, support_vectors[i], x);
    return f;
  }
};

namespace detail {

inline void check_binary_problem(const std::vector<std::vector<double>>& X, const std::vector<Label>& labels,
                                 const char* who) {
  if (X.size() != labels.size()) throw ContractError(std::string(who) + ": row/label count mismatch");
  bool pos = false, neg = false;
  for (Label l : labels) (l == Label::deceptive ? pos : neg) = true;
  if (!pos || !neg) throw DataError(std::string(who) + ": training data must contain both classes");
  const std::size_t d = X.front().size();
  for (const auto& row : X) {
    if (row.size() != d) throw ContractError(std::string(who) + ": ragged feature rows");
    for (double v : row)
      if (!std::isfinite(v)) throw DataError(std::string(who) + ": non-finite feature value");
  }
}

}  // namespace detail

inline SVMModel svm_train(const std::vector<std::vector<double>>& X, const std::vector<Label>& labels,
                          const SVMConfig& config) {
  config.validate();
  if (X.empty()) throw DataError("svm_train: no training rows");
  detail::check_binary_problem(X, labels, "svm_train");
  const std::size_t n = X.size();
  const auto kp = config.kernel_params();
  const double C = config.C;
  constexpr double kTau = 1e-12;

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = to_pm1(labels[i]);
  // Q_ij = y_i y_j K(x_i, x_j)
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = kernel_eval(kp, X[i], X[j]);
  auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K[i * n + j]; };

  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  long iter = 0;
  for (; iter < config.max_passes; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    long i_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -G[t] >= gmax) gmax = -G[t], i_sel = static_cast<long>(t);
      } else {
        if (!lower(t) && G[t] >= gmax) gmax = G[t], i_sel = static_cast<long>(t);
      }
    }
    if (i_sel < 0) break;
    const auto i = static_cast<std::size_t>(i_sel);
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    long j_sel = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double grad_diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
        if (grad_diff > 0) {
          double quad = K[i * n + i] + K[t * n + t] - 2.0 * y[i] * Q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best_obj) best_obj = obj, j_sel = static_cast<long>(t);
        }
      } else {
        if (upper(t)) continue;
        const double grad_diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
        if (grad_diff > 0) {
          double quad = K[i * n + i] + K[t * n + t] + 2.0 * y[i] * Q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best_obj) best_obj = obj, j_sel = static_cast<long>(t);
        }
      }
    }
    if (gmax + gmax2 < config.tol || j_sel < 0) break;
    const auto j = static_cast<std::size_t>(j_sel);

    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = K[i * n + i] + K[j * n + j] + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = K[i * n + i] + K[j * n + j] - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else {
        if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * dai + Q(j, t) * daj;
  }

  // Bias: average y·G over free vectors, else midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  SVMModel m;
  m.config = config;
  m.dim = X.front().size();
  m.bias = -rho;
  m.iterations = iter;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    m.support_vectors.push_back(X[t]);
    m.alpha.push_back(alpha[t]);
    m.y.push_back(y[t]);
  }
  check_finite(m.bias, "svm bias");
  return m;
}

/// Margin mapped through the logistic function; label by the 0.5 threshold.
inline Prediction svm_predict(const SVMModel& model, std::span<const double> x, std::string unit_id = {}) {
  return make_prediction(std::move(unit_id), sigmoid(model.decision(x)));
}

inline nlohmann::ordered_json svm_config_to_json(const SVMConfig& c) {
  return {{"C", c.C},         {"kernel", to_string(c.kernel)}, {"gamma", c.gamma},
          {"coef0", c.coef0}, {"degree", c.degree},            {"tol", c.tol},
          {"max_passes", c.max_passes}};
}

inline SVMConfig svm_config_from_json(const nlohmann::json& j, SVMConfig c = {}) {
  c.C = j.value("C", c.C);
  if (j.contains("kernel")) c.kernel = parse_kernel(j["kernel"].get<std::string>());
  c.gamma = j.value("gamma", c.gamma);
  c.coef0 = j.value("coef0", c.coef0);
  c.degree = j.value("degree", c.degree);
  c.tol = j.value("tol", c.tol);
  c.max_passes = j.value("max_passes", c.max_passes);
  return c;
}

inline Artifact svm_to_artifact(const SVMModel& m) {
  Artifact a = new_artifact("svm");
  a.header["config"] = svm_config_to_json(m.config);
  a.header["dim"] = m.dim;
  a.header["n_support"] = m.support_vectors.size();
  std::vector<double> sv;
  for (const auto& row : m.support_vectors) sv.insert(sv.end(), row.begin(), row.end());
  a.add_block("support_vectors", std::move(sv));
  a.add_block("alpha", m.alpha);
  a.add_block("y", m.y);
  a.add_block("bias", {m.bias});
  return a;
}

inline SVMModel svm_from_artifact(const Artifact& a) {
  a.expect_kind("svm");
  SVMModel m;
  m.config = svm_config_from_json(a.header.at("config"));
  m.dim = a.header.at("dim");
  const std::size_t ns = a.header.at("n_support");
  const auto& sv = a.block("support_vectors");
  if (sv.size() != ns * m.dim) throw DataError("svm artifact: support vector block size mismatch");
  for (std::size_t i = 0; i < ns; ++i)
    m.support_vectors.emplace_back(sv.begin() + static_cast<long>(i * m.dim),
                                   sv.begin() + static_cast<long>((i + 1) * m.dim));
  m.alpha = a.block("alpha");
  m.y = a.block("y");
  m.bias = a.block("bias").at(0);
  if (m.alpha.size() != ns || m.y.size() != ns) throw DataError("svm artifact: coefficient size mismatch");
  return m;
}

}  // namespace ddp
