#pragma once

// Small convolutional binary classifier: [conv3x3(same) + ReLU + maxpool2] per
// layer, a ReLU dense layer, then one sigmoid output unit trained with binary
// cross-entropy and Adam. Convolutions run as im2col GEMMs through Eigen.
//
// Network<Scalar> holds the math and works on a flat parameter vector so the
// same code serves float training and double-precision gradient checks.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddp/classifiers/artifact.hpp"
#include "ddp/core.hpp"
#include "ddp/media.hpp"

namespace ddp {

struct CNNConfig {
  int input_size = 64;
  int input_channels = 3;
  std::vector<int> conv_channels{32, 64, 128, 128};
  int dense_units = 128;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::optional<double> early_stop_accuracy;  // stop once an epoch's running training accuracy reaches this

  void validate() const {
    if (input_channels < 1) throw UsageError("cnn input_channels must be >= 1");
    if (conv_channels.empty()) throw UsageError("cnn needs at least one conv layer");
    for (int c : conv_channels)
      if (c < 1) throw UsageError("cnn conv channel counts must be >= 1");
    if (dense_units < 1) throw UsageError("cnn dense_units must be >= 1");
    if (!(learning_rate > 0.0)) throw UsageError("cnn learning_rate must be positive");
    if (batch_size < 1) throw UsageError("cnn batch_size must be >= 1");
    if (epochs < 0) throw UsageError("cnn epochs must be >= 0");
    const int div = 1 << conv_channels.size();
    if (input_size < div || input_size % div != 0)
      throw UsageError("cnn input_size must be a positive multiple of 2^(number of conv layers)");
  }
};

namespace cnn_detail {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<Mat<S>>;
template <typename S>
using MapCMat = Eigen::Map<const Mat<S>>;
template <typename S>
using MapVec = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;
template <typename S>
using MapCVec = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

struct ConvShape {
  int cin, cout, size;  // input spatial size (square); output of pooling is size/2
  std::size_t w_off, b_off;
};

struct Layout {
  std::vector<ConvShape> conv;
  int flat = 0;
  int dense = 0;
  std::size_t d1w = 0, d1b = 0, d2w = 0, d2b = 0, total = 0;

  explicit Layout(const CNNConfig& c) {
    std::size_t off = 0;
    int cin = c.input_channels, size = c.input_size;
    for (int cout : c.conv_channels) {
      ConvShape s{cin, cout, size, off, 0};
      off += static_cast<std::size_t>(cout) * cin * 9;
      s.b_off = off;
      off += static_cast<std::size_t>(cout);
      conv.push_back(s);
      cin = cout;
      size /= 2;
    }
    flat = cin * size * size;
    dense = c.dense_units;
    d1w = off;
    off += static_cast<std::size_t>(dense) * flat;
    d1b = off;
    off += static_cast<std::size_t>(dense);
    d2w = off;
    off += static_cast<std::size_t>(dense);
    d2b = off;
    off += 1;
    total = off;
  }
};

/// col[(ci*9 + ky*3 + kx), y*n + x] = in[ci, y+ky-1, x+kx-1] (zero outside).
template <typename S>
void im2col(const S* in, int cin, int n, Mat<S>& col) {
  col.setZero(static_cast<Eigen::Index>(cin) * 9, static_cast<Eigen::Index>(n) * n);
  for (int ci = 0; ci < cin; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        S* row = col.row(ci * 9 + ky * 3 + kx).data();
        for (int y = 0; y < n; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= n) continue;
          const S* src = in + (static_cast<std::size_t>(ci) * n + sy) * n;
          for (int x = 0; x < n; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < n) row[y * n + x] = src[sx];
          }
        }
      }
}

template <typename S>
void col2im(const Mat<S>& col, int cin, int n, S* out) {
  std::fill(out, out + static_cast<std::size_t>(cin) * n * n, S(0));
  for (int ci = 0; ci < cin; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const S* row = col.row(ci * 9 + ky * 3 + kx).data();
        for (int y = 0; y < n; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= n) continue;
          S* dst = out + (static_cast<std::size_t>(ci) * n + sy) * n;
          for (int x = 0; x < n; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < n) dst[sx] += row[y * n + x];
          }
        }
      }
}

}  // namespace cnn_detail

template <typename S>
class Network {
 public:
  explicit Network(const CNNConfig& config) : config_(validated(config)), layout_(config_) {}

  std::size_t parameter_count() const { return layout_.total; }
  const CNNConfig& config() const { return config_; }

  /// He-uniform weights, zero biases.
  std::vector<S> initial_parameters(std::uint64_t seed) const {
    std::vector<S> p(layout_.total, S(0));
    Rng rng(derive_seed(seed, "cnn:init"));
    auto fill = [&](std::size_t off, std::size_t count, double fan_in) {
      const double lim = std::sqrt(6.0 / fan_in);
      for (std::size_t i = 0; i < count; ++i) p[off + i] = static_cast<S>(rng.uniform(-lim, lim));
    };
    for (const auto& c : layout_.conv) fill(c.w_off, static_cast<std::size_t>(c.cout) * c.cin * 9, c.cin * 9.0);
    fill(layout_.d1w, static_cast<std::size_t>(layout_.dense) * layout_.flat, layout_.flat);
    fill(layout_.d2w, static_cast<std::size_t>(layout_.dense), layout_.dense);
    return p;
  }

  /// CHW tensor from an HWC image; shape mismatch is a contract error.
  std::vector<S> to_input(const Image& img) const {
    const int n = config_.input_size, c = config_.input_channels;
    if (img.height != n || img.width != n || c != 3)
      throw ContractError("cnn: image is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                          ", model expects " + std::to_string(n) + "x" + std::to_string(n) + "x3");
    std::vector<S> out(static_cast<std::size_t>(c) * n * n);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          out[(static_cast<std::size_t>(ch) * n + y) * n + x] = static_cast<S>(img.at(y, x, ch));
    return out;
  }

  S logit(std::span<const S> params, std::span<const S> input) {
    forward(params, input);
    return z_out_;
  }

  /// Adds d(loss)/d(params) * weight into grad and returns the example's BCE.
  S accumulate_gradient(std::span<const S> params, std::span<const S> input, int target01, S weight,
                        std::span<S> grad) {
    using namespace cnn_detail;
    forward(params, input);
    const S z = z_out_;
    const S y = static_cast<S>(target01);
    // BCE from the logit: softplus(z) - y z
    const S loss = (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - y * z;
    const S p = S(1) / (S(1) + std::exp(-z));
    const S dz = (p - y) * weight;

    const auto& L = layout_;
    MapVec<S>(grad.data() + L.d2w, L.dense) += dz * h1_;
    grad[L.d2b] += dz;
    Eigen::Matrix<S, Eigen::Dynamic, 1> dh1 = dz * MapCVec<S>(params.data() + L.d2w, L.dense);
    for (int i = 0; i < L.dense; ++i)
      if (h1_[i] <= S(0)) dh1[i] = S(0);
    MapMat<S>(grad.data() + L.d1w, L.dense, L.flat) += dh1 * flat_.transpose();
    MapVec<S>(grad.data() + L.d1b, L.dense) += dh1;
    Eigen::Matrix<S, Eigen::Dynamic, 1> dflat =
        MapCMat<S>(params.data() + L.d1w, L.dense, L.flat).transpose() * dh1;

    std::vector<S> dout(dflat.data(), dflat.data() + dflat.size());
    for (std::size_t li = L.conv.size(); li-- > 0;) {
      const auto& c = L.conv[li];
      const int n = c.size, h = n / 2;
      // Unpool into the pre-pool activation gradient, masked by ReLU.
      Mat<S> dZ = Mat<S>::Zero(c.cout, static_cast<Eigen::Index>(n) * n);
      const auto& arg = argmax_[li];
      for (int ch = 0; ch < c.cout; ++ch)
        for (int q = 0; q < h * h; ++q) {
          const std::size_t k = static_cast<std::size_t>(ch) * h * h + q;
          const int pos = arg[k];
          if (z_[li](ch, pos) > S(0)) dZ(ch, pos) += dout[k];
        }
      MapMat<S>(grad.data() + c.w_off, c.cout, static_cast<Eigen::Index>(c.cin) * 9) += dZ * col_[li].transpose();
      MapVec<S>(grad.data() + c.b_off, c.cout) += dZ.rowwise().sum();
      if (li == 0) break;
      Mat<S> dcol = MapCMat<S>(params.data() + c.w_off, c.cout, static_cast<Eigen::Index>(c.cin) * 9).transpose() * dZ;
      dout.assign(static_cast<std::size_t>(c.cin) * n * n, S(0));
      col2im(dcol, c.cin, n, dout.data());
    }
    return loss;
  }

  /// Mean BCE and its gradient over a set of examples.
  S loss_and_gradient(std::span<const S> params, const std::vector<std::vector<S>>& inputs,
                      const std::vector<int>& targets, std::vector<S>& grad) {
    grad.assign(layout_.total, S(0));
    const S w = S(1) / static_cast<S>(inputs.size());
    S total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) total += accumulate_gradient(params, inputs[i], targets[i], w, grad);
    return total / static_cast<S>(inputs.size());
  }

 private:
  static const CNNConfig& validated(const CNNConfig& c) {
    c.validate();
    return c;
  }

  void forward(std::span<const S> params, std::span<const S> input) {
    using namespace cnn_detail;
    const auto& L = layout_;
    if (params.size() != L.total) throw ContractError("cnn: parameter vector size mismatch");
    if (input.size() != static_cast<std::size_t>(config_.input_channels) * config_.input_size * config_.input_size)
      throw ContractError("cnn: input tensor size mismatch");
    col_.resize(L.conv.size());
    z_.resize(L.conv.size());
    argmax_.resize(L.conv.size());
    std::vector<S> act(input.begin(), input.end());
    for (std::size_t li = 0; li < L.conv.size(); ++li) {
      const auto& c = L.conv[li];
      const int n = c.size, h = n / 2;
      im2col(act.data(), c.cin, n, col_[li]);
      z_[li] = MapCMat<S>(params.data() + c.w_off, c.cout, static_cast<Eigen::Index>(c.cin) * 9) * col_[li];
      z_[li].colwise() += MapCVec<S>(params.data() + c.b_off, c.cout);
      act.assign(static_cast<std::size_t>(c.cout) * h * h, S(0));
      argmax_[li].assign(act.size(), 0);
      for (int ch = 0; ch < c.cout; ++ch) {
        const S* zr = z_[li].row(ch).data();
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < h; ++x) {
            int best = (2 * y) * n + 2 * x;
            for (int pos : {best + 1, best + n, best + n + 1})
              if (zr[pos] > zr[best]) best = pos;
            const std::size_t k = (static_cast<std::size_t>(ch) * h + y) * h + x;
            argmax_[li][k] = best;
            act[k] = std::max(zr[best], S(0));  // relu and max commute
          }
      }
    }
    flat_ = MapCVec<S>(act.data(), static_cast<Eigen::Index>(act.size()));
    h1_ = MapCMat<S>(params.data() + L.d1w, L.dense, L.flat) * flat_ + MapCVec<S>(params.data() + L.d1b, L.dense);
    h1_ = h1_.cwiseMax(S(0));
    z_out_ = MapCVec<S>(params.data() + L.d2w, L.dense).dot(h1_) + params[L.d2b];
  }

  CNNConfig config_;
  cnn_detail::Layout layout_;
  std::vector<cnn_detail::Mat<S>> col_, z_;
  std::vector<std::vector<int>> argmax_;
  Eigen::Matrix<S, Eigen::Dynamic, 1> flat_, h1_;
  S z_out_ = 0;
};

struct CNNModel {
  CNNConfig config;
  std::vector<float> params;
  std::vector<double> epoch_loss;
};

inline void check_cnn_inputs(const std::vector<Image>& images, const std::vector<Label>& labels) {
  if (images.size() != labels.size()) throw ContractError("cnn_train: image/label count mismatch");
  bool pos = false, neg = false;
  for (Label l : labels) (l == Label::deceptive ? pos : neg) = true;
  if (!pos || !neg) throw DataError("cnn_train: training data must contain both classes");
}

inline CNNModel cnn_train(const std::vector<Image>& images, const std::vector<Label>& labels,
                          const CNNConfig& config) {
  config.validate();
  check_cnn_inputs(images, labels);
  Network<float> net(config);
  std::vector<std::vector<float>> inputs;
  inputs.reserve(images.size());
  for (const auto& img : images) inputs.push_back(net.to_input(img));

  CNNModel model{config, net.initial_parameters(config.seed), {}};
  auto& w = model.params;
  const std::size_t P = w.size();
  std::vector<float> grad(P), m(P, 0.0f), v(P, 0.0f);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double lr = config.learning_rate;
  Rng order_rng(derive_seed(config.seed, "cnn:order"));
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0f);
      const float weight = 1.0f / static_cast<float>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const int y = to_int(labels[i]);
        const float loss = net.accumulate_gradient(w, inputs[i], y, weight, grad);
        if (!std::isfinite(loss)) throw NumericError("cnn: non-finite loss at epoch " + std::to_string(epoch));
        epoch_loss += loss;
        // The forward pass that produced `loss` also gives the running prediction.
        const double p = std::exp(-static_cast<double>(loss));
        correct += p > 0.5 ? 1 : 0;
      }
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (std::size_t j = 0; j < P; ++j) {
        const double g = grad[j];
        m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g);
        v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g * g);
        const double mh = m[j] / c1, vh = v[j] / c2;
        w[j] = static_cast<float>(w[j] - lr * mh / (std::sqrt(vh) + eps));
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    check_finite(epoch_loss, "cnn epoch loss");
    model.epoch_loss.push_back(epoch_loss);
    const double acc = static_cast<double>(correct) / static_cast<double>(order.size());
    if (config.early_stop_accuracy && acc >= *config.early_stop_accuracy) break;
  }
  return model;
}

inline Prediction cnn_predict(const CNNModel& model, const Image& image, std::string unit_id = {}) {
  Network<float> net(model.config);
  const auto input = net.to_input(image);
  const double z = net.logit(model.params, input);
  check_finite(z, "cnn logit");
  return make_prediction(std::move(unit_id), sigmoid(z));
}

/// Batch prediction reusing one network workspace.
inline std::vector<Prediction> cnn_predict_all(const CNNModel& model, const std::vector<Image>& images,
                                               const std::vector<std::string>& unit_ids) {
  require(images.size() == unit_ids.size(), "cnn_predict_all: image/id count mismatch");
  Network<float> net(model.config);
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double z = net.logit(model.params, net.to_input(images[i]));
    check_finite(z, "cnn logit");
    out.push_back(make_prediction(unit_ids[i], sigmoid(z)));
  }
  return out;
}

inline nlohmann::ordered_json cnn_config_to_json(const CNNConfig& c) {
  nlohmann::ordered_json j = {{"input_size", c.input_size},
                              {"input_channels", c.input_channels},
                              {"conv_channels", c.conv_channels},
                              {"dense_units", c.dense_units},
                              {"learning_rate", c.learning_rate},
                              {"batch_size", c.batch_size},
                              {"epochs", c.epochs},
                              {"seed", c.seed}};
  j["early_stop_accuracy"] = c.early_stop_accuracy ? nlohmann::ordered_json(*c.early_stop_accuracy) : nullptr;
  return j;
}

template <typename J>
CNNConfig cnn_config_from_json(const J& j) {
  CNNConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.input_channels = j.value("input_channels", c.input_channels);
  if (j.contains("conv_channels")) c.conv_channels = j.at("conv_channels").template get<std::vector<int>>();
  c.dense_units = j.value("dense_units", c.dense_units);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  if (j.contains("early_stop_accuracy") && !j.at("early_stop_accuracy").is_null())
    c.early_stop_accuracy = j.at("early_stop_accuracy").template get<double>();
  c.validate();
  return c;
}

inline Artifact cnn_to_artifact(const CNNModel& m) {
  Artifact a = new_artifact("cnn");
  a.header["config"] = cnn_config_to_json(m.config);
  a.add_block("params", std::vector<double>(m.params.begin(), m.params.end()));
  a.add_block("epoch_loss", m.epoch_loss);
  return a;
}

inline CNNModel cnn_from_artifact(const Artifact& a) {
  a.expect_kind("cnn");
  CNNModel m;
  m.config = cnn_config_from_json(a.header.at("config"));
  const auto& p = a.block("params");
  if (p.size() != cnn_detail::Layout(m.config).total) throw DataError("cnn artifact: parameter count mismatch");
  m.params.assign(p.begin(), p.end());
  m.epoch_loss = a.block("epoch_loss");
  return m;
}

}  // namespace ddp
