#pragma once

// KShapeNet: optional transformation layer -> two conv1d+ReLU -> max pool ->
// one-layer LSTM -> dense head, trained with softmax cross-entropy and Adam.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kshape/errors.hpp"
#include "kshape/layers/adam.hpp"
#include "kshape/layers/common.hpp"
#include "kshape/layers/conv.hpp"
#include "kshape/layers/dense.hpp"
#include "kshape/layers/lstm.hpp"
#include "kshape/layers/transform.hpp"
#include "kshape/trajectory.hpp"

namespace kshape {

struct KShapeNetConfig {
  int frames = 100;
  int joints = 25;
  int classes = 2;
  Projection projection = Projection::CommonReference;
  std::optional<TransformVariant> transform = TransformVariant::NonRigidAngle;
  bool align = true;

  int conv1_channels = 64;
  int conv1_kernel = 5;
  int conv2_channels = 64;
  int conv2_kernel = 3;
  int pool_window = 2;
  int lstm_hidden = 128;

  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 0;

  int features() const { return 3 * (joints - 1); }
  bool is_baseline() const { return projection == Projection::None && !transform; }

  void validate() const {
    if (frames < 4) throw DomainError("config: frames must be at least 4");
    if (joints < 3) throw DomainError("config: joints must be at least 3");
    if (classes < 2) throw DomainError("config: classes must be at least 2");
    if (conv1_kernel > frames || conv2_kernel > frames) throw DomainError("config: conv kernel longer than the sequence");
    if (pool_window < 1 || frames / pool_window < 1) throw DomainError("config: pool window too large");
    if (conv1_channels < 1 || conv2_channels < 1 || lstm_hidden < 1) throw DomainError("config: layer sizes must be positive");
    if (epochs < 0 || batch_size < 1) throw DomainError("config: epochs >= 0 and batch_size >= 1 required");
    if (!(learning_rate >= 0.0)) throw DomainError("config: learning rate must be non-negative");
  }
};

/// Network inputs with labels and ids, one T x 3(n-1) matrix per sequence.
struct LabeledSet {
  Batch inputs;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return inputs.size(); }
};

struct Metrics {
  std::vector<double> epoch_losses;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // rows: true class, cols: predicted (test set)
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<std::vector<int>> confusion;
};

class Model {
 public:
  struct Trace {
    Batch input, transformed, conv1, conv2, pooled;
    LSTMLayer::Trace lstm;
    Eigen::MatrixXd logits;
  };

  struct LossAndGradients {
    double loss = 0.0;
    Eigen::MatrixXd logits;
    std::vector<Eigen::MatrixXd> grads;  // aligned with parameters()
    Batch input_grad;
  };

  Model(KShapeNetConfig config, ReferenceShape reference)
      : config_((config.validate(), std::move(config))),
        reference_(std::move(reference)),
        conv1_(config_.features(), config_.conv1_channels, config_.conv1_kernel),
        conv2_(config_.conv1_channels, config_.conv2_channels, config_.conv2_kernel),
        pool_(config_.pool_window),
        lstm_(config_.conv2_channels, config_.lstm_hidden),
        dense_(config_.lstm_hidden, config_.classes) {
    if (reference_.shape.dim() != config_.features()) {
      throw DimensionError("Model: reference shape does not match the joint count");
    }
    if (config_.transform) transform_.emplace(*config_.transform, config_.frames, config_.joints - 1);
    reset_optimizer();
  }

  const KShapeNetConfig& config() const { return config_; }
  const ReferenceShape& reference() const { return reference_; }
  const std::optional<TransformLayer>& transform() const { return transform_; }
  std::optional<TransformLayer>& transform() { return transform_; }
  Conv1DLayer& conv1() { return conv1_; }
  const Conv1DLayer& conv1() const { return conv1_; }
  Conv1DLayer& conv2() { return conv2_; }
  const Conv1DLayer& conv2() const { return conv2_; }
  const MaxPool1D& pool() const { return pool_; }
  LSTMLayer& lstm() { return lstm_; }
  const LSTMLayer& lstm() const { return lstm_; }
  DenseLayer& dense() { return dense_; }
  const DenseLayer& dense() const { return dense_; }
  AdamState& optimizer() { return adam_; }
  const AdamState& optimizer() const { return adam_; }

  void reset_optimizer() {
    adam_ = AdamState{};
    adam_.learning_rate = config_.learning_rate;
    adam_.beta1 = config_.beta1;
    adam_.beta2 = config_.beta2;
    adam_.epsilon = config_.epsilon;
  }

  /// Every trainable tensor in a fixed order: transform, conv1 (W, b),
  /// conv2 (W, b), LSTM (W, U, b), dense (W, b).
  std::vector<Eigen::MatrixXd*> parameters() {
    std::vector<Eigen::MatrixXd*> p;
    if (transform_) p.push_back(&transform_->params());
    for (auto* m : {&conv1_.weights(), &conv1_.bias(), &conv2_.weights(), &conv2_.bias(), &lstm_.w(),
                    &lstm_.u(), &lstm_.bias(), &dense_.weights(), &dense_.bias()})
      p.push_back(m);
    return p;
  }

  std::vector<const Eigen::MatrixXd*> parameters() const {
    std::vector<const Eigen::MatrixXd*> p;
    for (auto* m : const_cast<Model*>(this)->parameters()) p.push_back(m);
    return p;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    if (transform_) names.emplace_back("transform");
    for (const char* n : {"conv1.weights", "conv1.bias", "conv2.weights", "conv2.bias", "lstm.w", "lstm.u",
                          "lstm.bias", "dense.weights", "dense.bias"})
      names.emplace_back(n);
    return names;
  }

  Trace forward_trace(const Batch& x) const {
    for (const auto& s : x) require_shape(s, config_.frames, config_.features(), "Model::forward");
    Trace tr;
    tr.input = x;
    tr.transformed = transform_ ? transform_->forward(x) : x;
    tr.conv1 = conv1_.forward(tr.transformed);
    tr.conv2 = conv2_.forward(tr.conv1);
    tr.pooled = pool_.forward(tr.conv2);
    tr.lstm = lstm_.forward_trace(tr.pooled);
    tr.logits = dense_.forward(tr.lstm.final_hidden());
    return tr;
  }

  /// batch x classes logits.
  Eigen::MatrixXd forward(const Batch& x) const { return forward_trace(x).logits; }

  LossAndGradients loss_and_gradients(const Batch& x, const std::vector<int>& labels) const {
    const Trace tr = forward_trace(x);
    LossResult loss = softmax_cross_entropy(tr.logits, labels);

    const auto dense_g = dense_.backward(tr.lstm.final_hidden(), loss.grad);
    const auto lstm_g = lstm_.backward(tr.lstm, dense_g.input);
    const Batch pool_g = pool_.backward(tr.conv2, lstm_g.input);
    const auto conv2_g = conv2_.backward(tr.conv1, tr.conv2, pool_g);
    const auto conv1_g = conv1_.backward(tr.transformed, tr.conv1, conv2_g.input);

    LossAndGradients out;
    out.loss = loss.loss;
    out.logits = tr.logits;
    if (transform_) {
      auto tg = transform_->backward(tr.input, conv1_g.input);
      out.grads.push_back(std::move(tg.params));
      out.input_grad = std::move(tg.input);
    } else {
      out.input_grad = conv1_g.input;
    }
    for (const Eigen::MatrixXd* g : {&conv1_g.weights, &conv1_g.bias, &conv2_g.weights, &conv2_g.bias, &lstm_g.w,
                                     &lstm_g.u, &lstm_g.bias, &dense_g.weights, &dense_g.bias})
      out.grads.push_back(*g);
    return out;
  }

  /// One optimizer step on a mini-batch; returns the batch loss.
  double train_step(const Batch& x, const std::vector<int>& labels) {
    auto lg = loss_and_gradients(x, labels);
    adam_step(parameters(), lg.grads, adam_);
    return lg.loss;
  }

 private:
  KShapeNetConfig config_;
  ReferenceShape reference_;
  std::optional<TransformLayer> transform_;
  Conv1DLayer conv1_;
  Conv1DLayer conv2_;
  MaxPool1D pool_;
  LSTMLayer lstm_;
  DenseLayer dense_;
  AdamState adam_;
};

/// Deterministic initialization from config.seed: fan-in scaled uniform for
/// conv, LSTM and dense; identity kernels / zero angles for the transform layer.
inline Model build_model(const KShapeNetConfig& config, const ReferenceShape& reference) {
  Model m(config, reference);
  Rng rng(config.seed);
  m.conv1().init(rng);
  m.conv2().init(rng);
  m.lstm().init(rng);
  m.dense().init(rng);
  return m;
}

/// Argmax per row, ties toward the lower index.
inline std::vector<int> predict_classes(const Eigen::MatrixXd& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k) {
      if (logits(b, k) > logits(b, best)) best = k;
    }
    out[b] = static_cast<int>(best);
  }
  return out;
}

inline Evaluation evaluate_logits(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
  if (logits.rows() == 0) throw DomainError("evaluate: empty dataset");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw DimensionError("evaluate: label count mismatch");
  const auto classes = static_cast<std::size_t>(logits.cols());
  Evaluation ev;
  ev.predictions = predict_classes(logits);
  ev.confusion.assign(classes, std::vector<int>(classes, 0));
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw DomainError("evaluate: label " + std::to_string(labels[i]) + " out of range");
    }
    ++ev.confusion[labels[i]][ev.predictions[i]];
    if (labels[i] == ev.predictions[i]) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return ev;
}

inline Evaluation evaluate(const Model& model, const LabeledSet& data, std::size_t chunk = 64) {
  if (data.size() == 0) throw DomainError("evaluate: empty dataset");
  Eigen::MatrixXd logits(static_cast<Eigen::Index>(data.size()), model.config().classes);
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    const Batch part(data.inputs.begin() + start, data.inputs.begin() + end);
    logits.middleRows(start, end - start) = model.forward(part);
  }
  return evaluate_logits(logits, data.labels);
}

namespace detail {

inline void check_labels(const LabeledSet& set, int classes, const char* which) {
  if (set.inputs.size() != set.labels.size()) throw DimensionError(std::string(which) + ": label count mismatch");
  for (int y : set.labels) {
    if (y < 0 || y >= classes) {
      throw DomainError(std::string(which) + ": label " + std::to_string(y) + " out of range");
    }
  }
}

// Positions sorted by id so the training stream does not depend on file order.
inline std::vector<std::size_t> canonical_order(const LabeledSet& set) {
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  if (set.ids.size() == set.size()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return set.ids[a] < set.ids[b]; });
  }
  return order;
}

}  // namespace detail

/// Mini-batch training for config.epochs epochs with a seed-driven shuffle.
/// Returns per-epoch mean loss plus final train/test accuracy.
inline Metrics train(Model& model, const LabeledSet& train_set, const LabeledSet& test_set) {
  const auto& cfg = model.config();
  if (train_set.size() == 0) throw DomainError("train: empty training set");
  if (test_set.size() == 0) throw DomainError("train: empty test set");
  detail::check_labels(train_set, cfg.classes, "train");
  detail::check_labels(test_set, cfg.classes, "train");

  const std::vector<std::size_t> base = detail::canonical_order(train_set);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  Metrics metrics;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = base;
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      Batch x;
      std::vector<int> y;
      for (std::size_t k = start; k < end; ++k) {
        x.push_back(train_set.inputs[order[k]]);
        y.push_back(train_set.labels[order[k]]);
      }
      total += model.train_step(x, y) * static_cast<double>(end - start);
    }
    metrics.epoch_losses.push_back(total / static_cast<double>(order.size()));
  }
  metrics.train_accuracy = evaluate(model, train_set).accuracy;
  const Evaluation test = evaluate(model, test_set);
  metrics.test_accuracy = test.accuracy;
  metrics.confusion = test.confusion;
  return metrics;
}

}  // namespace kshape
