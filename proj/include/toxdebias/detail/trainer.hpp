#pragma once

// Training kernel shared by the plain probe and the Learned-Mixin ensemble.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "toxdebias/errors.hpp"
#include "toxdebias/probe.hpp"
#include "toxdebias/rng.hpp"

namespace toxdebias::detail {

// Parameter array stored as scale * v so that L2 weight decay costs O(1) per
// step while gradient updates touch only the coordinates a sparse batch hit.
class ParamBlock {
 public:
  ParamBlock() = default;
  ParamBlock(std::vector<double> values, bool decays)
      : v_(std::move(values)), grad_(v_.size(), 0.0), hit_(v_.size(), 0), decays_(decays) {}

  std::size_t size() const { return v_.size(); }
  double value(std::size_t i) const { return scale_ * v_[i]; }
  double scale() const { return scale_; }
  const std::vector<double>& raw() const { return v_; }

  void add_grad(std::size_t i, double g) {
    if (!hit_[i]) {
      hit_[i] = 1;
      touched_.push_back(i);
    }
    grad_[i] += g;
  }
  double grad(std::size_t i) const { return grad_[i]; }

  // theta <- theta * (1 - 2 lr l2) - lr * grad, then clears the gradient.
  void step(double lr, double l2) {
    if (decays_ && l2 > 0.0) {
      scale_ *= 1.0 - 2.0 * lr * l2;
      if (scale_ < 1e-3) renormalize();
    }
    const double k = lr / scale_;
    for (std::size_t i : touched_) {
      v_[i] -= k * grad_[i];
      grad_[i] = 0.0;
      hit_[i] = 0;
    }
    touched_.clear();
  }

  void clear_grad() {
    for (std::size_t i : touched_) {
      grad_[i] = 0.0;
      hit_[i] = 0;
    }
    touched_.clear();
  }

  double squared_norm() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return scale_ * scale_ * s;
  }

  std::vector<double> materialize() const {
    std::vector<double> out(v_.size());
    for (std::size_t i = 0; i < v_.size(); ++i) out[i] = scale_ * v_[i];
    return out;
  }

 private:
  void renormalize() {
    for (double& x : v_) x *= scale_;
    scale_ = 1.0;
  }

  std::vector<double> v_;
  std::vector<double> grad_;
  std::vector<char> hit_;
  std::vector<std::size_t> touched_;
  double scale_ = 1.0;
  bool decays_ = false;
};

class Network {
 public:
  explicit Network(const ProbeModel& model)
      : input_dim_(model.input_dim),
        hidden_(model.hidden_size),
        w1_(model.w1, true),
        b1_(model.b1, false),
        w2_(model.w2, true),
        b2_(model.b2, false) {}

  std::size_t hidden_size() const { return hidden_; }
  std::size_t representation_size() const { return hidden_ ? hidden_ : input_dim_; }

  ForwardResult forward(const FeatureVector& x) const {
    ForwardResult out;
    const std::size_t m = representation_size();
    if (hidden_ == 0) {
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        double acc = 0.0;
        for (const auto& e : x.entries) acc += w2_.raw()[k * m + e.index] * e.value;
        out.logits[k] = w2_.scale() * acc + b2_.value(k);
      }
    } else {
      std::vector<double> pre(hidden_, 0.0);
      for (const auto& e : x.entries) {
        const double* row = w1_.raw().data() + static_cast<std::size_t>(e.index) * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) pre[j] += row[j] * e.value;
      }
      out.hidden.resize(hidden_);
      for (std::size_t j = 0; j < hidden_; ++j) {
        const double a = w1_.scale() * pre[j] + b1_.value(j);
        out.hidden[j] = a > 0.0 ? a : 0.0;
      }
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < hidden_; ++j) acc += w2_.raw()[k * m + j] * out.hidden[j];
        out.logits[k] = w2_.scale() * acc + b2_.value(k);
      }
    }
    out.probs = softmax(out.logits);
    return out;
  }

  // Accumulates weight * dL/dtheta given dL/dlogits and an optional extra
  // dL/dhidden (ignored for the linear model, whose representation is x).
  void backward(const FeatureVector& x, const ForwardResult& f, const ClassProbs& dlogits,
                std::span<const double> dhidden_extra, double weight) {
    const std::size_t m = representation_size();
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      const double d = weight * dlogits[k];
      b2_.add_grad(k, d);
      if (hidden_ == 0) {
        for (const auto& e : x.entries) w2_.add_grad(k * m + e.index, d * e.value);
      } else {
        for (std::size_t j = 0; j < hidden_; ++j) w2_.add_grad(k * m + j, d * f.hidden[j]);
      }
    }
    if (hidden_ == 0) return;
    std::vector<double> dpre(hidden_, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
      if (f.hidden[j] <= 0.0) continue;
      double dh = 0.0;
      for (std::size_t k = 0; k < kNumClasses; ++k) dh += w2_.value(k * m + j) * dlogits[k];
      if (!dhidden_extra.empty()) dh += dhidden_extra[j];
      dpre[j] = weight * dh;
      b1_.add_grad(j, dpre[j]);
    }
    for (const auto& e : x.entries) {
      const std::size_t base = static_cast<std::size_t>(e.index) * hidden_;
      for (std::size_t j = 0; j < hidden_; ++j) {
        if (dpre[j] != 0.0) w1_.add_grad(base + j, dpre[j] * e.value);
      }
    }
  }

  void step(double lr, double l2) {
    w1_.step(lr, l2);
    b1_.step(lr, l2);
    w2_.step(lr, l2);
    b2_.step(lr, l2);
  }

  double weight_penalty(double l2) const {
    return l2 * (w1_.squared_norm() + w2_.squared_norm());
  }

  void export_to(ProbeModel& model) const {
    model.w1 = w1_.materialize();
    model.b1 = b1_.materialize();
    model.w2 = w2_.materialize();
    model.b2 = b2_.materialize();
  }

  // Pending gradient of the data term (the weighted sum of backward() calls).
  ProbeGradient pending_gradient() const {
    auto dump = [](const ParamBlock& b) {
      std::vector<double> g(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) g[i] = b.grad(i);
      return g;
    };
    return {dump(w1_), dump(b1_), dump(w2_), dump(b2_)};
  }

  // Representation inner product (see representation_dot()).
  static double dot(const FeatureVector& x, const ForwardResult& f, const ParamBlock& w) {
    double acc = 0.0;
    if (f.hidden.empty()) {
      for (const auto& e : x.entries) acc += w.raw()[e.index] * e.value;
    } else {
      for (std::size_t j = 0; j < f.hidden.size(); ++j) acc += w.raw()[j] * f.hidden[j];
    }
    return w.scale() * acc;
  }

 private:
  std::uint32_t input_dim_;
  std::size_t hidden_;
  ParamBlock w1_, b1_, w2_, b2_;
};

inline void require_two_classes(const std::vector<int>& labels) {
  bool seen[2] = {false, false};
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("training labels must be 0 or 1");
    seen[y] = true;
  }
  if (!seen[0] || !seen[1]) {
    throw DataError("training data contains a single class; cannot train a classifier");
  }
}

// Epoch loop. For each example `per_example(i, x, fwd, weight, dlogits,
// dhidden)` fills the unweighted dL/dlogits (and optionally dL/dhidden);
// `weight` is 1/batch and must be applied to any extra parameter gradients.
// `after_batch(lr)` steps any extra parameter blocks; `after_epoch(e)` runs
// once each epoch completes.
template <typename PerExample, typename AfterBatch, typename AfterEpoch>
void run_epochs(Network& net, const FeatureMatrix& features, const ProbeConfig& config,
                PerExample&& per_example, AfterBatch&& after_batch, AfterEpoch&& after_epoch) {
  const std::size_t n = features.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, 0x5348554646ULL));  // "SHUFF"
  ClassProbs dlogits{};
  std::vector<double> dhidden(net.hidden_size(), 0.0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t p = start; p < end; ++p) {
        const std::size_t i = order[p];
        const FeatureVector& x = features.rows[i];
        const ForwardResult fwd = net.forward(x);
        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        per_example(i, x, fwd, weight, dlogits, dhidden);
        net.backward(x, fwd, dlogits, dhidden, weight);
      }
      net.step(config.learning_rate, config.l2);
      after_batch(config.learning_rate);
    }
    after_epoch(epoch);
  }
}

}  // namespace toxdebias::detail
