// Copyright 2026 The kforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "kforge/graph/pyramid.hpp"
#include "kforge/metrics/mmd.hpp"
#include "kforge/nn/layers.hpp"
#include "kforge/tensor/adam.hpp"
#include "kforge/tensor/checkpoint.hpp"

namespace kforge::metrics {

/// Deterministic map from sequences [S, C, T, N] to feature rows.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual SampleMatrix features(const Tensor<float>& sequences) const = 0;
  virtual std::string fingerprint() const = 0;
};

class FlattenFeatures final : public FeatureExtractor {
 public:
  SampleMatrix features(const Tensor<float>& sequences) const override { return flatten_sequences(sequences); }
  std::string fingerprint() const override { return "flatten"; }
};

struct ClassifierConfig {
  Index hidden = 32;
  Index blocks = 2;
  Index kernel = 5;
  Index epochs = 30;
  Index batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"hidden", hidden}, {"blocks", blocks}, {"kernel", kernel}, {"epochs", epochs},
            {"batch_size", batch_size}, {"lr", lr}, {"seed", seed}};
  }

  static ClassifierConfig from_json(const nlohmann::json& j) {
    ClassifierConfig c;
    KFORGE_CHECK(j.is_object(), ConfigError, "classifier config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      try {
        if (key == "hidden") c.hidden = v.get<Index>();
        else if (key == "blocks") c.blocks = v.get<Index>();
        else if (key == "kernel") c.kernel = v.get<Index>();
        else if (key == "epochs") c.epochs = v.get<Index>();
        else if (key == "batch_size") c.batch_size = v.get<Index>();
        else if (key == "lr") c.lr = v.get<double>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else throw ConfigError("unknown classifier key '" + key + "'");
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("classifier key '" + key + "': " + e.what());
      }
    }
    return c;
  }
};

/// Small action-recognition network: blocks of spatial graph convolution and
/// temporal convolution with ReLU, global mean pooling and a linear head.
/// Pooled activations serve as features.
class GcnClassifier {
 public:
  GcnClassifier(const graph::SkeletonSpec& skeleton, Index channels, Index classes, ClassifierConfig cfg = {})
      : skeleton_(skeleton), channels_(channels), classes_(classes), cfg_(cfg),
        head_("classifier.head", cfg.hidden, classes, cfg.seed) {
    KFORGE_CHECK(classes >= 2, ConfigError, "classifier needs at least 2 classes");
    KFORGE_CHECK(cfg.hidden >= 1 && cfg.blocks >= 1 && cfg.kernel % 2 == 1, ConfigError,
                 "invalid classifier architecture");
    const auto adj = graph::partition_and_normalize(skeleton, 0);
    for (Index b = 0; b < cfg.blocks; ++b) {
      const Index in = b == 0 ? channels : cfg.hidden;
      const std::string p = "classifier.block" + std::to_string(b);
      gcn_.emplace_back(p + ".gcn", adj, in, cfg.hidden, cfg.seed);
      tconv_.emplace_back(p + ".tconv", cfg.hidden, cfg.hidden, cfg.kernel, cfg.seed);
    }
    for (auto& g : gcn_) g.collect(params_);
    for (auto& t : tconv_) t.collect(params_);
    head_.collect(params_);
  }

  GcnClassifier(const GcnClassifier&) = delete;
  GcnClassifier& operator=(const GcnClassifier&) = delete;

  const ParameterList<float>& parameters() const { return params_; }
  Index classes() const { return classes_; }
  const ClassifierConfig& config() const { return cfg_; }

  /// Pooled activations [S, hidden].
  Tensor<float> embed(const Tensor<float>& x) const {
    KFORGE_CHECK(x.rank() == 4 && x.dim(1) == channels_ && x.dim(3) == skeleton_.joint_count(), ShapeError,
                 "classifier expects [S,", channels_, ",T,", skeleton_.joint_count(), "], got ", shape_str(x.shape()));
    auto h = nn::to_channel_last(x);
    for (std::size_t b = 0; b < gcn_.size(); ++b) h = relu(tconv_[b](relu(gcn_[b](h))));
    return mean(h, {1, 2}, false);
  }

  Tensor<float> logits(const Tensor<float>& x) const { return head_(embed(x)); }

  std::vector<Index> predict(const Tensor<float>& x) const {
    NoGradGuard no_grad;
    const auto l = logits(x);
    std::vector<Index> out;
    for (Index i = 0; i < l.dim(0); ++i) {
      Index best = 0;
      for (Index k = 1; k < classes_; ++k)
        if (l.data()[i * classes_ + k] > l.data()[i * classes_ + best]) best = k;
      out.push_back(best);
    }
    return out;
  }

  double accuracy(const Tensor<float>& x, const std::vector<Index>& labels) const {
    const auto p = predict(x);
    Index hit = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(p.size());
  }

  /// Mean softmax cross-entropy.
  Tensor<float> loss(const Tensor<float>& x, const std::vector<Index>& labels) const {
    const auto l = logits(x);
    const auto shift = amax(l, 1);
    const auto lse = add(log(sum(exp(sub(l, shift)), {1}, true)), shift);
    std::vector<float> onehot(static_cast<std::size_t>(l.numel()), 0.0f);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      KFORGE_CHECK(labels[i] >= 0 && labels[i] < classes_, ArgumentError, "label ", labels[i], " out of range");
      onehot[i * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(labels[i])] = 1.0f;
    }
    const auto picked = sum(mul(l, Tensor<float>(l.shape(), std::move(onehot))), {1}, true);
    return mean(sub(lse, picked));
  }

  /// Minibatch Adam on cross-entropy; returns the final-epoch mean loss.
  double fit(const Tensor<float>& x, const std::vector<Index>& labels) {
    KFORGE_CHECK(x.rank() == 4 && static_cast<Index>(labels.size()) == x.dim(0) && x.dim(0) >= 1, ShapeError,
                 "classifier training needs one label per sample");
    AdamState<float> adam(params_, AdamConfig{cfg_.lr, 0.9, 0.999, 1e-8});
    const Index n = x.dim(0);
    double epoch_loss = 0.0;
    for (Index e = 0; e < cfg_.epochs; ++e) {
      std::vector<Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Index{0});
      Rng rng(cfg_.seed, Stream::kEval, {0xc1a5, static_cast<std::uint64_t>(e)});
      for (Index i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
      epoch_loss = 0.0;
      Index batches = 0;
      for (Index s = 0; s < n; s += cfg_.batch_size) {
        std::vector<Index> ids(order.begin() + s, order.begin() + std::min(n, s + cfg_.batch_size));
        std::vector<Index> y;
        for (Index i : ids) y.push_back(labels[static_cast<std::size_t>(i)]);
        Tensor<float> xb;
        {
          NoGradGuard no_grad;
          xb = index_select(x, ids);
        }
        const auto l = loss(xb, y);
        adam_step(params_, grad(l, params_.tensors()), adam);
        epoch_loss += static_cast<double>(l.item());
        ++batches;
      }
      epoch_loss /= static_cast<double>(batches);
    }
    return epoch_loss;
  }

  std::uint64_t parameter_hash() const { return params_.fingerprint(); }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.meta["kind"] = "gcn_classifier";
    c.meta["skeleton"] = skeleton_.name;
    c.meta["channels"] = std::to_string(channels_);
    c.meta["classes"] = std::to_string(classes_);
    c.meta["hidden"] = std::to_string(cfg_.hidden);
    c.meta["blocks"] = std::to_string(cfg_.blocks);
    c.meta["kernel"] = std::to_string(cfg_.kernel);
    c.add_parameters(params_);
    return c;
  }

  void load(const Checkpoint& c) { c.load_parameters(params_); }

 private:
  graph::SkeletonSpec skeleton_;
  Index channels_;
  Index classes_;
  ClassifierConfig cfg_;
  std::vector<nn::SpatialGCN<float>> gcn_;
  std::vector<nn::TemporalConv<float>> tconv_;
  nn::Linear<float> head_;
  ParameterList<float> params_;
};

/// Penultimate activations of a trained classifier.
class ClassifierFeatures final : public FeatureExtractor {
 public:
  explicit ClassifierFeatures(std::shared_ptr<const GcnClassifier> model) : model_(std::move(model)) {}

  SampleMatrix features(const Tensor<float>& sequences) const override {
    NoGradGuard no_grad;
    const auto e = model_->embed(sequences);
    SampleMatrix m(e.dim(0), e.dim(1));
    for (Index i = 0; i < e.dim(0); ++i)
      for (Index k = 0; k < e.dim(1); ++k) m(i, k) = static_cast<double>(e.data()[i * e.dim(1) + k]);
    return m;
  }

  std::string fingerprint() const override {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "gcn-classifier/h%lld-b%lld/%016llx",
                  static_cast<long long>(model_->config().hidden), static_cast<long long>(model_->config().blocks),
                  static_cast<unsigned long long>(model_->parameter_hash()));
    return buf;
  }

 private:
  std::shared_ptr<const GcnClassifier> model_;
};

}  // namespace kforge::metrics
