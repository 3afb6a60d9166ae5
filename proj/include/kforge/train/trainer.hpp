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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kforge/nn/models.hpp"
#include "kforge/train/config.hpp"

namespace kforge::train {

/// Labeled motion samples held in memory: samples are [S, C, T, N].
template <typename T>
struct TrainingSet {
  Tensor<T> samples;
  std::vector<Index> labels;

  Index size() const { return samples.defined() ? samples.dim(0) : 0; }

  void validate(const nn::ModelConfig& m, Index joints) const {
    KFORGE_CHECK(size() > 0, ConfigError, "training set is empty");
    KFORGE_CHECK(samples.rank() == 4 && samples.dim(1) == m.channels && samples.dim(2) == m.frames &&
                     samples.dim(3) == joints,
                 ShapeError, "training samples have shape ", shape_str(samples.shape()), ", model expects [S,",
                 m.channels, ",", m.frames, ",", joints, "]");
    KFORGE_CHECK(static_cast<Index>(labels.size()) == size(), ShapeError, labels.size(), " labels for ", size(),
                 " samples");
    for (Index y : labels)
      KFORGE_CHECK(y >= 0 && y < m.num_classes, ConfigError, "label ", y, " outside [0,", m.num_classes, ")");
  }

  /// Rows `ids` as a batch.
  std::pair<Tensor<T>, std::vector<Index>> gather(const std::vector<Index>& ids) const {
    std::vector<Index> y;
    for (Index i : ids) y.push_back(labels[static_cast<std::size_t>(i)]);
    NoGradGuard no_grad;
    return {index_select(samples, ids), y};
  }
};

// ---------------------------------------------------------------------------
// Losses.

/// Per-sample interpolation weights for the penalty, uniform on [0, 1).
template <typename T>
std::vector<T> sample_epsilon(Index batch, std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  Rng rng(seed, Stream::kEpsilon, coords);
  std::vector<T> eps(static_cast<std::size_t>(batch));
  for (auto& e : eps) e = static_cast<T>(rng.uniform());
  return eps;
}

/// x_hat = eps * real + (1 - eps) * fake, as a fresh leaf.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& real, const Tensor<T>& fake, const std::vector<T>& eps) {
  KFORGE_CHECK(real.shape() == fake.shape(), ShapeError, "real batch ", shape_str(real.shape()),
               " and fake batch ", shape_str(fake.shape()), " differ");
  KFORGE_CHECK(real.rank() >= 1 && static_cast<Index>(eps.size()) == real.dim(0), ShapeError, eps.size(),
               " interpolation weights for batch of ", real.dim(0));
  const Index per = real.numel() / real.dim(0);
  std::vector<T> v(static_cast<std::size_t>(real.numel()));
  const auto r = real.data(), f = fake.data();
  for (Index b = 0; b < real.dim(0); ++b)
    for (Index k = 0; k < per; ++k) {
      const Index i = b * per + k;
      v[i] = eps[b] * r[i] + (T(1) - eps[b]) * f[i];
    }
  Tensor<T> x(real.shape(), std::move(v));
  x.set_requires_grad(true);
  return x;
}

struct PenaltyStats {
  double penalty = 0.0;
  double mean_grad_norm = 0.0;
};

/// mean_b (||grad_x D(x_hat_b | y_b)||_2 - 1)^2, differentiable with respect
/// to the critic's parameters.
template <typename T, typename Critic>
Tensor<T> gradient_penalty(Critic&& critic, const Tensor<T>& real, const Tensor<T>& fake,
                           const std::vector<Index>& labels, const std::vector<T>& eps,
                           PenaltyStats* stats = nullptr) {
  const auto x_hat = interpolate(real, fake, eps);
  const auto scores = critic(x_hat, labels);
  const auto g = grad(sum(scores), {x_hat}, GradOptions{true, false})[0];
  KFORGE_CHECK(g.all_finite(), NumericError, "gradient penalty: critic input gradient is not finite");
  std::vector<Index> axes;
  for (Index d = 1; d < g.rank(); ++d) axes.push_back(d);
  const auto norms = sqrt(add_scalar(sum(square(g), axes, false), T(1e-12)));
  const auto penalty = mean(square(add_scalar(norms, T(-1))));
  if (stats) {
    stats->penalty = static_cast<double>(penalty.item());
    double s = 0.0;
    for (T n : norms.data()) s += static_cast<double>(n);
    stats->mean_grad_norm = s / static_cast<double>(norms.numel());
  }
  return penalty;
}

template <typename T>
struct CriticLoss {
  Tensor<T> total;
  double wasserstein = 0.0;  // E[D(fake)] - E[D(real)]
  double penalty = 0.0;
  double d_real = 0.0;
  double d_fake = 0.0;
  double input_grad_norm = 0.0;
};

template <typename T, typename Critic>
CriticLoss<T> critic_loss(Critic&& critic, const Tensor<T>& real, const Tensor<T>& fake,
                          const std::vector<Index>& labels, const std::vector<T>& eps, double lambda) {
  const auto d_real = mean(critic(real, labels));
  const auto d_fake = mean(critic(fake, labels));
  auto w = sub(d_fake, d_real);
  CriticLoss<T> out;
  out.d_real = static_cast<double>(d_real.item());
  out.d_fake = static_cast<double>(d_fake.item());
  out.wasserstein = static_cast<double>(w.item());
  if (lambda > 0) {
    PenaltyStats ps;
    const auto gp = gradient_penalty<T>(critic, real, fake, labels, eps, &ps);
    out.penalty = ps.penalty;
    out.input_grad_norm = ps.mean_grad_norm;
    out.total = add(w, mul_scalar(gp, static_cast<T>(lambda)));
  } else {
    out.total = w;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run log.

struct StepRecord {
  Index step = 0;
  Index critic_steps = 0;
  double critic_loss = 0.0;
  double wasserstein = 0.0;
  double penalty = 0.0;
  double generator_loss = 0.0;
  double critic_grad_norm = 0.0;
  double generator_grad_norm = 0.0;
  double input_grad_norm = 0.0;
  double wall_seconds = 0.0;

  /// Deterministic fields only; wall time is kept separately.
  nlohmann::json to_json() const {
    return {{"step", step},
            {"critic_steps", critic_steps},
            {"critic_loss", critic_loss},
            {"wasserstein", wasserstein},
            {"penalty", penalty},
            {"generator_loss", generator_loss},
            {"critic_grad_norm", critic_grad_norm},
            {"generator_grad_norm", generator_grad_norm},
            {"input_grad_norm", input_grad_norm}};
  }
};

struct MetricSnapshot {
  Index step = 0;
  nlohmann::json metrics;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<MetricSnapshot> snapshots;

  void append(const StepRecord& r) {
    KFORGE_CHECK(steps.empty() || r.step > steps.back().step, Error, "run log step ", r.step,
                 " does not follow step ", steps.back().step);
    steps.push_back(r);
  }
};

// ---------------------------------------------------------------------------
// Trainer.

template <typename T>
double gradient_norm(const std::vector<Tensor<T>>& grads) {
  double s = 0.0;
  for (const auto& g : grads)
    for (T v : g.data()) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

struct EvalResult {
  nlohmann::json metrics;
  bool stop = false;
};

template <typename T>
class Trainer {
 public:
  using Evaluator = std::function<EvalResult(nn::Generator<T>&, Index step)>;

  Trainer(TrainConfig config, graph::GraphPyramid pyramid, TrainingSet<T> data)
      : config_(std::move(config)), pyramid_(std::move(pyramid)), data_(std::move(data)) {
    config_.validate();
    config_.model.init_seed = config_.seed;
    gen_ = std::make_unique<nn::Generator<T>>(config_.model, pyramid_);
    disc_ = std::make_unique<nn::Discriminator<T>>(config_.model, pyramid_);
    data_.validate(config_.model, pyramid_.finest().joint_count());
    const auto audit = nn::audit_models(*gen_, *disc_);
    KFORGE_CHECK(audit.ok(), ConfigError, "model fails the normalization audit: ", audit.violations.front());
    gen_params_ = gen_->parameters();
    disc_params_ = disc_->parameters();
    gen_train_ = gen_params_.trainable();
    disc_train_ = disc_params_.trainable();
    gen_adam_ = AdamState<T>(gen_train_, config_.adam);
    disc_adam_ = AdamState<T>(disc_train_, config_.adam);
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const TrainConfig& config() const { return config_; }
  const graph::GraphPyramid& pyramid() const { return pyramid_; }
  nn::Generator<T>& generator() { return *gen_; }
  nn::Discriminator<T>& discriminator() { return *disc_; }
  const ParameterList<T>& generator_parameters() const { return gen_params_; }
  const ParameterList<T>& discriminator_parameters() const { return disc_params_; }
  const ParameterList<T>& generator_trainable() const { return gen_train_; }
  const ParameterList<T>& discriminator_trainable() const { return disc_train_; }
  Index step() const { return step_; }
  Index critic_steps_taken() const { return critic_steps_; }
  const RunLog& log() const { return log_; }
  const TrainingSet<T>& data() const { return data_; }

  /// Batch indices for (generator step, critic iteration); iteration
  /// n_critic is used for the generator step's labels.
  std::vector<Index> batch_indices(Index step, Index iter) const {
    Rng rng(config_.seed, Stream::kBatch, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(iter)});
    std::vector<Index> ids(static_cast<std::size_t>(config_.batch_size));
    for (auto& i : ids) i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(data_.size())));
    return ids;
  }

  std::uint64_t noise_seed(Index step, Index iter) const {
    Rng rng(config_.seed, Stream::kNoise, {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(iter)});
    return rng.next_u64();
  }

  Tensor<T> latents(Index batch, Index step, Index iter) const {
    return nn::sample_latents<T>(batch, config_.model.latent_dim, config_.seed,
                                 {0x7a11, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(iter)});
  }

  /// Critic objective for one iteration: fakes come from the current
  /// generator with the real batch's labels.
  CriticLoss<T> critic_objective(const Tensor<T>& real, const std::vector<Index>& labels, Index step, Index iter) {
    Tensor<T> fake;
    {
      NoGradGuard no_grad;
      gen_->set_track_running_stats(false);
      fake = (*gen_)(latents(real.dim(0), step, iter), labels, noise_seed(step, iter), true);
      gen_->set_track_running_stats(true);
    }
    const auto eps = sample_epsilon<T>(real.dim(0), config_.seed,
                                       {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(iter)});
    auto critic = [this](const Tensor<T>& x, const std::vector<Index>& y) { return (*disc_)(x, y); };
    return critic_loss<T>(critic, real, fake, labels, eps, config_.lambda);
  }

  /// One Adam step on the critic against the given real batch.
  CriticLoss<T> critic_step(const Tensor<T>& real, const std::vector<Index>& labels, Index step, Index iter) {
    auto loss = critic_objective(real, labels, step, iter);
    check_finite("critic", loss.total, step);
    const auto grads = grad(loss.total, disc_train_.tensors(), GradOptions{false, true});
    last_critic_grad_norm_ = gradient_norm(grads);
    adam_step(disc_train_, grads, disc_adam_);
    ++critic_steps_;
    return loss;
  }

  /// -E[D(G(z, y) | y)] for the generator step at `step`.
  Tensor<T> generator_objective(const std::vector<Index>& labels, Index step) {
    const Index iter = config_.n_critic;
    const auto fake =
        (*gen_)(latents(static_cast<Index>(labels.size()), step, iter), labels, noise_seed(step, iter), true);
    return neg(mean((*disc_)(fake, labels)));
  }

  /// One Adam step on generator, mapping network and class embedding.
  double generator_step(const std::vector<Index>& labels, Index step) {
    const auto loss = generator_objective(labels, step);
    check_finite("generator", loss, step);
    const auto grads = grad(loss, gen_train_.tensors(), GradOptions{false, true});
    last_generator_grad_norm_ = gradient_norm(grads);
    adam_step(gen_train_, grads, gen_adam_);
    return static_cast<double>(loss.item());
  }

  /// n_critic critic steps followed by one generator step.
  StepRecord train_step() {
    const auto t0 = std::chrono::steady_clock::now();
    StepRecord r;
    r.step = step_;
    const Index before = critic_steps_;
    for (Index c = 0; c < config_.n_critic; ++c) {
      const auto [real, labels] = data_.gather(batch_indices(step_, c));
      const auto loss = critic_step(real, labels, step_, c);
      r.critic_loss = static_cast<double>(loss.total.item());
      r.wasserstein = loss.wasserstein;
      r.penalty = loss.penalty;
      r.input_grad_norm = loss.input_grad_norm;
    }
    r.critic_steps = critic_steps_ - before;
    r.critic_grad_norm = last_critic_grad_norm_;
    const auto [unused, labels] = data_.gather(batch_indices(step_, config_.n_critic));
    r.generator_loss = generator_step(labels, step_);
    r.generator_grad_norm = last_generator_grad_norm_;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++step_;
    return r;
  }

  /// Trains until `config.steps` generator steps have been taken (or the
  /// evaluator asks to stop). With a run directory, checkpoints and the log
  /// are written there.
  void run(const std::optional<std::filesystem::path>& run_dir = std::nullopt, const Evaluator& evaluator = {}) {
    std::ofstream log_file, timing_file;
    if (run_dir) {
      std::filesystem::create_directories(*run_dir / "checkpoints");
      std::ofstream(*run_dir / "config.json") << config_.to_json().dump(2) << "\n";
      const auto mode = step_ == 0 ? std::ios::trunc : std::ios::app;
      log_file.open(*run_dir / "log.jsonl", std::ios::out | mode);
      timing_file.open(*run_dir / "timing.jsonl", std::ios::out | mode);
      KFORGE_CHECK(log_file && timing_file, Error, "cannot write run log in ", run_dir->string());
      if (step_ == 0) save_checkpoint(checkpoint(), checkpoint_dir(*run_dir, 0));
    }
    while (step_ < config_.steps) {
      const auto r = train_step();
      log_.append(r);
      if (log_file && (r.step % config_.log_every == 0 || step_ == config_.steps)) {
        log_file << r.to_json().dump() << "\n";
        timing_file << nlohmann::json{{"step", r.step}, {"wall_seconds", r.wall_seconds}}.dump() << "\n";
        log_file.flush();
        timing_file.flush();
      }
      if (run_dir && config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0)
        save_checkpoint(checkpoint(), checkpoint_dir(*run_dir, step_));
      if (evaluator && config_.eval_every > 0 && step_ % config_.eval_every == 0) {
        const auto e = evaluator(*gen_, step_);
        log_.snapshots.push_back({step_, e.metrics});
        if (log_file) {
          log_file << nlohmann::json{{"step", step_}, {"metrics", e.metrics}}.dump() << "\n";
          log_file.flush();
        }
        if (e.stop) break;
      }
    }
    if (run_dir) {
      const auto ckpt = checkpoint();
      save_checkpoint(ckpt, checkpoint_dir(*run_dir, step_));
      save_checkpoint(ckpt, *run_dir / "checkpoints" / "latest");
    }
  }

  static std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, Index step) {
    char name[32];
    std::snprintf(name, sizeof(name), "step_%08lld", static_cast<long long>(step));
    return run_dir / "checkpoints" / name;
  }

  Checkpoint checkpoint() const {
    Checkpoint c;
    c.meta["step"] = std::to_string(step_);
    c.meta["critic_steps"] = std::to_string(critic_steps_);
    c.meta["adam_gen_step"] = std::to_string(gen_adam_.step);
    c.meta["adam_disc_step"] = std::to_string(disc_adam_.step);
    c.meta["model"] = config_.model.to_json().dump();
    c.meta["train"] = config_.to_json().dump();
    c.add_parameters(gen_params_);
    c.add_parameters(disc_params_);
    add_moments(c, gen_train_, gen_adam_);
    add_moments(c, disc_train_, disc_adam_);
    return c;
  }

  /// Restores parameters, optimizer state and the step counter.
  void resume(const Checkpoint& c) {
    c.load_parameters(gen_params_);
    c.load_parameters(disc_params_);
    load_moments(c, gen_train_, gen_adam_);
    load_moments(c, disc_train_, disc_adam_);
    step_ = std::stoll(meta(c, "step"));
    critic_steps_ = std::stoll(meta(c, "critic_steps"));
    gen_adam_.step = std::stoll(meta(c, "adam_gen_step"));
    disc_adam_.step = std::stoll(meta(c, "adam_disc_step"));
  }

 private:
  static std::string meta(const Checkpoint& c, const std::string& key) {
    auto it = c.meta.find(key);
    KFORGE_CHECK(it != c.meta.end(), ParseError, "checkpoint lacks '", key, "' metadata");
    return it->second;
  }

  static void add_moments(Checkpoint& c, const ParameterList<T>& params, const AdamState<T>& s) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.add("adam.m." + params[i].name, params[i].value.shape(), s.m[i]);
      c.add("adam.v." + params[i].name, params[i].value.shape(), s.v[i]);
    }
  }

  static void load_moments(const Checkpoint& c, const ParameterList<T>& params, AdamState<T>& s) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (auto [prefix, dst] : {std::pair{"adam.m.", &s.m[i]}, std::pair{"adam.v.", &s.v[i]}}) {
        const auto* st = c.find(prefix + params[i].name);
        KFORGE_CHECK(st != nullptr, ParseError, "checkpoint has no optimizer state for '", params[i].name, "'");
        KFORGE_CHECK(st->values.size() == dst->size(), ShapeError, "optimizer state size mismatch for '",
                     params[i].name, "'");
        for (std::size_t k = 0; k < dst->size(); ++k) (*dst)[k] = static_cast<T>(st->values[k]);
      }
    }
  }

  void check_finite(const char* what, const Tensor<T>& loss, Index step) const {
    const double v = static_cast<double>(loss.item());
    KFORGE_CHECK(std::isfinite(v), NumericError, what, " loss is not finite at step ", step);
    KFORGE_CHECK(std::abs(v) <= 1e6, NumericError, what, " loss ", v, " exceeds 1e6 at step ", step,
                 ": training diverged");
  }

  TrainConfig config_;
  graph::GraphPyramid pyramid_;
  TrainingSet<T> data_;
  std::unique_ptr<nn::Generator<T>> gen_;
  std::unique_ptr<nn::Discriminator<T>> disc_;
  ParameterList<T> gen_params_, disc_params_, gen_train_, disc_train_;
  AdamState<T> gen_adam_, disc_adam_;
  Index step_ = 0;
  Index critic_steps_ = 0;
  double last_critic_grad_norm_ = 0.0;
  double last_generator_grad_norm_ = 0.0;
  RunLog log_;
};

/// Loads the latest checkpoint of a run directory, if any.
inline std::optional<Checkpoint> latest_checkpoint(const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "checkpoints" / "latest";
  if (!std::filesystem::exists(dir / "manifest.txt")) return std::nullopt;
  return load_checkpoint(dir);
}

/// Trains `config` on `data`, resuming from the run directory's latest
/// checkpoint when one exists.
template <typename T>
std::unique_ptr<Trainer<T>> train(const TrainConfig& config, const graph::GraphPyramid& pyramid, TrainingSet<T> data,
                                  const std::filesystem::path& run_dir,
                                  const typename Trainer<T>::Evaluator& evaluator = {}) {
  auto trainer = std::make_unique<Trainer<T>>(config, pyramid, std::move(data));
  if (auto c = latest_checkpoint(run_dir)) trainer->resume(*c);
  trainer->run(run_dir, evaluator);
  return trainer;
}

}  // namespace kforge::train
