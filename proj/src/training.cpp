// Copyright 2026 The panfuse Authors.
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

#include "panfuse/training.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "panfuse/errors.hpp"

namespace panfuse {

TrainConfig TrainConfig::full() {
  TrainConfig cfg;
  cfg.warmup_iters = 2000;
  cfg.decay_points = {{60000, 0.002}, {80000, 0.0002}};
  cfg.total_iters = 100000;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(warmup_start_lr > 0.0 && warmup_start_lr <= base_lr)) {
    throw InvalidInputError("train config: need 0 < warmup_start_lr <= base_lr");
  }
  if (warmup_iters < 0 || total_iters < 0) {
    throw InvalidInputError("train config: iteration counts must be non-negative");
  }
  for (std::size_t i = 1; i < decay_points.size(); ++i) {
    if (decay_points[i].iteration <= decay_points[i - 1].iteration) {
      throw InvalidInputError("train config: decay points must be strictly increasing");
    }
  }
  if (momentum < 0.0 || weight_decay < 0.0) {
    throw InvalidInputError("train config: momentum and weight_decay must be non-negative");
  }
}

double lr_at(std::int64_t iteration, const TrainConfig& cfg) {
  if (iteration < 0 || iteration >= cfg.total_iters) {
    throw InvalidInputError("lr_at: iteration " + std::to_string(iteration) + " outside [0, " +
                            std::to_string(cfg.total_iters) + ")");
  }
  if (iteration < cfg.warmup_iters) {
    const double t = static_cast<double>(iteration) / static_cast<double>(cfg.warmup_iters);
    return cfg.warmup_start_lr + (cfg.base_lr - cfg.warmup_start_lr) * t;
  }
  double lr = cfg.base_lr;
  for (const DecayPoint& point : cfg.decay_points) {
    if (iteration >= point.iteration) lr = point.lr;
  }
  return lr;
}

LossBreakdown combine_losses(const InstanceLosses& instance_losses, double stuff_loss,
                             double srm_loss, double lambda) {
  const double parts[] = {instance_losses.rpn_cls, instance_losses.rpn_bbox, instance_losses.cls,
                          instance_losses.bbox,    instance_losses.mask,     stuff_loss,
                          srm_loss,                lambda};
  for (double v : parts) {
    if (!std::isfinite(v)) throw DivergenceError("combine_losses: non-finite loss term", 0);
  }
  LossBreakdown out;
  out.instance_losses = instance_losses;
  out.stuff_loss = stuff_loss;
  out.srm_loss = srm_loss;
  out.total = instance_losses.sum() + lambda * stuff_loss + srm_loss;
  return out;
}

void sgd_step(Eigen::VectorXd& weights, const Eigen::VectorXd& grads, SgdState& state,
              const Eigen::VectorXd& decay_mask, double lr, const TrainConfig& cfg,
              std::int64_t iteration) {
  if (grads.size() != weights.size() || decay_mask.size() != weights.size()) {
    throw InvalidInputError("sgd_step: parameter shapes disagree");
  }
  if (state.velocity.size() == 0) state.velocity = Eigen::VectorXd::Zero(weights.size());
  if (state.velocity.size() != weights.size()) {
    throw InvalidInputError("sgd_step: momentum state has the wrong size");
  }
  Eigen::VectorXd velocity =
      cfg.momentum * state.velocity + grads + cfg.weight_decay * decay_mask.cwiseProduct(weights);
  Eigen::VectorXd updated = weights - lr * velocity;
  if (!updated.allFinite() || !velocity.allFinite()) {
    throw DivergenceError("sgd_step: non-finite update", iteration);
  }
  state.velocity = std::move(velocity);
  weights = std::move(updated);
}

double mean_srm_loss(std::span<const SrmSample> samples, const ConvSpec<double>& spec) {
  double total = 0.0;
  std::size_t used = 0;
  for (const SrmSample& s : samples) {
    if (s.supervised.empty()) continue;
    total += srm_loss(forward(s.input, spec), s.labels, s.supervised).loss;
    ++used;
  }
  return used == 0 ? 0.0 : total / static_cast<double>(used);
}

TrainResult train_srm(std::span<const SrmSample> samples, const TrainConfig& cfg,
                      const std::function<void(const std::string&)>& warn) {
  cfg.validate();
  if (samples.empty()) throw InvalidInputError("train_srm: empty dataset");
  const Index channels = static_cast<Index>(samples.front().input.size());
  std::vector<const SrmSample*> trainable;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Index>(samples[i].input.size()) != channels) {
      throw InvalidInputError("train_srm: samples disagree on channel count");
    }
    if (samples[i].supervised.empty()) {
      const std::string message = "sample " + std::to_string(i) + " has no conflicting pixels; skipped";
      if (warn) {
        warn(message);
      } else {
        std::cerr << "warning: " << message << '\n';
      }
      continue;
    }
    trainable.push_back(&samples[i]);
  }

  TrainResult result;
  result.weights = ConvSpec<double>::random(cfg.shape, channels, cfg.seed);
  result.used_samples = trainable.size();
  result.curve.reserve(static_cast<std::size_t>(cfg.total_iters));
  if (trainable.empty()) {
    for (std::int64_t t = 0; t < cfg.total_iters; ++t) {
      result.curve.push_back(LossPoint{t, lr_at(t, cfg), 0.0});
    }
    return result;
  }

  result.initial_mean_loss = mean_srm_loss(samples, result.weights);
  Eigen::VectorXd params = flatten_parameters(result.weights);
  const Eigen::VectorXd decay = weight_decay_mask(result.weights);
  SgdState state;
  for (std::int64_t t = 0; t < cfg.total_iters; ++t) {
    const SrmSample& sample = *trainable[static_cast<std::size_t>(t) % trainable.size()];
    const ScoreMap<double> scores = forward(sample.input, result.weights);
    const LossResult<double> loss = srm_loss(scores, sample.labels, sample.supervised);
    if (!std::isfinite(loss.loss)) throw DivergenceError("train_srm: non-finite loss", t);
    const ConvGradients<double> grads = conv_backward(sample.input, result.weights, loss.grad_logits);
    const double lr = lr_at(t, cfg);
    sgd_step(params, flatten_gradients(grads), state, decay, lr, cfg, t);
    assign_parameters(result.weights, params);
    result.curve.push_back(LossPoint{t, lr, loss.loss});
  }
  result.final_mean_loss = mean_srm_loss(samples, result.weights);
  return result;
}

std::string loss_curve_csv(std::span<const LossPoint> curve) {
  std::ostringstream out;
  out << "iteration,lr,loss\n";
  char line[96];
  for (const LossPoint& p : curve) {
    std::snprintf(line, sizeof(line), "%lld,%.6g,%.6f\n", static_cast<long long>(p.iteration), p.lr,
                  p.loss);
    out << line;
  }
  return out.str();
}

}  // namespace panfuse
