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

#ifndef PANFUSE_TRAINING_HPP_
#define PANFUSE_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "panfuse/ranking.hpp"

namespace panfuse {

struct DecayPoint {
  std::int64_t iteration = 0;
  double lr = 0.0;

  friend bool operator==(const DecayPoint&, const DecayPoint&) = default;
};

// Defaults are the desk-scale schedule: the 100k-iteration policy compressed
// 50x (warmup 40, decays at 1200 and 1600, 2000 total). full() returns the
// full-length schedule.
struct TrainConfig {
  double base_lr = 0.02;
  double warmup_start_lr = 0.002;
  std::int64_t warmup_iters = 40;
  std::vector<DecayPoint> decay_points{{1200, 0.002}, {1600, 0.0002}};
  std::int64_t total_iters = 2000;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  double lambda_stuff = 0.25;
  std::uint64_t seed = 0;
  ConvShape shape = ConvShape::k1x7_7x1;

  static TrainConfig full();
  static TrainConfig desk() { return TrainConfig{}; }

  // Throws InvalidInputError on a malformed schedule.
  void validate() const;
};

// Linear warmup from warmup_start_lr to base_lr over [0, warmup_iters), then
// base_lr, replaced by each decay point's lr from its iteration on.
double lr_at(std::int64_t iteration, const TrainConfig& cfg);

struct InstanceLosses {
  double rpn_cls = 0.0;
  double rpn_bbox = 0.0;
  double cls = 0.0;
  double bbox = 0.0;
  double mask = 0.0;

  double sum() const { return rpn_cls + rpn_bbox + cls + bbox + mask; }
};

struct LossBreakdown {
  InstanceLosses instance_losses;
  double stuff_loss = 0.0;
  double srm_loss = 0.0;
  double total = 0.0;
};

// total = sum(instance losses) + lambda * stuff + srm. The instance-branch
// terms are supplied by the caller. Throws DivergenceError on non-finite parts.
LossBreakdown combine_losses(const InstanceLosses& instance_losses, double stuff_loss,
                             double srm_loss, double lambda);

struct SgdState {
  Eigen::VectorXd velocity;
};

// v <- momentum v + g + weight_decay * mask * w;  w <- w - lr v.
// `decay_mask` is 1 on kernel coefficients and 0 on biases.
void sgd_step(Eigen::VectorXd& weights, const Eigen::VectorXd& grads, SgdState& state,
              const Eigen::VectorXd& decay_mask, double lr, const TrainConfig& cfg,
              std::int64_t iteration = 0);

struct LossPoint {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  ConvSpec<double> weights;
  std::vector<LossPoint> curve;
  double initial_mean_loss = 0.0;
  double final_mean_loss = 0.0;
  std::size_t used_samples = 0;
};

// Mean srm_loss over samples with at least one supervised pixel.
double mean_srm_loss(std::span<const SrmSample> samples, const ConvSpec<double>& spec);

// Full-image SGD over the samples in order, one sample per iteration. Samples
// without supervised pixels are skipped with a warning; if none remain the
// weights are returned untouched with a flat zero loss curve.
TrainResult train_srm(std::span<const SrmSample> samples, const TrainConfig& cfg,
                      const std::function<void(const std::string&)>& warn = {});

// "iteration,lr,loss" header plus one row per point.
std::string loss_curve_csv(std::span<const LossPoint> curve);

}  // namespace panfuse

#endif  // PANFUSE_TRAINING_HPP_
