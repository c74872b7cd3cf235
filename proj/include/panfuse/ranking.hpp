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

#ifndef PANFUSE_RANKING_HPP_
#define PANFUSE_RANKING_HPP_

// Spatial ranking model: instance predictions are rasterised into a one-hot
// C x H x W tensor (one channel per thing category), a large-kernel
// convolution maps it to a score map, and the per-pixel softmax over channels
// is averaged inside each instance mask to give its ranking score.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "panfuse/errors.hpp"
#include "panfuse/format.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

template <typename Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Channel-major stack of planes, all of one size.
template <typename Scalar>
using Tensor3 = std::vector<Plane<Scalar>>;

template <typename Scalar>
Tensor3<Scalar> zeros_like(const Tensor3<Scalar>& t) {
  Tensor3<Scalar> out;
  out.reserve(t.size());
  for (const auto& p : t) out.push_back(Plane<Scalar>::Zero(p.rows(), p.cols()));
  return out;
}

template <typename Scalar>
Tensor3<Scalar> zeros_tensor(Index channels, Index height, Index width) {
  return Tensor3<Scalar>(static_cast<std::size_t>(channels), Plane<Scalar>::Zero(height, width));
}

// Sorted thing category ids; channel k carries categories()[k].
class ThingChannels {
 public:
  ThingChannels() = default;
  explicit ThingChannels(std::vector<CategoryId> categories);

  static ThingChannels identity(Index count);
  static ThingChannels from_table(const CategoryTable& table);

  Index size() const { return static_cast<Index>(categories_.size()); }
  // -1 when the category has no channel.
  Index channel_of(CategoryId category) const;
  CategoryId category_of(Index channel) const { return categories_.at(static_cast<std::size_t>(channel)); }
  const std::vector<CategoryId>& categories() const { return categories_; }

 private:
  std::vector<CategoryId> categories_;
};

template <typename Scalar>
struct InstanceInput {
  Tensor3<Scalar> tensor;
  // Pixels covered by two or more instance masks, whatever their categories.
  BinaryMask conflict;
};

template <typename Scalar = double>
InstanceInput<Scalar> build_instance_tensor(std::span<const InstancePrediction> instances,
                                            const ThingChannels& channels, Index height,
                                            Index width) {
  InstanceInput<Scalar> out{zeros_tensor<Scalar>(channels.size(), height, width),
                            BinaryMask(height, width)};
  Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cover =
      Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Zero(height, width);
  for (const InstancePrediction& inst : instances) {
    const Index ch = channels.channel_of(inst.category);
    if (ch < 0) {
      throw InvalidInputError("build_instance_tensor: category " + std::to_string(inst.category) +
                              " has no channel");
    }
    if (inst.mask.height() != height || inst.mask.width() != width) {
      throw InvalidInputError("build_instance_tensor: mask size mismatch");
    }
    Plane<Scalar>& plane = out.tensor[static_cast<std::size_t>(ch)];
    plane = inst.mask.bits().select(Plane<Scalar>::Ones(height, width), plane);
    cover += inst.mask.bits().template cast<std::int32_t>();
  }
  out.conflict = BinaryMask(BoolGrid(cover >= 2));
  return out;
}

template <typename Scalar = double>
InstanceInput<Scalar> build_instance_tensor(std::span<const InstancePrediction> instances,
                                            Index channels, Index height, Index width) {
  return build_instance_tensor<Scalar>(instances, ThingChannels::identity(channels), height, width);
}

enum class ConvShape : std::uint32_t { k1x1 = 0, k3x3 = 1, k1x7_7x1 = 2 };

const char* to_string(ConvShape shape);
ConvShape parse_conv_shape(const std::string& text);

// One convolution without bias. kernels[out * channels + in] is kh x kw.
template <typename Scalar>
struct ConvStage {
  Index kernel_height = 1;
  Index kernel_width = 1;
  Index channels = 0;
  std::vector<Plane<Scalar>> kernels;

  const Plane<Scalar>& kernel(Index out, Index in) const {
    return kernels[static_cast<std::size_t>(out * channels + in)];
  }
  Plane<Scalar>& kernel(Index out, Index in) {
    return kernels[static_cast<std::size_t>(out * channels + in)];
  }

  static ConvStage zeros(Index channels, Index kh, Index kw) {
    ConvStage s;
    s.kernel_height = kh;
    s.kernel_width = kw;
    s.channels = channels;
    s.kernels.assign(static_cast<std::size_t>(channels * channels), Plane<Scalar>::Zero(kh, kw));
    return s;
  }
};

// C -> C convolution with "same" zero padding. The separable shape chains a
// 1x7 stage into a 7x1 stage; the bias is added once, after the last stage.
template <typename Scalar>
struct ConvSpec {
  ConvShape shape = ConvShape::k1x1;
  Index channels = 0;
  std::vector<ConvStage<Scalar>> stages;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;

  static ConvSpec zeros(ConvShape shape, Index channels) {
    ConvSpec spec;
    spec.shape = shape;
    spec.channels = channels;
    switch (shape) {
      case ConvShape::k1x1:
        spec.stages.push_back(ConvStage<Scalar>::zeros(channels, 1, 1));
        break;
      case ConvShape::k3x3:
        spec.stages.push_back(ConvStage<Scalar>::zeros(channels, 3, 3));
        break;
      case ConvShape::k1x7_7x1:
        spec.stages.push_back(ConvStage<Scalar>::zeros(channels, 1, 7));
        spec.stages.push_back(ConvStage<Scalar>::zeros(channels, 7, 1));
        break;
    }
    spec.bias = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(channels);
    return spec;
  }

  static ConvSpec identity(Index channels) {
    ConvSpec spec = zeros(ConvShape::k1x1, channels);
    for (Index c = 0; c < channels; ++c) spec.stages[0].kernel(c, c)(0, 0) = Scalar(1);
    return spec;
  }

  // Kernel coefficients uniform in +-1/sqrt(fan_in), bias zero.
  static ConvSpec random(ConvShape shape, Index channels, std::uint64_t seed) {
    ConvSpec spec = zeros(shape, channels);
    std::mt19937_64 rng(seed);
    for (auto& stage : spec.stages) {
      const double bound =
          1.0 / std::sqrt(static_cast<double>(channels * stage.kernel_height * stage.kernel_width));
      for (auto& k : stage.kernels) {
        for (Index i = 0; i < k.size(); ++i) {
          const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          k.data()[i] = static_cast<Scalar>((2.0 * unit - 1.0) * bound);
        }
      }
    }
    return spec;
  }

  Index parameter_count() const {
    Index n = bias.size();
    for (const auto& s : stages) n += s.channels * s.channels * s.kernel_height * s.kernel_width;
    return n;
  }

  friend bool operator==(const ConvSpec& a, const ConvSpec& b) {
    if (a.shape != b.shape || a.channels != b.channels || a.stages.size() != b.stages.size() ||
        a.bias != b.bias) {
      return false;
    }
    for (std::size_t s = 0; s < a.stages.size(); ++s) {
      if (a.stages[s].kernels != b.stages[s].kernels) return false;
    }
    return true;
  }
};

namespace detail {

// Overlap of the output window with an input shifted by `offset` along an
// axis of length n: output [begin, begin + len) reads input [begin + offset, ...).
struct Span1 {
  Index begin;
  Index len;
};

inline Span1 valid_span(Index n, Index offset) {
  const Index begin = std::max<Index>(0, -offset);
  const Index end = std::min<Index>(n, n - offset);
  return {begin, std::max<Index>(0, end - begin)};
}

}  // namespace detail

template <typename Scalar>
Tensor3<Scalar> conv_stage_forward(const Tensor3<Scalar>& input, const ConvStage<Scalar>& stage) {
  const Index h = input.front().rows();
  const Index w = input.front().cols();
  const Index ph = stage.kernel_height / 2;
  const Index pw = stage.kernel_width / 2;
  Tensor3<Scalar> out = zeros_like(input);
  for (Index o = 0; o < stage.channels; ++o) {
    for (Index i = 0; i < stage.channels; ++i) {
      const Plane<Scalar>& k = stage.kernel(o, i);
      for (Index u = 0; u < stage.kernel_height; ++u) {
        const detail::Span1 rows = detail::valid_span(h, u - ph);
        for (Index v = 0; v < stage.kernel_width; ++v) {
          const Scalar coeff = k(u, v);
          if (coeff == Scalar(0)) continue;
          const detail::Span1 cols = detail::valid_span(w, v - pw);
          out[o].block(rows.begin, cols.begin, rows.len, cols.len) +=
              coeff * input[i].block(rows.begin + u - ph, cols.begin + v - pw, rows.len, cols.len);
        }
      }
    }
  }
  return out;
}

// Adjoint of conv_stage_forward: accumulates d/dkernel into `kernel_grad` and
// returns d/dinput.
template <typename Scalar>
Tensor3<Scalar> conv_stage_backward(const Tensor3<Scalar>& input, const ConvStage<Scalar>& stage,
                                    const Tensor3<Scalar>& upstream, ConvStage<Scalar>& kernel_grad) {
  const Index h = input.front().rows();
  const Index w = input.front().cols();
  const Index ph = stage.kernel_height / 2;
  const Index pw = stage.kernel_width / 2;
  Tensor3<Scalar> grad_in = zeros_like(input);
  for (Index o = 0; o < stage.channels; ++o) {
    for (Index i = 0; i < stage.channels; ++i) {
      const Plane<Scalar>& k = stage.kernel(o, i);
      Plane<Scalar>& gk = kernel_grad.kernel(o, i);
      for (Index u = 0; u < stage.kernel_height; ++u) {
        const detail::Span1 rows = detail::valid_span(h, u - ph);
        for (Index v = 0; v < stage.kernel_width; ++v) {
          const detail::Span1 cols = detail::valid_span(w, v - pw);
          const auto g = upstream[o].block(rows.begin, cols.begin, rows.len, cols.len);
          auto x = input[i].block(rows.begin + u - ph, cols.begin + v - pw, rows.len, cols.len);
          gk(u, v) += g.cwiseProduct(x).sum();
          grad_in[i].block(rows.begin + u - ph, cols.begin + v - pw, rows.len, cols.len) += k(u, v) * g;
        }
      }
    }
  }
  return grad_in;
}

template <typename Scalar>
Tensor3<Scalar> conv_forward(const Tensor3<Scalar>& input, const ConvSpec<Scalar>& spec) {
  if (static_cast<Index>(input.size()) != spec.channels || input.empty()) {
    throw InvalidInputError("conv_forward: channel count mismatch");
  }
  Tensor3<Scalar> x = input;
  for (const auto& stage : spec.stages) x = conv_stage_forward(x, stage);
  for (Index c = 0; c < spec.channels; ++c) x[c].array() += spec.bias(c);
  return x;
}

template <typename Scalar>
struct ConvGradients {
  std::vector<ConvStage<Scalar>> stages;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bias;
  Tensor3<Scalar> input;
};

// Gradients of <upstream, conv_forward(input, spec)> with respect to kernels,
// bias and input. Intermediate activations of chained stages are recomputed.
template <typename Scalar>
ConvGradients<Scalar> conv_backward(const Tensor3<Scalar>& input, const ConvSpec<Scalar>& spec,
                                    const Tensor3<Scalar>& upstream) {
  std::vector<Tensor3<Scalar>> activations{input};
  for (std::size_t s = 0; s + 1 < spec.stages.size(); ++s) {
    activations.push_back(conv_stage_forward(activations.back(), spec.stages[s]));
  }
  ConvGradients<Scalar> grads;
  grads.bias.resize(spec.channels);
  for (Index c = 0; c < spec.channels; ++c) grads.bias(c) = upstream[c].sum();
  for (const auto& stage : spec.stages) {
    grads.stages.push_back(ConvStage<Scalar>::zeros(stage.channels, stage.kernel_height, stage.kernel_width));
  }
  Tensor3<Scalar> g = upstream;
  for (std::size_t s = spec.stages.size(); s-- > 0;) {
    g = conv_stage_backward(activations[s], spec.stages[s], g, grads.stages[s]);
  }
  grads.input = std::move(g);
  return grads;
}

// Per-pixel softmax across channels, shifted by the channel maximum.
template <typename Scalar>
Tensor3<Scalar> softmax_channels(const Tensor3<Scalar>& logits) {
  Plane<Scalar> peak = logits.front();
  for (const auto& l : logits) peak = peak.cwiseMax(l);
  Tensor3<Scalar> out;
  out.reserve(logits.size());
  Plane<Scalar> total = Plane<Scalar>::Zero(peak.rows(), peak.cols());
  for (const auto& l : logits) {
    out.push_back((l - peak).array().exp().matrix());
    total += out.back();
  }
  for (auto& p : out) p = p.cwiseQuotient(total);
  return out;
}

// Vector-Jacobian product of softmax_channels.
template <typename Scalar>
Tensor3<Scalar> softmax_backward(const Tensor3<Scalar>& probs, const Tensor3<Scalar>& grad_probs) {
  Plane<Scalar> dot = Plane<Scalar>::Zero(probs.front().rows(), probs.front().cols());
  for (std::size_t c = 0; c < probs.size(); ++c) dot += probs[c].cwiseProduct(grad_probs[c]);
  Tensor3<Scalar> out;
  out.reserve(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    out.push_back(probs[c].cwiseProduct(grad_probs[c] - dot));
  }
  return out;
}

template <typename Scalar>
struct ScoreMap {
  Tensor3<Scalar> logits;
  Tensor3<Scalar> probs;

  Index channels() const { return static_cast<Index>(logits.size()); }
  Index height() const { return logits.empty() ? 0 : logits.front().rows(); }
  Index width() const { return logits.empty() ? 0 : logits.front().cols(); }
};

template <typename Scalar>
ScoreMap<Scalar> forward(const Tensor3<Scalar>& input, const ConvSpec<Scalar>& spec) {
  ScoreMap<Scalar> out;
  out.logits = conv_forward(input, spec);
  out.probs = softmax_channels(out.logits);
  return out;
}

template <typename Scalar>
struct LossResult {
  Scalar loss = Scalar(0);
  Tensor3<Scalar> grad_logits;
  Index supervised = 0;
};

// Mean cross entropy over supervised pixels; `labels` holds channel indices.
// The gradient is (probs - onehot) / n on supervised pixels and zero elsewhere.
template <typename Scalar>
LossResult<Scalar> srm_loss(const ScoreMap<Scalar>& scores, const LabelMap& labels,
                            const BinaryMask& supervised) {
  const Index h = scores.height();
  const Index w = scores.width();
  if (labels.height() != h || labels.width() != w || supervised.height() != h ||
      supervised.width() != w) {
    throw InvalidInputError("srm_loss: label or mask size mismatch");
  }
  LossResult<Scalar> out;
  out.grad_logits = zeros_like(scores.logits);
  out.supervised = supervised.area();
  if (out.supervised == 0) return out;

  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(out.supervised);
  const Index channels = scores.channels();
  Scalar total = Scalar(0);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      if (!supervised(r, c)) continue;
      const SegmentId label = labels(r, c);
      if (label < 0 || label >= channels) {
        throw InvalidInputError("srm_loss: label " + std::to_string(label) + " out of channel range");
      }
      Scalar peak = scores.logits[0](r, c);
      for (Index k = 1; k < channels; ++k) peak = std::max(peak, scores.logits[k](r, c));
      Scalar sum = Scalar(0);
      for (Index k = 0; k < channels; ++k) sum += std::exp(scores.logits[k](r, c) - peak);
      total -= scores.logits[label](r, c) - peak - std::log(sum);
      for (Index k = 0; k < channels; ++k) {
        out.grad_logits[k](r, c) = (scores.probs[k](r, c) - (k == label ? Scalar(1) : Scalar(0))) * inv_n;
      }
    }
  }
  out.loss = total * inv_n;
  return out;
}

// Mean of probs[channel of inst.category] over the instance mask.
template <typename Scalar>
Scalar instance_score(const ScoreMap<Scalar>& scores, const InstancePrediction& inst,
                      const ThingChannels& channels) {
  if (inst.mask.empty()) throw ContractError("instance_score: empty mask");
  const Index ch = channels.channel_of(inst.category);
  if (ch < 0 || ch >= scores.channels()) {
    throw InvalidInputError("instance_score: category " + std::to_string(inst.category) +
                            " has no channel");
  }
  if (inst.mask.height() != scores.height() || inst.mask.width() != scores.width()) {
    throw InvalidInputError("instance_score: mask size mismatch");
  }
  const Plane<Scalar>& p = scores.probs[static_cast<std::size_t>(ch)];
  const Scalar inside = inst.mask.bits().select(p.array(), Scalar(0)).sum();
  return inside / static_cast<Scalar>(inst.mask.area());
}

// Forward pass plus instance_score for every instance.
std::vector<RankedInstance> rank_instances(std::span<const InstancePrediction> instances,
                                           const ConvSpec<double>& spec,
                                           const ThingChannels& channels);

// A training example: instance tensor, channel labels taken from the
// non-overlapping ground truth, and the supervised set (conflicting pixels
// whose ground-truth segment is a thing category with a channel).
struct SrmSample {
  Tensor3<double> input;
  LabelMap labels;
  BinaryMask supervised;
};

SrmSample make_srm_sample(const PanopticImage& gt, std::span<const InstancePrediction> instances,
                          const ThingChannels& channels);

// Flat parameter layout: stage kernels in order ([out][in][kh][kw]), then bias.
Eigen::VectorXd flatten_parameters(const ConvSpec<double>& spec);
void assign_parameters(ConvSpec<double>& spec, const Eigen::VectorXd& values);
Eigen::VectorXd flatten_gradients(const ConvGradients<double>& grads);
// 1 for kernel coefficients, 0 for biases.
Eigen::VectorXd weight_decay_mask(const ConvSpec<double>& spec);

// Binary weight record, little-endian: "SRMW", u32 version (1), u32 shape tag,
// u32 C, f64 kernel coefficients in flat parameter order, f64 bias[C].
void save_weights(std::ostream& out, const ConvSpec<double>& spec);
ConvSpec<double> load_weights(std::istream& in);
void save_weights(const std::filesystem::path& path, const ConvSpec<double>& spec);
ConvSpec<double> load_weights(const std::filesystem::path& path);

}  // namespace panfuse

#endif  // PANFUSE_RANKING_HPP_
