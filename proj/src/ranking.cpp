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

#include "panfuse/ranking.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "binary_io.hpp"

namespace panfuse {

namespace {

constexpr char kWeightsMagic[4] = {'S', 'R', 'M', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

}  // namespace

ThingChannels::ThingChannels(std::vector<CategoryId> categories) : categories_(std::move(categories)) {
  std::sort(categories_.begin(), categories_.end());
  categories_.erase(std::unique(categories_.begin(), categories_.end()), categories_.end());
}

ThingChannels ThingChannels::identity(Index count) {
  std::vector<CategoryId> ids(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) ids[static_cast<std::size_t>(i)] = static_cast<CategoryId>(i);
  return ThingChannels(std::move(ids));
}

ThingChannels ThingChannels::from_table(const CategoryTable& table) {
  std::vector<CategoryId> ids;
  for (const auto& [id, cat] : table) {
    if (cat.is_thing) ids.push_back(id);
  }
  return ThingChannels(std::move(ids));
}

Index ThingChannels::channel_of(CategoryId category) const {
  auto it = std::lower_bound(categories_.begin(), categories_.end(), category);
  if (it == categories_.end() || *it != category) return -1;
  return static_cast<Index>(it - categories_.begin());
}

const char* to_string(ConvShape shape) {
  switch (shape) {
    case ConvShape::k1x1:
      return "1x1";
    case ConvShape::k3x3:
      return "3x3";
    case ConvShape::k1x7_7x1:
      return "1x7+7x1";
  }
  return "?";
}

ConvShape parse_conv_shape(const std::string& text) {
  if (text == "1x1") return ConvShape::k1x1;
  if (text == "3x3") return ConvShape::k3x3;
  if (text == "1x7+7x1" || text == "separable") return ConvShape::k1x7_7x1;
  throw InvalidInputError("unknown convolution shape '" + text + "' (expected 1x1, 3x3 or 1x7+7x1)");
}

std::vector<RankedInstance> rank_instances(std::span<const InstancePrediction> instances,
                                           const ConvSpec<double>& spec,
                                           const ThingChannels& channels) {
  std::vector<RankedInstance> out;
  if (instances.empty()) return out;
  if (channels.size() != spec.channels) {
    throw InvalidInputError("rank_instances: model has " + std::to_string(spec.channels) +
                            " channels but " + std::to_string(channels.size()) +
                            " thing categories were given");
  }
  const Index h = instances.front().mask.height();
  const Index w = instances.front().mask.width();
  const InstanceInput<double> input = build_instance_tensor<double>(instances, channels, h, w);
  const ScoreMap<double> scores = forward(input.tensor, spec);
  out.reserve(instances.size());
  for (const InstancePrediction& inst : instances) {
    out.push_back(RankedInstance{inst, instance_score(scores, inst, channels)});
  }
  return out;
}

SrmSample make_srm_sample(const PanopticImage& gt, std::span<const InstancePrediction> instances,
                          const ThingChannels& channels) {
  const Index h = gt.height();
  const Index w = gt.width();
  InstanceInput<double> input = build_instance_tensor<double>(instances, channels, h, w);

  std::unordered_map<SegmentId, Index> channel_of_segment;
  for (const SegmentInfo& s : gt.segments) {
    channel_of_segment[s.id] = s.is_thing ? channels.channel_of(s.category) : -1;
  }
  SrmSample sample{std::move(input.tensor), LabelMap(h, w, -1), BinaryMask(h, w)};
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      auto it = channel_of_segment.find(gt.labels(r, c));
      const Index ch = it == channel_of_segment.end() ? -1 : it->second;
      sample.labels(r, c) = static_cast<SegmentId>(ch);
      sample.supervised.set(r, c, ch >= 0 && input.conflict(r, c));
    }
  }
  return sample;
}

Eigen::VectorXd flatten_parameters(const ConvSpec<double>& spec) {
  Eigen::VectorXd out(spec.parameter_count());
  Index k = 0;
  for (const auto& stage : spec.stages) {
    for (const auto& kernel : stage.kernels) {
      out.segment(k, kernel.size()) = Eigen::Map<const Eigen::VectorXd>(kernel.data(), kernel.size());
      k += kernel.size();
    }
  }
  out.segment(k, spec.bias.size()) = spec.bias;
  return out;
}

void assign_parameters(ConvSpec<double>& spec, const Eigen::VectorXd& values) {
  if (values.size() != spec.parameter_count()) {
    throw InvalidInputError("assign_parameters: wrong parameter count");
  }
  Index k = 0;
  for (auto& stage : spec.stages) {
    for (auto& kernel : stage.kernels) {
      Eigen::Map<Eigen::VectorXd>(kernel.data(), kernel.size()) = values.segment(k, kernel.size());
      k += kernel.size();
    }
  }
  spec.bias = values.segment(k, spec.bias.size());
}

Eigen::VectorXd flatten_gradients(const ConvGradients<double>& grads) {
  Index n = grads.bias.size();
  for (const auto& stage : grads.stages) {
    for (const auto& kernel : stage.kernels) n += kernel.size();
  }
  Eigen::VectorXd out(n);
  Index k = 0;
  for (const auto& stage : grads.stages) {
    for (const auto& kernel : stage.kernels) {
      out.segment(k, kernel.size()) = Eigen::Map<const Eigen::VectorXd>(kernel.data(), kernel.size());
      k += kernel.size();
    }
  }
  out.segment(k, grads.bias.size()) = grads.bias;
  return out;
}

Eigen::VectorXd weight_decay_mask(const ConvSpec<double>& spec) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(spec.parameter_count());
  mask.tail(spec.bias.size()).setZero();
  return mask;
}

void save_weights(std::ostream& out, const ConvSpec<double>& spec) {
  out.write(kWeightsMagic, sizeof(kWeightsMagic));
  detail::put_le<std::uint32_t>(out, kWeightsVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.shape));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.channels));
  const Eigen::VectorXd values = flatten_parameters(spec);
  for (Index i = 0; i < values.size(); ++i) detail::put_le<double>(out, values(i));
  if (!out) throw IoError("failed writing weight record");
}

ConvSpec<double> load_weights(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kWeightsMagic)) {
    throw SchemaError("not a spatial ranking weight record");
  }
  const auto version = detail::get_le<std::uint32_t>(in, "version");
  if (version != kWeightsVersion) {
    throw SchemaError("unsupported weight record version " + std::to_string(version));
  }
  const auto tag = detail::get_le<std::uint32_t>(in, "shape tag");
  if (tag > static_cast<std::uint32_t>(ConvShape::k1x7_7x1)) {
    throw SchemaError("unknown convolution shape tag " + std::to_string(tag));
  }
  const auto channels = detail::get_le<std::uint32_t>(in, "channel count");
  if (channels == 0 || channels > 4096) {
    throw SchemaError("implausible channel count " + std::to_string(channels));
  }
  ConvSpec<double> spec = ConvSpec<double>::zeros(static_cast<ConvShape>(tag), channels);
  Eigen::VectorXd values(spec.parameter_count());
  for (Index i = 0; i < values.size(); ++i) values(i) = detail::get_le<double>(in, "coefficients");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw SchemaError("trailing bytes after weight record");
  }
  assign_parameters(spec, values);
  return spec;
}

void save_weights(const std::filesystem::path& path, const ConvSpec<double>& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_weights(out, spec);
}

ConvSpec<double> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_weights(in);
}

}  // namespace panfuse
