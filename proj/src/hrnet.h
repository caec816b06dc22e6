/*
 * Copyright 2026 The EmoHRNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef EMOHRNET_SRC_HRNET_H_
#define EMOHRNET_SRC_HRNET_H_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rng.h"
#include "tensor.h"

namespace emohrnet {

struct HRNetConfig {
  std::size_t in_frames = 300;
  std::size_t in_mels = 64;
  std::size_t stem_channels = 16;
  std::size_t n_stages = 3;
  std::vector<std::size_t> branch_channels = {16, 32, 64};
  std::size_t blocks_per_branch = 1;
  std::size_t n_classes = 8;
  std::size_t fuse_channels = 64;

  void validate() const;
  // Branches alive during stage `stage` (0-based).
  std::size_t branches_at(std::size_t stage) const;
  bool operator==(const HRNetConfig&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ParamInfo {
  std::string name;
  Shape shape;
};

struct ConvRef {
  std::size_t weight = 0;
  std::size_t bias = 0;
  ConvSpec spec;
};

struct ResidualBlock {
  ConvRef first;
  ConvRef second;
};

// Transform from input branch i to output branch j inside an exchange unit.
// Empty `convs` is the identity (i == j). For i < j the convs are a chain of
// stride-2 3x3 convolutions with ReLU between them; for i > j a single 1x1
// projection followed by nearest upsampling by `upsample`.
struct ExchangePath {
  std::vector<ConvRef> convs;
  std::size_t upsample = 1;
};

struct StageLayout {
  std::size_t n_branches = 1;
  std::optional<ConvRef> new_branch;
  std::vector<std::vector<ResidualBlock>> blocks;    // [branch][block]
  std::vector<std::vector<ExchangePath>> exchange;   // [to][from]
};

struct ModelLayout {
  ConvRef stem;
  std::optional<ConvRef> stem_transition;  // stem -> branch 0 channels
  std::vector<StageLayout> stages;
  std::vector<ConvRef> fuse;               // per branch, 1x1 to fuse_channels
  std::size_t head_weight = 0;
  std::size_t head_bias = 0;
};

class HRNetModel {
 public:
  // He-normal weights (std = sqrt(2 / fan_in)), zero biases, drawn in
  // manifest order.
  static HRNetModel build(const HRNetConfig& config, Rng& rng);

  const HRNetConfig& config() const { return config_; }
  const ModelLayout& layout() const { return layout_; }

  std::vector<NamedTensor>& parameters() { return params_; }
  const std::vector<NamedTensor>& parameters() const { return params_; }
  Tensor& parameter(std::string_view name);
  const Tensor& parameter(std::string_view name) const;

  std::vector<ParamInfo> manifest() const;
  std::size_t param_count() const;
  void clear_grads();

 private:
  std::size_t add(std::string name, Shape shape, std::size_t fan_in, Rng& rng);
  ConvRef add_conv(const std::string& prefix, std::size_t in, std::size_t out,
                   std::size_t k, ConvSpec spec, Rng& rng);

  HRNetConfig config_;
  ModelLayout layout_;
  std::vector<NamedTensor> params_;
};

// Spatial size of resolution branch `r` for an input extent (stride-2 convs
// with padding 1 produce ceil(extent / 2^r)).
std::size_t branch_extent(std::size_t extent, std::size_t r);

// Binds model parameters into a graph on first use.
class ModelBinding {
 public:
  ModelBinding(Graph& graph, HRNetModel& model);

  Graph& graph() { return graph_; }
  HRNetModel& model() { return model_; }
  Var param(std::size_t index);
  Var conv(const ConvRef& ref, Var x);

 private:
  Graph& graph_;
  HRNetModel& model_;
  std::vector<std::optional<Var>> vars_;
};

using BranchSet = std::vector<Var>;

Var hrim_forward(ModelBinding& b, Var mel);
Var residual_block(ModelBinding& b, const ResidualBlock& block, Var x);
BranchSet exchange_fuse(ModelBinding& b, const StageLayout& stage,
                        const BranchSet& branches);
Var fuse_layer(ModelBinding& b, const BranchSet& branches);
Var head(ModelBinding& b, Var features);

struct ForwardTrace {
  Var stem;
  BranchSet branches;  // after the last stage
  Var fused;
  Var probs;
};

ForwardTrace forward_trace(ModelBinding& b, Var mel);
// Class probabilities N x n_classes.
Var forward(ModelBinding& b, Var mel);

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_HRNET_H_
