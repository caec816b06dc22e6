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

#include "hrnet.h"

#include <cmath>

#include "error.h"

namespace emohrnet {

void HRNetConfig::validate() const {
  require(in_frames >= 1 && in_mels >= 1, "model input dims must be positive");
  require(stem_channels >= 1, "model.stem_channels must be positive");
  require(n_stages >= 1, "model.n_stages must be at least 1");
  require(!branch_channels.empty(), "model.branch_channels must not be empty");
  require(branch_channels.size() <= n_stages,
          "model.branch_channels has more entries than stages can create");
  for (std::size_t r = 0; r < branch_channels.size(); ++r) {
    require(branch_channels[r] >= 1, "model.branch_channels must be positive");
    require(r == 0 || branch_channels[r] >= branch_channels[r - 1],
            "model.branch_channels must be non-decreasing");
  }
  require(n_classes >= 2, "model.n_classes must be at least 2");
  require(fuse_channels >= 1, "model.fuse_channels must be positive");
  for (std::size_t r = 0; r < branch_channels.size(); ++r) {
    if ((in_mels >> r) == 0 || (in_frames >> r) == 0) {
      fail(ErrorKind::kInvalidArgument,
           "branch " + std::to_string(r) + " spatial dims reach 0 for input " +
               std::to_string(in_mels) + "x" + std::to_string(in_frames));
    }
  }
}

std::size_t HRNetConfig::branches_at(std::size_t stage) const {
  return std::min(stage + 1, branch_channels.size());
}

std::size_t branch_extent(std::size_t extent, std::size_t r) {
  for (std::size_t i = 0; i < r; ++i) extent = (extent + 1) / 2;
  return extent;
}

std::size_t HRNetModel::add(std::string name, Shape shape, std::size_t fan_in,
                            Rng& rng) {
  Tensor t(std::move(shape));
  if (fan_in > 0) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.normal() * std_dev;
  }
  t.set_requires_grad(true);
  params_.push_back({std::move(name), std::move(t)});
  return params_.size() - 1;
}

ConvRef HRNetModel::add_conv(const std::string& prefix, std::size_t in,
                             std::size_t out, std::size_t k, ConvSpec spec,
                             Rng& rng) {
  ConvRef ref;
  ref.weight = add(prefix + ".weight", {out, in, k, k}, in * k * k, rng);
  ref.bias = add(prefix + ".bias", {out}, 0, rng);
  ref.spec = spec;
  return ref;
}

HRNetModel HRNetModel::build(const HRNetConfig& config, Rng& rng) {
  config.validate();
  HRNetModel m;
  m.config_ = config;
  const auto& ch = config.branch_channels;
  constexpr ConvSpec kSame{1, 1};
  constexpr ConvSpec kDown{2, 1};
  constexpr ConvSpec kPointwise{1, 0};

  m.layout_.stem = m.add_conv("stem", 1, config.stem_channels, 3, kSame, rng);
  if (config.stem_channels != ch[0]) {
    m.layout_.stem_transition =
        m.add_conv("stem.transition", config.stem_channels, ch[0], 1, kPointwise, rng);
  }
  for (std::size_t s = 0; s < config.n_stages; ++s) {
    StageLayout stage;
    stage.n_branches = config.branches_at(s);
    const std::string sp = "stage" + std::to_string(s + 1);
    if (s > 0 && stage.n_branches > config.branches_at(s - 1)) {
      const std::size_t nb = stage.n_branches - 1;
      stage.new_branch = m.add_conv(sp + ".transition", ch[nb - 1], ch[nb], 3, kDown, rng);
    }
    stage.blocks.resize(stage.n_branches);
    for (std::size_t r = 0; r < stage.n_branches; ++r) {
      for (std::size_t k = 0; k < config.blocks_per_branch; ++k) {
        const std::string bp =
            sp + ".branch" + std::to_string(r) + ".block" + std::to_string(k);
        ResidualBlock block;
        block.first = m.add_conv(bp + ".conv1", ch[r], ch[r], 3, kSame, rng);
        block.second = m.add_conv(bp + ".conv2", ch[r], ch[r], 3, kSame, rng);
        stage.blocks[r].push_back(block);
      }
    }
    stage.exchange.assign(stage.n_branches, std::vector<ExchangePath>(stage.n_branches));
    for (std::size_t j = 0; j < stage.n_branches; ++j) {
      for (std::size_t i = 0; i < stage.n_branches; ++i) {
        if (i == j) continue;
        const std::string ep = sp + ".exchange.to" + std::to_string(j) + ".from" +
                               std::to_string(i);
        ExchangePath& path = stage.exchange[j][i];
        if (i < j) {
          for (std::size_t k = 0; k < j - i; ++k) {
            const std::size_t out = (k + 1 == j - i) ? ch[j] : ch[i];
            path.convs.push_back(
                m.add_conv(ep + ".conv" + std::to_string(k), ch[i], out, 3, kDown, rng));
          }
        } else {
          path.convs.push_back(m.add_conv(ep + ".conv0", ch[i], ch[j], 1, kPointwise, rng));
          path.upsample = std::size_t{1} << (i - j);
        }
      }
    }
    m.layout_.stages.push_back(std::move(stage));
  }
  const std::size_t final_branches = config.branches_at(config.n_stages - 1);
  for (std::size_t r = 0; r < final_branches; ++r) {
    m.layout_.fuse.push_back(m.add_conv("fuse.branch" + std::to_string(r), ch[r],
                                        config.fuse_channels, 1, kPointwise, rng));
  }
  m.layout_.head_weight = m.add("head.weight", {config.n_classes, config.fuse_channels},
                                config.fuse_channels, rng);
  m.layout_.head_bias = m.add("head.bias", {config.n_classes}, 0, rng);
  return m;
}

Tensor& HRNetModel::parameter(std::string_view name) {
  for (NamedTensor& p : params_) {
    if (p.name == name) return p.tensor;
  }
  fail(ErrorKind::kNotFound, "no parameter named " + std::string(name));
}

const Tensor& HRNetModel::parameter(std::string_view name) const {
  return const_cast<HRNetModel*>(this)->parameter(name);
}

std::vector<ParamInfo> HRNetModel::manifest() const {
  std::vector<ParamInfo> out;
  out.reserve(params_.size());
  for (const NamedTensor& p : params_) out.push_back({p.name, p.tensor.shape()});
  return out;
}

std::size_t HRNetModel::param_count() const {
  std::size_t total = 0;
  for (const NamedTensor& p : params_) total += p.tensor.numel();
  return total;
}

void HRNetModel::clear_grads() {
  for (NamedTensor& p : params_) p.tensor.clear_grad();
}

ModelBinding::ModelBinding(Graph& graph, HRNetModel& model)
    : graph_(graph), model_(model), vars_(model.parameters().size()) {}

Var ModelBinding::param(std::size_t index) {
  std::optional<Var>& v = vars_.at(index);
  if (!v) v = graph_.param(model_.parameters()[index].tensor);
  return *v;
}

Var ModelBinding::conv(const ConvRef& ref, Var x) {
  return conv2d(graph_, x, param(ref.weight), param(ref.bias), ref.spec);
}

Var hrim_forward(ModelBinding& b, Var mel) {
  const HRNetConfig& cfg = b.model().config();
  const Tensor& x = b.graph().value(mel);
  if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg.in_mels ||
      x.dim(3) != cfg.in_frames) {
    fail(ErrorKind::kInvalidArgument,
         "model input " + shape_string(x.shape()) + " does not match configured Nx1x" +
             std::to_string(cfg.in_mels) + "x" + std::to_string(cfg.in_frames));
  }
  return relu(b.graph(), b.conv(b.model().layout().stem, mel));
}

Var residual_block(ModelBinding& b, const ResidualBlock& block, Var x) {
  Graph& g = b.graph();
  const Var inner = relu(g, b.conv(block.first, x));
  const Var branch = b.conv(block.second, inner);
  return relu(g, add(g, x, branch));
}

namespace {

void check_branches(ModelBinding& b, const BranchSet& branches,
                    std::size_t expected) {
  const HRNetConfig& cfg = b.model().config();
  if (branches.size() != expected) {
    fail(ErrorKind::kInvalidArgument,
         "branch set has " + std::to_string(branches.size()) + " maps, expected " +
             std::to_string(expected));
  }
  const Shape& first = b.graph().value(branches[0]).shape();
  for (std::size_t r = 0; r < branches.size(); ++r) {
    const Shape& s = b.graph().value(branches[r]).shape();
    const Shape want = {first[0], cfg.branch_channels[r],
                        branch_extent(cfg.in_mels, r), branch_extent(cfg.in_frames, r)};
    if (s != want) {
      fail(ErrorKind::kInvalidArgument,
           "branch " + std::to_string(r) + " has shape " + shape_string(s) +
               ", expected " + shape_string(want));
    }
  }
}

}  // namespace

BranchSet exchange_fuse(ModelBinding& b, const StageLayout& stage,
                        const BranchSet& branches) {
  check_branches(b, branches, stage.n_branches);
  Graph& g = b.graph();
  const HRNetConfig& cfg = b.model().config();
  BranchSet out;
  out.reserve(branches.size());
  for (std::size_t j = 0; j < branches.size(); ++j) {
    std::optional<Var> acc;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      const ExchangePath& path = stage.exchange[j][i];
      Var t = branches[i];
      if (i < j) {
        for (std::size_t k = 0; k < path.convs.size(); ++k) {
          t = b.conv(path.convs[k], t);
          if (k + 1 < path.convs.size()) t = relu(g, t);
        }
      } else if (i > j) {
        t = b.conv(path.convs[0], t);
        t = upsample_nearest(g, t, path.upsample, branch_extent(cfg.in_mels, j),
                             branch_extent(cfg.in_frames, j));
      }
      acc = acc ? add(g, *acc, t) : t;
    }
    out.push_back(relu(g, *acc));
  }
  return out;
}

Var fuse_layer(ModelBinding& b, const BranchSet& branches) {
  const ModelLayout& layout = b.model().layout();
  check_branches(b, branches, layout.fuse.size());
  Graph& g = b.graph();
  const HRNetConfig& cfg = b.model().config();
  std::optional<Var> acc;
  for (std::size_t r = 0; r < branches.size(); ++r) {
    Var p = b.conv(layout.fuse[r], branches[r]);
    if (r > 0) {
      p = upsample_nearest(g, p, std::size_t{1} << r, cfg.in_mels, cfg.in_frames);
    }
    acc = acc ? add(g, *acc, p) : p;
  }
  return relu(g, *acc);
}

Var head(ModelBinding& b, Var features) {
  Graph& g = b.graph();
  const ModelLayout& layout = b.model().layout();
  const Var pooled = global_avg_pool(g, features);
  const Var logits =
      linear(g, pooled, b.param(layout.head_weight), b.param(layout.head_bias));
  return softmax(g, logits);
}

ForwardTrace forward_trace(ModelBinding& b, Var mel) {
  Graph& g = b.graph();
  const ModelLayout& layout = b.model().layout();
  ForwardTrace trace;
  trace.stem = hrim_forward(b, mel);
  Var base = trace.stem;
  if (layout.stem_transition) base = relu(g, b.conv(*layout.stem_transition, base));
  BranchSet branches = {base};
  for (const StageLayout& stage : layout.stages) {
    if (stage.new_branch) {
      branches.push_back(relu(g, b.conv(*stage.new_branch, branches.back())));
    }
    for (std::size_t r = 0; r < branches.size(); ++r) {
      for (const ResidualBlock& block : stage.blocks[r]) {
        branches[r] = residual_block(b, block, branches[r]);
      }
    }
    branches = exchange_fuse(b, stage, branches);
  }
  trace.branches = branches;
  trace.fused = fuse_layer(b, branches);
  trace.probs = head(b, trace.fused);
  return trace;
}

Var forward(ModelBinding& b, Var mel) { return forward_trace(b, mel).probs; }

}  // namespace emohrnet
