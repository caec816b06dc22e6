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

#ifndef EMOHRNET_SRC_TENSOR_H_
#define EMOHRNET_SRC_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emohrnet {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major array of doubles. `grad` is populated by Graph::backward for
// tensors bound as parameters.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool value) { requires_grad_ = value; }

  bool has_grad() const { return grad_.has_value(); }
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void set_grad(std::vector<double> grad);
  void clear_grad() { grad_.reset(); }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

// Every differentiable operation the tape can record. The gradcheck suite
// covers exactly this set.
enum class OpKind {
  kLeaf,
  kConv2d,
  kRelu,
  kUpsampleNearest,
  kAdd,
  kMul,
  kGlobalAvgPool,
  kLinear,
  kSoftmax,
  kCrossEntropy,
  kWeightedSum,
};

std::string_view op_name(OpKind kind);
// All recordable ops except kLeaf.
std::span<const OpKind> differentiable_ops();

struct Var {
  std::size_t id = 0;
};

class Graph;

struct Node {
  using BackwardFn = std::function<void(Graph&, const Node&)>;

  OpKind op = OpKind::kLeaf;
  std::vector<std::size_t> inputs;
  Tensor value;
  bool requires_grad = false;
  BackwardFn backward;
  Tensor* bound = nullptr;  // parameter tensor receiving the gradient
  std::size_t id = 0;
};

// Define-by-run tape. Nodes are appended in creation order, so every input id
// is smaller than the id of its consumer, and backward walks the tape in
// exact reverse.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Constant input; never receives a gradient.
  Var input(Tensor value);
  // Leaf bound to `tensor`; backward writes its gradient into tensor.grad.
  // Behaves like input() when gradients are disabled or the tensor does
  // not require them.
  Var param(Tensor& tensor);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  // Gradient of the last backward() seed w.r.t. `v`; empty if none flowed.
  std::span<const double> grad(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and propagates. One call per graph.
  void backward(Var loss);

  // Hash of every ReLU gating pattern on the tape. Two graphs built from the
  // same builder share a signature iff no unit crossed its kink.
  uint64_t activation_signature() const;

  // Op-implementation interface.
  Var record(OpKind op, std::vector<std::size_t> inputs, Tensor value,
             Node::BackwardFn backward);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::vector<double>& grad_buffer(std::size_t id);
  std::span<const double> node_grad(std::size_t id) const;

 private:
  bool grad_enabled_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

struct ConvSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

std::size_t conv_output_size(std::size_t in, std::size_t kernel,
                             const ConvSpec& spec);

// Direct cross-correlation, NCHW input, OIHW kernel, zero padding.
Var conv2d(Graph& g, Var input, Var kernel, Var bias, const ConvSpec& spec);
Var relu(Graph& g, Var x);
// Nearest-neighbour upsampling of the two trailing axes. The output may be
// cropped to (out_h, out_w) <= (factor*H, factor*W); 0 means uncropped.
Var upsample_nearest(Graph& g, Var x, std::size_t factor, std::size_t out_h = 0,
                     std::size_t out_w = 0);
Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
// NCHW -> NC per-channel spatial mean.
Var global_avg_pool(Graph& g, Var x);
// x (N,C), weight (K,C), bias (K) -> x * weight^T + bias.
Var linear(Graph& g, Var x, Var weight, Var bias);
// Row-wise softmax over (N,K).
Var softmax(Graph& g, Var logits);
// Mean negative log-likelihood of one-hot `labels` under `probs`. When
// `probs` comes straight from softmax() the gradient is routed to the
// logits as (p - y) / N.
Var cross_entropy(Graph& g, Var probs, const Tensor& labels);
// Scalar sum(x * weights) with constant weights; a projection to a scalar
// for checking ops with tensor outputs.
Var weighted_sum(Graph& g, Var x, const Tensor& weights);

inline constexpr double kProbabilityFloor = 1e-12;

struct GradCheckOptions {
  // 0 checks every coordinate; otherwise this many random coordinates per
  // tensor (tensors at or below the limit are checked exhaustively).
  std::size_t max_coords_per_tensor = 0;
  uint64_t seed = 0;
  // Resample coordinates whose perturbation flips any ReLU gate.
  bool skip_kink_crossings = true;
  // Negative-control hook: scales every analytic gradient before comparing.
  double corrupt_analytic_scale = 1.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

using GraphBuilder = std::function<Var(Graph&)>;

// Central finite differences over every tensor in `inputs` compared against
// the tape's gradients. The builder must bind each input via Graph::param and
// return a scalar. Relative error is |a-n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const GraphBuilder& builder,
                           std::span<Tensor* const> inputs, double eps,
                           const GradCheckOptions& options = {});

}  // namespace emohrnet

#endif  // EMOHRNET_SRC_TENSOR_H_
