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

#include "tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "error.h"
#include "rng.h"

namespace emohrnet {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (std::size_t d : shape_) require(d > 0, "tensor dimensions must be positive");
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) require(d > 0, "tensor dimensions must be positive");
  require(shape_numel(shape_) == data_.size(),
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_string(shape_));
}

double Tensor::item() const {
  require(data_.size() == 1,
          "item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

std::span<const double> Tensor::grad() const {
  if (!grad_) return {};
  return *grad_;
}

std::span<double> Tensor::mutable_grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

void Tensor::set_grad(std::vector<double> grad) {
  require(grad.size() == data_.size(), "gradient length mismatch");
  grad_ = std::move(grad);
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kUpsampleNearest: return "upsample_nearest";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kLinear: return "linear";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kWeightedSum: return "weighted_sum";
  }
  return "unknown";
}

std::span<const OpKind> differentiable_ops() {
  static constexpr OpKind kOps[] = {
      OpKind::kConv2d,        OpKind::kRelu,   OpKind::kUpsampleNearest,
      OpKind::kAdd,           OpKind::kMul,    OpKind::kGlobalAvgPool,
      OpKind::kLinear,        OpKind::kSoftmax, OpKind::kCrossEntropy,
      OpKind::kWeightedSum,
  };
  return kOps;
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::input(Tensor value) {
  Node node;
  node.op = OpKind::kLeaf;
  node.value = std::move(value);
  node.id = nodes_.size();
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::param(Tensor& tensor) {
  Node node;
  node.op = OpKind::kLeaf;
  node.value = Tensor(tensor.shape(), std::vector<double>(tensor.data().begin(),
                                                          tensor.data().end()));
  if (grad_enabled_ && tensor.requires_grad()) {
    node.requires_grad = true;
    node.bound = &tensor;
  }
  node.id = nodes_.size();
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::record(OpKind op, std::vector<std::size_t> inputs, Tensor value,
                  Node::BackwardFn backward) {
  Node node;
  node.op = op;
  node.id = nodes_.size();
  for (std::size_t in : inputs) {
    require(in < node.id, "graph input refers to a later node");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
#ifndef NDEBUG
  for (double x : value.data()) {
    require(std::isfinite(x),
            std::string("non-finite value produced by ") +
                std::string(op_name(op)));
  }
#endif
  node.requires_grad = node.requires_grad && grad_enabled_;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

std::vector<double>& Graph::grad_buffer(std::size_t id) {
  std::vector<double>& buf = grads_.at(id);
  if (buf.empty()) buf.assign(nodes_[id].value.numel(), 0.0);
  return buf;
}

std::span<const double> Graph::node_grad(std::size_t id) const {
  if (id >= grads_.size()) return {};
  return grads_[id];
}

std::span<const double> Graph::grad(Var v) const { return node_grad(v.id); }

void Graph::backward(Var loss) {
  if (backward_done_) {
    fail(ErrorKind::kInvalidArgument,
         "backward() already ran on this graph; build a new graph per step");
  }
  const Node& seed = nodes_.at(loss.id);
  if (seed.value.numel() != 1) {
    fail(ErrorKind::kInvalidArgument,
         "backward() needs a scalar loss, got shape " +
             shape_string(seed.value.shape()));
  }
  for (const Node& node : nodes_) {
    if (node.bound != nullptr && node.bound->has_grad()) {
      fail(ErrorKind::kInvalidArgument,
           "parameter gradient already populated; clear it before another "
           "backward pass");
    }
  }
  backward_done_ = true;
  grads_.assign(nodes_.size(), {});
  if (!seed.requires_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || grads_[id].empty() || !node.backward) continue;
    node.backward(*this, node);
  }
  for (Node& node : nodes_) {
    if (node.bound == nullptr) continue;
    if (grads_[node.id].empty()) {
      node.bound->set_grad(std::vector<double>(node.value.numel(), 0.0));
    } else {
      node.bound->set_grad(grads_[node.id]);
    }
  }
}

uint64_t Graph::activation_signature() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const Node& node : nodes_) {
    if (node.op != OpKind::kRelu) continue;
    for (double v : node.value.data()) {
      h ^= v > 0.0 ? 1u : 0u;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kInvalidArgument,
         std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
             " vs " + shape_string(b.shape()));
  }
}

void check_rank(const Tensor& t, std::size_t rank, const char* op,
                const char* what) {
  if (t.rank() != rank) {
    fail(ErrorKind::kInvalidArgument,
         std::string(op) + ": " + what + " must have rank " +
             std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

// Output columns ow whose input column ow*stride + offset lies in [0, width).
struct ColumnRange {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;  // exclusive
};

ColumnRange valid_columns(std::ptrdiff_t offset, std::ptrdiff_t width,
                          std::ptrdiff_t stride, std::ptrdiff_t out_width) {
  std::ptrdiff_t lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  std::ptrdiff_t hi = 0;
  if (width - 1 - offset >= 0) hi = (width - 1 - offset) / stride + 1;
  return {lo, std::min(hi, out_width)};
}

struct ConvGeometry {
  std::size_t n, c, h, w, o, kh, kw, oh, ow, stride, pad;
};

bool is_pointwise(const ConvGeometry& geo) {
  return geo.kh == 1 && geo.kw == 1 && geo.stride == 1 && geo.pad == 0;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Unfolds one sample (C x H x W) into (C*kh*kw) x (oh*ow) patch columns.
void im2col(const ConvGeometry& geo, const double* in, double* cols) {
  const auto s = static_cast<std::ptrdiff_t>(geo.stride);
  const auto p = static_cast<std::ptrdiff_t>(geo.pad);
  const std::size_t plane_out = geo.oh * geo.ow;
  for (std::size_t c = 0; c < geo.c; ++c) {
    const double* ip = in + c * geo.h * geo.w;
    for (std::size_t ky = 0; ky < geo.kh; ++ky) {
      for (std::size_t kx = 0; kx < geo.kw; ++kx) {
        double* dst = cols + ((c * geo.kh + ky) * geo.kw + kx) * plane_out;
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - p;
        const ColumnRange range = valid_columns(
            off, static_cast<std::ptrdiff_t>(geo.w), s, static_cast<std::ptrdiff_t>(geo.ow));
        for (std::size_t oy = 0; oy < geo.oh; ++oy) {
          double* drow = dst + oy * geo.ow;
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * s + static_cast<std::ptrdiff_t>(ky) - p;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geo.h) || range.lo >= range.hi) {
            std::fill(drow, drow + geo.ow, 0.0);
            continue;
          }
          const double* row = ip + iy * static_cast<std::ptrdiff_t>(geo.w) + off;
          std::fill(drow, drow + range.lo, 0.0);
          for (std::ptrdiff_t x = range.lo; x < range.hi; ++x) drow[x] = row[x * s];
          std::fill(drow + range.hi, drow + geo.ow, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates patch columns back into one sample.
void col2im_add(const ConvGeometry& geo, const double* cols, double* in) {
  const auto s = static_cast<std::ptrdiff_t>(geo.stride);
  const auto p = static_cast<std::ptrdiff_t>(geo.pad);
  const std::size_t plane_out = geo.oh * geo.ow;
  for (std::size_t c = 0; c < geo.c; ++c) {
    double* ip = in + c * geo.h * geo.w;
    for (std::size_t ky = 0; ky < geo.kh; ++ky) {
      for (std::size_t kx = 0; kx < geo.kw; ++kx) {
        const double* src = cols + ((c * geo.kh + ky) * geo.kw + kx) * plane_out;
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - p;
        const ColumnRange range = valid_columns(
            off, static_cast<std::ptrdiff_t>(geo.w), s, static_cast<std::ptrdiff_t>(geo.ow));
        for (std::size_t oy = 0; oy < geo.oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * s + static_cast<std::ptrdiff_t>(ky) - p;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geo.h)) continue;
          double* row = ip + iy * static_cast<std::ptrdiff_t>(geo.w) + off;
          const double* srow = src + oy * geo.ow;
          for (std::ptrdiff_t x = range.lo; x < range.hi; ++x) row[x * s] += srow[x];
        }
      }
    }
  }
}

// Forward and backward passes are GEMMs over patch columns:
//   out_n = K * cols_n,  dcols_n = K^T * gout_n,  dK += gout_n * cols_n^T
// with K viewed as O x (C*kh*kw).
void conv_forward(const ConvGeometry& geo, const double* in, const double* k,
                  const double* b, double* out) {
  const auto plane_out = static_cast<Eigen::Index>(geo.oh * geo.ow);
  const auto patch = static_cast<Eigen::Index>(geo.c * geo.kh * geo.kw);
  const auto n_out = static_cast<Eigen::Index>(geo.o);
  std::vector<double> cols(is_pointwise(geo) ? 0 : patch * plane_out);
  const ConstMatrixMap kernel(k, n_out, patch);
  for (std::size_t n = 0; n < geo.n; ++n) {
    const double* x = in + n * geo.c * geo.h * geo.w;
    if (!cols.empty()) {
      im2col(geo, x, cols.data());
      x = cols.data();
    }
    MatrixMap y(out + n * geo.o * geo.oh * geo.ow, n_out, plane_out);
    for (Eigen::Index o = 0; o < n_out; ++o) y.row(o).setConstant(b[o]);
    y.noalias() += kernel * ConstMatrixMap(x, patch, plane_out);
  }
}

void conv_backward_input(const ConvGeometry& geo, const double* gout,
                         const double* k, double* gin) {
  const auto plane_out = static_cast<Eigen::Index>(geo.oh * geo.ow);
  const auto patch = static_cast<Eigen::Index>(geo.c * geo.kh * geo.kw);
  const auto n_out = static_cast<Eigen::Index>(geo.o);
  const bool pointwise = is_pointwise(geo);
  std::vector<double> cols(pointwise ? 0 : patch * plane_out);
  const ConstMatrixMap kernel(k, n_out, patch);
  for (std::size_t n = 0; n < geo.n; ++n) {
    const ConstMatrixMap go(gout + n * geo.o * geo.oh * geo.ow, n_out, plane_out);
    double* gx = gin + n * geo.c * geo.h * geo.w;
    if (pointwise) {
      MatrixMap(gx, patch, plane_out).noalias() += kernel.transpose() * go;
    } else {
      MatrixMap(cols.data(), patch, plane_out).noalias() = kernel.transpose() * go;
      col2im_add(geo, cols.data(), gx);
    }
  }
}

void conv_backward_kernel(const ConvGeometry& geo, const double* gout,
                          const double* in, double* gk) {
  const auto plane_out = static_cast<Eigen::Index>(geo.oh * geo.ow);
  const auto patch = static_cast<Eigen::Index>(geo.c * geo.kh * geo.kw);
  const auto n_out = static_cast<Eigen::Index>(geo.o);
  std::vector<double> cols(is_pointwise(geo) ? 0 : patch * plane_out);
  MatrixMap kernel_grad(gk, n_out, patch);
  for (std::size_t n = 0; n < geo.n; ++n) {
    const double* x = in + n * geo.c * geo.h * geo.w;
    if (!cols.empty()) {
      im2col(geo, x, cols.data());
      x = cols.data();
    }
    const ConstMatrixMap go(gout + n * geo.o * geo.oh * geo.ow, n_out, plane_out);
    kernel_grad.noalias() += go * ConstMatrixMap(x, patch, plane_out).transpose();
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel,
                             const ConvSpec& spec) {
  require(spec.stride >= 1, "conv2d: stride must be positive");
  const std::size_t padded = in + 2 * spec.padding;
  if (padded < kernel) return 0;
  return (padded - kernel) / spec.stride + 1;
}

Var conv2d(Graph& g, Var input, Var kernel, Var bias, const ConvSpec& spec) {
  const Tensor& x = g.value(input);
  const Tensor& k = g.value(kernel);
  const Tensor& b = g.value(bias);
  check_rank(x, 4, "conv2d", "input");
  check_rank(k, 4, "conv2d", "kernel");
  if (x.dim(1) != k.dim(1)) {
    fail(ErrorKind::kInvalidArgument,
         "conv2d: input " + shape_string(x.shape()) + " has " +
             std::to_string(x.dim(1)) + " channels but kernel " +
             shape_string(k.shape()) + " expects " + std::to_string(k.dim(1)));
  }
  if (b.rank() != 1 || b.dim(0) != k.dim(0)) {
    fail(ErrorKind::kInvalidArgument,
         "conv2d: bias " + shape_string(b.shape()) + " does not match kernel " +
             shape_string(k.shape()));
  }
  const std::size_t oh = conv_output_size(x.dim(2), k.dim(2), spec);
  const std::size_t ow = conv_output_size(x.dim(3), k.dim(3), spec);
  if (oh == 0 || ow == 0) {
    fail(ErrorKind::kInvalidArgument,
         "conv2d: non-positive output size for input " + shape_string(x.shape()) +
             " and kernel " + shape_string(k.shape()));
  }
  const ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0),
                         k.dim(2), k.dim(3), oh, ow, spec.stride, spec.padding};
  Tensor out({geo.n, geo.o, oh, ow});
  conv_forward(geo, x.data().data(), k.data().data(), b.data().data(),
               out.data().data());
  const std::size_t xi = input.id, ki = kernel.id, bi = bias.id;
  return g.record(
      OpKind::kConv2d, {xi, ki, bi}, std::move(out),
      [geo, xi, ki, bi](Graph& gr, const Node& self) {
        const double* gout = gr.node_grad(self.id).data();
        if (gr.needs_grad(xi)) {
          conv_backward_input(geo, gout, gr.node(ki).value.data().data(),
                              gr.grad_buffer(xi).data());
        }
        if (gr.needs_grad(ki)) {
          conv_backward_kernel(geo, gout, gr.node(xi).value.data().data(),
                               gr.grad_buffer(ki).data());
        }
        if (gr.needs_grad(bi)) {
          std::vector<double>& gb = gr.grad_buffer(bi);
          const std::size_t plane = geo.oh * geo.ow;
          for (std::size_t o = 0; o < geo.o; ++o) {
            double acc = 0.0;
            for (std::size_t n = 0; n < geo.n; ++n) {
              const double* go = gout + (n * geo.o + o) * plane;
              for (std::size_t i = 0; i < plane; ++i) acc += go[i];
            }
            gb[o] += acc;
          }
        }
      });
}

Var relu(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  const std::size_t xi = x.id;
  return g.record(OpKind::kRelu, {xi}, std::move(out),
                  [xi](Graph& gr, const Node& self) {
                    if (!gr.needs_grad(xi)) return;
                    std::span<const double> go = gr.node_grad(self.id);
                    std::vector<double>& gi = gr.grad_buffer(xi);
                    const Tensor& y = self.value;
                    for (std::size_t i = 0; i < gi.size(); ++i) {
                      if (y[i] > 0.0) gi[i] += go[i];
                    }
                  });
}

Var upsample_nearest(Graph& g, Var x, std::size_t factor, std::size_t out_h,
                     std::size_t out_w) {
  if (factor < 1) {
    fail(ErrorKind::kInvalidArgument, "upsample_nearest: factor must be >= 1");
  }
  const Tensor& in = g.value(x);
  check_rank(in, 4, "upsample_nearest", "input");
  const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (out_h == 0) out_h = h * factor;
  if (out_w == 0) out_w = w * factor;
  if (out_h > h * factor || out_w > w * factor ||
      out_h <= (h - 1) * factor || out_w <= (w - 1) * factor) {
    fail(ErrorKind::kInvalidArgument,
         "upsample_nearest: target " + std::to_string(out_h) + "x" +
             std::to_string(out_w) + " incompatible with input " +
             shape_string(in.shape()) + " at factor " + std::to_string(factor));
  }
  Tensor out({n, c, out_h, out_w});
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* ip = in.data().data() + p * h * w;
    double* op = out.data().data() + p * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const double* row = ip + (y / factor) * w;
      for (std::size_t xx = 0; xx < out_w; ++xx) op[y * out_w + xx] = row[xx / factor];
    }
  }
  const std::size_t xi = x.id;
  return g.record(
      OpKind::kUpsampleNearest, {xi}, std::move(out),
      [xi, n, c, h, w, out_h, out_w, factor](Graph& gr, const Node& self) {
        if (!gr.needs_grad(xi)) return;
        std::span<const double> go = gr.node_grad(self.id);
        std::vector<double>& gi = gr.grad_buffer(xi);
        for (std::size_t p = 0; p < n * c; ++p) {
          double* ip = gi.data() + p * h * w;
          const double* op = go.data() + p * out_h * out_w;
          for (std::size_t y = 0; y < out_h; ++y) {
            double* row = ip + (y / factor) * w;
            for (std::size_t xx = 0; xx < out_w; ++xx)
              row[xx / factor] += op[y * out_w + xx];
          }
        }
      });
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  check_same_shape(ta, tb, "add");
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] + tb[i];
  const std::size_t ai = a.id, bi = b.id;
  return g.record(OpKind::kAdd, {ai, bi}, std::move(out),
                  [ai, bi](Graph& gr, const Node& self) {
                    std::span<const double> go = gr.node_grad(self.id);
                    for (std::size_t id : {ai, bi}) {
                      if (!gr.needs_grad(id)) continue;
                      std::vector<double>& gi = gr.grad_buffer(id);
                      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
                    }
                  });
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  check_same_shape(ta, tb, "mul");
  Tensor out(ta.shape());
  for (std::size_t i = 0; i < ta.numel(); ++i) out[i] = ta[i] * tb[i];
  const std::size_t ai = a.id, bi = b.id;
  return g.record(OpKind::kMul, {ai, bi}, std::move(out),
                  [ai, bi](Graph& gr, const Node& self) {
                    std::span<const double> go = gr.node_grad(self.id);
                    const Tensor& va = gr.node(ai).value;
                    const Tensor& vb = gr.node(bi).value;
                    if (gr.needs_grad(ai)) {
                      std::vector<double>& ga = gr.grad_buffer(ai);
                      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * vb[i];
                    }
                    if (gr.needs_grad(bi)) {
                      std::vector<double>& gb = gr.grad_buffer(bi);
                      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * va[i];
                    }
                  });
}

Var global_avg_pool(Graph& g, Var x) {
  const Tensor& in = g.value(x);
  check_rank(in, 4, "global_avg_pool", "input");
  const std::size_t n = in.dim(0), c = in.dim(1);
  const std::size_t plane = in.dim(2) * in.dim(3);
  Tensor out({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* ip = in.data().data() + p * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += ip[i];
    out[p] = sum / static_cast<double>(plane);
  }
  const std::size_t xi = x.id;
  return g.record(OpKind::kGlobalAvgPool, {xi}, std::move(out),
                  [xi, n, c, plane](Graph& gr, const Node& self) {
                    if (!gr.needs_grad(xi)) return;
                    std::span<const double> go = gr.node_grad(self.id);
                    std::vector<double>& gi = gr.grad_buffer(xi);
                    const double scale = 1.0 / static_cast<double>(plane);
                    for (std::size_t p = 0; p < n * c; ++p) {
                      const double v = go[p] * scale;
                      double* ip = gi.data() + p * plane;
                      for (std::size_t i = 0; i < plane; ++i) ip[i] += v;
                    }
                  });
}

Var linear(Graph& g, Var x, Var weight, Var bias) {
  const Tensor& in = g.value(x);
  const Tensor& w = g.value(weight);
  const Tensor& b = g.value(bias);
  check_rank(in, 2, "linear", "input");
  check_rank(w, 2, "linear", "weight");
  if (in.dim(1) != w.dim(1) || b.rank() != 1 || b.dim(0) != w.dim(0)) {
    fail(ErrorKind::kInvalidArgument,
         "linear: dimension mismatch between input " + shape_string(in.shape()) +
             ", weight " + shape_string(w.shape()) + " and bias " +
             shape_string(b.shape()));
  }
  const std::size_t n = in.dim(0), c = in.dim(1), k = w.dim(0);
  Tensor out({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < c; ++i) acc += in[r * c + i] * w[j * c + i];
      out[r * k + j] = acc + b[j];
    }
  }
  const std::size_t xi = x.id, wi = weight.id, bi = bias.id;
  return g.record(
      OpKind::kLinear, {xi, wi, bi}, std::move(out),
      [xi, wi, bi, n, c, k](Graph& gr, const Node& self) {
        std::span<const double> go = gr.node_grad(self.id);
        const Tensor& vx = gr.node(xi).value;
        const Tensor& vw = gr.node(wi).value;
        if (gr.needs_grad(xi)) {
          std::vector<double>& gx = gr.grad_buffer(xi);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t i = 0; i < c; ++i) {
              double acc = 0.0;
              for (std::size_t j = 0; j < k; ++j) acc += go[r * k + j] * vw[j * c + i];
              gx[r * c + i] += acc;
            }
        }
        if (gr.needs_grad(wi)) {
          std::vector<double>& gw = gr.grad_buffer(wi);
          for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < c; ++i) {
              double acc = 0.0;
              for (std::size_t r = 0; r < n; ++r) acc += go[r * k + j] * vx[r * c + i];
              gw[j * c + i] += acc;
            }
        }
        if (gr.needs_grad(bi)) {
          std::vector<double>& gb = gr.grad_buffer(bi);
          for (std::size_t j = 0; j < k; ++j) {
            double acc = 0.0;
            for (std::size_t r = 0; r < n; ++r) acc += go[r * k + j];
            gb[j] += acc;
          }
        }
      });
}

Var softmax(Graph& g, Var logits) {
  const Tensor& z = g.value(logits);
  check_rank(z, 2, "softmax", "logits");
  const std::size_t n = z.dim(0), k = z.dim(1);
  Tensor out({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    const double* zr = z.data().data() + r * k;
    double* yr = out.data().data() + r * k;
    const double zmax = *std::max_element(zr, zr + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      yr[j] = std::exp(zr[j] - zmax);
      sum += yr[j];
    }
    for (std::size_t j = 0; j < k; ++j) yr[j] /= sum;
  }
  const std::size_t zi = logits.id;
  return g.record(OpKind::kSoftmax, {zi}, std::move(out),
                  [zi, n, k](Graph& gr, const Node& self) {
                    if (!gr.needs_grad(zi)) return;
                    std::span<const double> go = gr.node_grad(self.id);
                    std::vector<double>& gz = gr.grad_buffer(zi);
                    const Tensor& y = self.value;
                    for (std::size_t r = 0; r < n; ++r) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < k; ++j) dot += go[r * k + j] * y[r * k + j];
                      for (std::size_t j = 0; j < k; ++j)
                        gz[r * k + j] += y[r * k + j] * (go[r * k + j] - dot);
                    }
                  });
}

Var cross_entropy(Graph& g, Var probs, const Tensor& labels) {
  const Tensor& p = g.value(probs);
  check_rank(p, 2, "cross_entropy", "probabilities");
  check_same_shape(p, labels, "cross_entropy");
  const std::size_t n = p.dim(0), k = p.dim(1);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double y = labels[r * k + j];
      if (y == 1.0) {
        ++ones;
      } else if (y != 0.0) {
        ones = 2;
        break;
      }
    }
    if (ones != 1) {
      fail(ErrorKind::kInvalidArgument,
           "cross_entropy: label row " + std::to_string(r) + " is not one-hot");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n * k; ++i) {
    if (labels[i] != 0.0) total += labels[i] * std::log(std::max(p[i], kProbabilityFloor));
  }
  Tensor out = Tensor::scalar(-total / static_cast<double>(n));
  const std::size_t pi = probs.id;
  return g.record(
      OpKind::kCrossEntropy, {pi}, std::move(out),
      [pi, n, k, labels](Graph& gr, const Node& self) {
        const double gl = gr.node_grad(self.id)[0];
        const double inv_n = 1.0 / static_cast<double>(n);
        const Node& producer = gr.node(pi);
        const Tensor& pv = producer.value;
        if (producer.op == OpKind::kSoftmax) {
          const std::size_t zi = producer.inputs[0];
          if (!gr.needs_grad(zi)) return;
          std::vector<double>& gz = gr.grad_buffer(zi);
          for (std::size_t i = 0; i < n * k; ++i)
            gz[i] += gl * (pv[i] - labels[i]) * inv_n;
          return;
        }
        if (!gr.needs_grad(pi)) return;
        std::vector<double>& gp = gr.grad_buffer(pi);
        for (std::size_t i = 0; i < n * k; ++i) {
          if (labels[i] != 0.0 && pv[i] > kProbabilityFloor)
            gp[i] -= gl * labels[i] * inv_n / pv[i];
        }
      });
}

Var weighted_sum(Graph& g, Var x, const Tensor& weights) {
  const Tensor& in = g.value(x);
  check_same_shape(in, weights, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < in.numel(); ++i) acc += in[i] * weights[i];
  const std::size_t xi = x.id;
  return g.record(OpKind::kWeightedSum, {xi}, Tensor::scalar(acc),
                  [xi, weights](Graph& gr, const Node& self) {
                    if (!gr.needs_grad(xi)) return;
                    const double go = gr.node_grad(self.id)[0];
                    std::vector<double>& gi = gr.grad_buffer(xi);
                    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go * weights[i];
                  });
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

struct Evaluation {
  double value;
  uint64_t signature;
};

Evaluation evaluate_builder(const GraphBuilder& builder) {
  Graph g(/*grad_enabled=*/false);
  const Var out = builder(g);
  const Tensor& v = g.value(out);
  if (v.numel() != 1) {
    fail(ErrorKind::kInvalidArgument,
         "grad_check: builder output must be scalar, got " +
             shape_string(v.shape()));
  }
  return {v[0], g.activation_signature()};
}

// Sampled tensors give up after this many attempts per requested coordinate
// when perturbations keep crossing ReLU kinks.
constexpr std::size_t kMaxAttemptsPerCoord = 8;

}  // namespace

GradCheckResult grad_check(const GraphBuilder& builder,
                           std::span<Tensor* const> inputs, double eps,
                           const GradCheckOptions& options) {
  require(eps > 0.0, "grad_check: eps must be positive");
  for (Tensor* t : inputs) {
    t->set_requires_grad(true);
    t->clear_grad();
  }
  uint64_t center_signature = 0;
  {
    Graph g;
    const Var out = builder(g);
    if (g.value(out).numel() != 1) {
      fail(ErrorKind::kInvalidArgument,
           "grad_check: builder output must be scalar, got " +
               shape_string(g.value(out).shape()));
    }
    center_signature = g.activation_signature();
    g.backward(out);
  }

  GradCheckResult result;
  Rng rng(options.seed, 0x67726164636b);
  for (Tensor* t : inputs) {
    const std::vector<double> analytic(t->grad().begin(), t->grad().end());
    std::vector<std::size_t> order(t->numel());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool sampled = options.max_coords_per_tensor != 0 &&
                         t->numel() > options.max_coords_per_tensor;
    if (sampled) {
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[rng.uniform_int(0, i)]);
      }
    }
    std::size_t taken = 0;
    std::size_t attempts = 0;
    for (std::size_t idx : order) {
      if (sampled && (taken >= options.max_coords_per_tensor ||
                      attempts >= kMaxAttemptsPerCoord * options.max_coords_per_tensor)) {
        break;
      }
      ++attempts;
      double& x = (*t)[idx];
      const double original = x;
      x = original + eps;
      const Evaluation plus = evaluate_builder(builder);
      x = original - eps;
      const Evaluation minus = evaluate_builder(builder);
      x = original;
      if (options.skip_kink_crossings &&
          (plus.signature != center_signature ||
           minus.signature != center_signature)) {
        ++result.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * eps);
      const double a = analytic[idx] * options.corrupt_analytic_scale;
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_rel_error =
          std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
      ++taken;
    }
  }
  return result;
}

}  // namespace emohrnet
