#include "lth/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

namespace lth {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(std::vector<int> s, std::vector<float> d, bool rg)
    : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
  if (static_cast<int64_t>(data.size()) != shape_numel(shape))
    throw ConfigError("tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), 0.0f),
                requires_grad);
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<float> values,
                           bool requires_grad) {
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

int64_t Tensor::numel() const { return shape_numel(shape); }

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

// ----------------------------------------------------------------------
// Graph
// ----------------------------------------------------------------------

const Graph::Node& Graph::at(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
    throw ArgumentError("graph node id out of range");
  return nodes_[static_cast<size_t>(id)];
}

int Graph::push(Node n) {
  n.tag = tag_;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size() - 1);
}

void Graph::check_finite(const Tensor& t, const char* op_name) const {
  for (float v : t.data) {
    if (!std::isfinite(v)) {
      std::string where = tag_.empty() ? std::string(op_name)
                                       : std::string(op_name) + " [" + tag_ + "]";
      throw NumericError("non-finite value produced by " + where);
    }
  }
}

int Graph::leaf(Tensor t) {
  Node n;
  n.op = Op::leaf;
  n.needs_grad = t.requires_grad;
  n.value = std::move(t);
  check_finite(n.value, "leaf");
  return push(std::move(n));
}

int Graph::matmul(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (na.value.rank() != 2 || nb.value.rank() != 2 ||
      na.value.dim(1) != nb.value.dim(0))
    throw ConfigError("matmul shape mismatch " + shape_str(na.value.shape) + " x " +
                      shape_str(nb.value.shape));
  const int B = na.value.dim(0), I = na.value.dim(1), O = nb.value.dim(1);
  Tensor out = Tensor::zeros({B, O});
  const float* A = na.value.data.data();
  const float* W = nb.value.data.data();
  float* Y = out.data.data();
  for (int r = 0; r < B; ++r) {
    for (int c = 0; c < O; ++c) {
      double acc = 0.0;
      for (int k = 0; k < I; ++k)
        acc += static_cast<double>(A[r * I + k]) * static_cast<double>(W[k * O + c]);
      Y[r * O + c] = static_cast<float>(acc);
    }
  }
  check_finite(out, "matmul");
  Node n;
  n.op = Op::matmul;
  n.a = a;
  n.b = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::add_bias(int x, int b) {
  const Node& nx = at(x);
  const Node& nb = at(b);
  if (nx.value.rank() != 2 || nb.value.rank() != 1 ||
      nx.value.dim(1) != nb.value.dim(0))
    throw ConfigError("add_bias shape mismatch " + shape_str(nx.value.shape) + " + " +
                      shape_str(nb.value.shape));
  Tensor out = nx.value;
  out.requires_grad = false;
  const int B = nx.value.dim(0), O = nx.value.dim(1);
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < O; ++c) out.data[static_cast<size_t>(r) * O + c] += nb.value.data[static_cast<size_t>(c)];
  check_finite(out, "add_bias");
  Node n;
  n.op = Op::add_bias;
  n.a = x;
  n.b = b;
  n.needs_grad = nx.needs_grad || nb.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::conv2d(int x, int w, int stride, int pad) {
  const Node& nx = at(x);
  const Node& nw = at(w);
  if (nx.value.rank() != 4 || nw.value.rank() != 4 ||
      nx.value.dim(1) != nw.value.dim(1))
    throw ConfigError("conv2d shape mismatch " + shape_str(nx.value.shape) + " * " +
                      shape_str(nw.value.shape));
  if (stride < 1 || pad < 0) throw ArgumentError("conv2d: bad stride/pad");
  const int B = nx.value.dim(0), C = nx.value.dim(1), H = nx.value.dim(2),
            W = nx.value.dim(3);
  const int OC = nw.value.dim(0), KH = nw.value.dim(2), KW = nw.value.dim(3);
  const int OH = (H + 2 * pad - KH) / stride + 1;
  const int OW = (W + 2 * pad - KW) / stride + 1;
  if (OH < 1 || OW < 1) throw ConfigError("conv2d: output would be empty");
  Tensor out = Tensor::zeros({B, OC, OH, OW});
  const float* X = nx.value.data.data();
  const float* K = nw.value.data.data();
  float* Y = out.data.data();
  const auto xi = [&](int b, int c, int h, int ww) {
    return ((static_cast<int64_t>(b) * C + c) * H + h) * W + ww;
  };
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < OC; ++oc)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh) {
              const int ih = oh * stride - pad + kh;
              if (ih < 0 || ih >= H) continue;
              for (int kw = 0; kw < KW; ++kw) {
                const int iw = ow * stride - pad + kw;
                if (iw < 0 || iw >= W) continue;
                acc += static_cast<double>(X[xi(b, c, ih, iw)]) *
                       static_cast<double>(
                           K[((static_cast<int64_t>(oc) * C + c) * KH + kh) * KW + kw]);
              }
            }
          Y[((static_cast<int64_t>(b) * OC + oc) * OH + oh) * OW + ow] =
              static_cast<float>(acc);
        }
  check_finite(out, "conv2d");
  Node n;
  n.op = Op::conv2d;
  n.a = x;
  n.b = w;
  n.p0 = stride;
  n.p1 = pad;
  n.needs_grad = nx.needs_grad || nw.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::bias_channels(int x, int b) {
  const Node& nx = at(x);
  const Node& nb = at(b);
  if (nx.value.rank() != 4 || nb.value.rank() != 1 ||
      nx.value.dim(1) != nb.value.dim(0))
    throw ConfigError("bias_channels shape mismatch");
  Tensor out = nx.value;
  out.requires_grad = false;
  const int B = nx.value.dim(0), C = nx.value.dim(1);
  const int64_t HW = static_cast<int64_t>(nx.value.dim(2)) * nx.value.dim(3);
  for (int bb = 0; bb < B; ++bb)
    for (int c = 0; c < C; ++c) {
      const float bv = nb.value.data[static_cast<size_t>(c)];
      float* p = out.data.data() + (static_cast<int64_t>(bb) * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) p[i] += bv;
    }
  check_finite(out, "bias_channels");
  Node n;
  n.op = Op::bias_channels;
  n.a = x;
  n.b = b;
  n.needs_grad = nx.needs_grad || nb.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::relu(int x) {
  const Node& nx = at(x);
  Tensor out = nx.value;
  out.requires_grad = false;
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  Node n;
  n.op = Op::relu;
  n.a = x;
  n.needs_grad = nx.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (na.value.shape != nb.value.shape)
    throw ConfigError("add shape mismatch " + shape_str(na.value.shape) + " + " +
                      shape_str(nb.value.shape));
  Tensor out = na.value;
  out.requires_grad = false;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += nb.value.data[i];
  check_finite(out, "add");
  Node n;
  n.op = Op::add;
  n.a = a;
  n.b = b;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::avg_pool(int x, int k, int stride) {
  const Node& nx = at(x);
  if (nx.value.rank() != 4) throw ConfigError("avg_pool expects a 4-D input");
  if (k < 1 || stride < 1) throw ArgumentError("avg_pool: bad kernel/stride");
  const int B = nx.value.dim(0), C = nx.value.dim(1), H = nx.value.dim(2),
            W = nx.value.dim(3);
  if (k > H || k > W) throw ConfigError("avg_pool window larger than input");
  const int OH = (H - k) / stride + 1;
  const int OW = (W - k) / stride + 1;
  Tensor out = Tensor::zeros({B, C, OH, OW});
  const float* X = nx.value.data.data();
  float* Y = out.data.data();
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw)
              acc += X[((static_cast<int64_t>(b) * C + c) * H + oh * stride + kh) * W +
                       ow * stride + kw];
          Y[((static_cast<int64_t>(b) * C + c) * OH + oh) * OW + ow] =
              static_cast<float>(acc * inv);
        }
  check_finite(out, "avg_pool");
  Node n;
  n.op = Op::avg_pool;
  n.a = x;
  n.p0 = k;
  n.p1 = stride;
  n.needs_grad = nx.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::flatten(int x) {
  const Node& nx = at(x);
  if (nx.value.rank() < 2) throw ConfigError("flatten expects rank >= 2");
  const int B = nx.value.dim(0);
  const int rest = static_cast<int>(nx.value.numel() / B);
  Tensor out = nx.value;
  out.requires_grad = false;
  out.shape = {B, rest};
  Node n;
  n.op = Op::flatten;
  n.a = x;
  n.needs_grad = nx.needs_grad;
  n.value = std::move(out);
  return push(std::move(n));
}

int Graph::softmax_cross_entropy(int logits, std::vector<int> labels) {
  const Node& nl = at(logits);
  if (nl.value.rank() != 2) throw ConfigError("softmax_cross_entropy expects (B,C) logits");
  const int B = nl.value.dim(0), C = nl.value.dim(1);
  if (static_cast<int>(labels.size()) != B)
    throw ConfigError("softmax_cross_entropy: label count " +
                      std::to_string(labels.size()) + " != batch " + std::to_string(B));
  for (int y : labels)
    if (y < 0 || y >= C) throw ConfigError("softmax_cross_entropy: label out of range");

  std::vector<float> probs(static_cast<size_t>(B) * C);
  const float* L = nl.value.data.data();
  double loss_acc = 0.0;
  for (int r = 0; r < B; ++r) {
    double mx = L[static_cast<size_t>(r) * C];
    for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(L[static_cast<size_t>(r) * C + c]));
    double denom = 0.0;
    for (int c = 0; c < C; ++c) denom += std::exp(static_cast<double>(L[static_cast<size_t>(r) * C + c]) - mx);
    const double lse = mx + std::log(denom);
    for (int c = 0; c < C; ++c)
      probs[static_cast<size_t>(r) * C + c] =
          static_cast<float>(std::exp(static_cast<double>(L[static_cast<size_t>(r) * C + c]) - lse));
    loss_acc += lse - static_cast<double>(L[static_cast<size_t>(r) * C + labels[static_cast<size_t>(r)]]);
  }
  Tensor out = Tensor::from_values({}, {static_cast<float>(loss_acc / B)});
  check_finite(out, "softmax_cross_entropy");
  Node n;
  n.op = Op::softmax_xent;
  n.a = logits;
  n.needs_grad = nl.needs_grad;
  n.labels = std::move(labels);
  n.probs = std::move(probs);
  n.value = std::move(out);
  return push(std::move(n));
}

const Tensor& Graph::value(int node) const { return at(node).value; }

Tensor& Graph::grad_of(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad_store.data.empty() && n.value.numel() > 0)
    n.grad_store = Tensor::zeros(n.value.shape);
  return n.grad_store;
}

const Tensor& Graph::grad(int node) const {
  const Node& n = at(node);
  if (n.grad_store.data.empty()) n.grad_store = Tensor::zeros(n.value.shape);
  return n.grad_store;
}

void Graph::backward(int loss_node) {
  if (backward_done_)
    throw StateError("backward called twice without a new forward pass");
  const Node& loss = at(loss_node);
  if (loss.value.numel() != 1) throw ArgumentError("backward: loss must be scalar");
  backward_done_ = true;
  grad_of(loss_node).data[0] = 1.0f;
  for (int id = loss_node; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || n.op == Op::leaf) continue;
    if (n.grad_store.data.empty()) continue;  // not on the path to the loss
    backward_node(id);
  }
}

void Graph::backward_node(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor& gy = n.grad_store;
  switch (n.op) {
    case Op::matmul: {
      const Node& na = at(n.a);
      const Node& nb = at(n.b);
      const int B = na.value.dim(0), I = na.value.dim(1), O = nb.value.dim(1);
      const float* A = na.value.data.data();
      const float* W = nb.value.data.data();
      const float* GY = gy.data.data();
      if (na.needs_grad) {
        float* GA = grad_of(n.a).data.data();
        for (int r = 0; r < B; ++r)
          for (int k = 0; k < I; ++k) {
            double acc = 0.0;
            for (int c = 0; c < O; ++c)
              acc += static_cast<double>(GY[r * O + c]) * static_cast<double>(W[k * O + c]);
            GA[r * I + k] += static_cast<float>(acc);
          }
      }
      if (nb.needs_grad) {
        float* GW = grad_of(n.b).data.data();
        for (int k = 0; k < I; ++k)
          for (int c = 0; c < O; ++c) {
            double acc = 0.0;
            for (int r = 0; r < B; ++r)
              acc += static_cast<double>(A[r * I + k]) * static_cast<double>(GY[r * O + c]);
            GW[k * O + c] += static_cast<float>(acc);
          }
      }
      break;
    }
    case Op::add_bias: {
      const Node& nx = at(n.a);
      const Node& nb = at(n.b);
      const int B = nx.value.dim(0), O = nx.value.dim(1);
      const float* GY = gy.data.data();
      if (nx.needs_grad) {
        float* GX = grad_of(n.a).data.data();
        for (int64_t i = 0; i < static_cast<int64_t>(B) * O; ++i) GX[i] += GY[i];
      }
      if (nb.needs_grad) {
        float* GB = grad_of(n.b).data.data();
        for (int c = 0; c < O; ++c) {
          double acc = 0.0;
          for (int r = 0; r < B; ++r) acc += GY[r * O + c];
          GB[c] += static_cast<float>(acc);
        }
      }
      break;
    }
    case Op::conv2d: {
      const Node& nx = at(n.a);
      const Node& nw = at(n.b);
      const int stride = n.p0, pad = n.p1;
      const int B = nx.value.dim(0), C = nx.value.dim(1), H = nx.value.dim(2),
                W = nx.value.dim(3);
      const int OC = nw.value.dim(0), KH = nw.value.dim(2), KW = nw.value.dim(3);
      const int OH = n.value.dim(2), OW = n.value.dim(3);
      const float* X = nx.value.data.data();
      const float* K = nw.value.data.data();
      const float* GY = gy.data.data();
      const auto yi = [&](int b, int oc, int oh, int ow) {
        return ((static_cast<int64_t>(b) * OC + oc) * OH + oh) * OW + ow;
      };
      if (nx.needs_grad) {
        float* GX = grad_of(n.a).data.data();
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c)
            for (int ih = 0; ih < H; ++ih)
              for (int iw = 0; iw < W; ++iw) {
                double acc = 0.0;
                for (int oc = 0; oc < OC; ++oc)
                  for (int kh = 0; kh < KH; ++kh) {
                    const int oh_num = ih + pad - kh;
                    if (oh_num < 0 || oh_num % stride) continue;
                    const int oh = oh_num / stride;
                    if (oh >= OH) continue;
                    for (int kw = 0; kw < KW; ++kw) {
                      const int ow_num = iw + pad - kw;
                      if (ow_num < 0 || ow_num % stride) continue;
                      const int ow = ow_num / stride;
                      if (ow >= OW) continue;
                      acc += static_cast<double>(GY[yi(b, oc, oh, ow)]) *
                             static_cast<double>(
                                 K[((static_cast<int64_t>(oc) * C + c) * KH + kh) * KW + kw]);
                    }
                  }
                GX[((static_cast<int64_t>(b) * C + c) * H + ih) * W + iw] +=
                    static_cast<float>(acc);
              }
      }
      if (nw.needs_grad) {
        float* GW = grad_of(n.b).data.data();
        for (int oc = 0; oc < OC; ++oc)
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                double acc = 0.0;
                for (int b = 0; b < B; ++b)
                  for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    for (int ow = 0; ow < OW; ++ow) {
                      const int iw = ow * stride - pad + kw;
                      if (iw < 0 || iw >= W) continue;
                      acc += static_cast<double>(GY[yi(b, oc, oh, ow)]) *
                             static_cast<double>(
                                 X[((static_cast<int64_t>(b) * C + c) * H + ih) * W + iw]);
                    }
                  }
                GW[((static_cast<int64_t>(oc) * C + c) * KH + kh) * KW + kw] +=
                    static_cast<float>(acc);
              }
      }
      break;
    }
    case Op::bias_channels: {
      const Node& nx = at(n.a);
      const Node& nb = at(n.b);
      const int B = nx.value.dim(0), C = nx.value.dim(1);
      const int64_t HW = static_cast<int64_t>(nx.value.dim(2)) * nx.value.dim(3);
      const float* GY = gy.data.data();
      if (nx.needs_grad) {
        float* GX = grad_of(n.a).data.data();
        for (size_t i = 0; i < gy.data.size(); ++i) GX[i] += GY[i];
      }
      if (nb.needs_grad) {
        float* GB = grad_of(n.b).data.data();
        for (int c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int b = 0; b < B; ++b) {
            const float* p = GY + (static_cast<int64_t>(b) * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) acc += p[i];
          }
          GB[c] += static_cast<float>(acc);
        }
      }
      break;
    }
    case Op::relu: {
      const Node& nx = at(n.a);
      if (!nx.needs_grad) break;
      float* GX = grad_of(n.a).data.data();
      const float* X = nx.value.data.data();
      const float* GY = gy.data.data();
      for (size_t i = 0; i < gy.data.size(); ++i)
        if (X[i] > 0.0f) GX[i] += GY[i];
      break;
    }
    case Op::add: {
      if (at(n.a).needs_grad) {
        float* GA = grad_of(n.a).data.data();
        for (size_t i = 0; i < gy.data.size(); ++i) GA[i] += gy.data[i];
      }
      if (at(n.b).needs_grad) {
        float* GB = grad_of(n.b).data.data();
        for (size_t i = 0; i < gy.data.size(); ++i) GB[i] += gy.data[i];
      }
      break;
    }
    case Op::avg_pool: {
      const Node& nx = at(n.a);
      if (!nx.needs_grad) break;
      const int k = n.p0, stride = n.p1;
      const int B = nx.value.dim(0), C = nx.value.dim(1), H = nx.value.dim(2),
                W = nx.value.dim(3);
      const int OH = n.value.dim(2), OW = n.value.dim(3);
      float* GX = grad_of(n.a).data.data();
      const float* GY = gy.data.data();
      const float inv = 1.0f / (static_cast<float>(k) * k);
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
          for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
              const float g =
                  GY[((static_cast<int64_t>(b) * C + c) * OH + oh) * OW + ow] * inv;
              for (int kh = 0; kh < k; ++kh)
                for (int kw = 0; kw < k; ++kw)
                  GX[((static_cast<int64_t>(b) * C + c) * H + oh * stride + kh) * W +
                     ow * stride + kw] += g;
            }
      break;
    }
    case Op::flatten: {
      const Node& nx = at(n.a);
      if (!nx.needs_grad) break;
      float* GX = grad_of(n.a).data.data();
      for (size_t i = 0; i < gy.data.size(); ++i) GX[i] += gy.data[i];
      break;
    }
    case Op::softmax_xent: {
      const Node& nl = at(n.a);
      if (!nl.needs_grad) break;
      const int B = nl.value.dim(0), C = nl.value.dim(1);
      float* GL = grad_of(n.a).data.data();
      const float gscale = gy.data[0] / static_cast<float>(B);
      for (int r = 0; r < B; ++r)
        for (int c = 0; c < C; ++c) {
          float g = n.probs[static_cast<size_t>(r) * C + c];
          if (c == n.labels[static_cast<size_t>(r)]) g -= 1.0f;
          GL[static_cast<size_t>(r) * C + c] += g * gscale;
        }
      break;
    }
    case Op::leaf:
      break;
  }
}

void Graph::reset() {
  nodes_.clear();
  backward_done_ = false;
  tag_.clear();
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ArgumentError("argmax_rows expects (B,C)");
  const int B = logits.dim(0), C = logits.dim(1);
  std::vector<int> out(static_cast<size_t>(B));
  for (int r = 0; r < B; ++r) {
    int best = 0;
    float bv = logits.data[static_cast<size_t>(r) * C];
    for (int c = 1; c < C; ++c) {
      const float v = logits.data[static_cast<size_t>(r) * C + c];
      if (v > bv) {
        bv = v;
        best = c;
      }
    }
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

double accuracy_of(const Tensor& logits, std::span<const int> labels) {
  const std::vector<int> pred = argmax_rows(logits);
  if (pred.size() != labels.size())
    throw ArgumentError("accuracy_of: label count mismatch");
  int64_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == labels[i]) ++hits;
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace lth
