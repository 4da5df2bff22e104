#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lth/common.hpp"

namespace lth {

// Dense row-major float32 tensor. Values are stored in 32-bit precision;
// every reduction (dot products, means) accumulates in 64-bit.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<float> d, bool rg = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<float> values,
                            bool requires_grad = false);

  int64_t numel() const;
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// ----------------------------------------------------------------------
// Reverse-mode autodiff tape.
//
// One Graph records one forward pass; backward() walks the tape in
// reverse creation order, which is a valid topological order by
// construction. All accumulation is sequential with fixed ordering, so
// identical inputs give bit-identical outputs. Calling backward() twice
// without reset() is a state error. Tensor values are immutable once an
// op has written them.
// ----------------------------------------------------------------------
class Graph {
 public:
  // Every op validates operand shapes (ConfigError) and checks its output
  // for non-finite values (NumericError naming the op and the current tag).
  int leaf(Tensor t);
  int matmul(int a, int b);                    // (B,I) x (I,O) -> (B,O)
  int add_bias(int x, int b);                  // (B,O) + (O)
  int conv2d(int x, int w, int stride, int pad);  // (B,C,H,W) * (O,C,kh,kw)
  int bias_channels(int x, int b);             // (B,C,H,W) + (C)
  int relu(int x);
  int add(int a, int b);                       // elementwise, same shape
  int avg_pool(int x, int k, int stride);      // square window
  int flatten(int x);                          // (B,...) -> (B, prod)
  // Fused softmax + mean cross-entropy; returns a scalar node.
  int softmax_cross_entropy(int logits, std::vector<int> labels);

  void backward(int loss_node);

  const Tensor& value(int node) const;
  // Gradient of the last backward() w.r.t. this node. Nodes that did not
  // participate in the loss get an all-zero gradient of matching shape.
  const Tensor& grad(int node) const;

  // Diagnostic label attached to nodes created while the tag is set
  // (model layers set this so numeric errors can name the layer).
  void set_tag(std::string tag) { tag_ = std::move(tag); }

  void reset();
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    leaf,
    matmul,
    add_bias,
    conv2d,
    bias_channels,
    relu,
    add,
    avg_pool,
    flatten,
    softmax_xent,
  };

  struct Node {
    Tensor value;
    mutable Tensor grad_store;
    Op op = Op::leaf;
    int a = -1;
    int b = -1;
    int p0 = 0;  // stride / kernel
    int p1 = 0;  // pad / stride
    bool needs_grad = false;
    std::vector<int> labels;   // softmax_xent only
    std::vector<float> probs;  // cached softmax, softmax_xent only
    std::string tag;
  };

  int push(Node n);
  const Node& at(int id) const;
  Tensor& grad_of(int id);
  void check_finite(const Tensor& t, const char* op_name) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::string tag_;
};

// Index of the max logit per row; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);
// Fraction of rows whose argmax equals the label.
double accuracy_of(const Tensor& logits, std::span<const int> labels);

}  // namespace lth
