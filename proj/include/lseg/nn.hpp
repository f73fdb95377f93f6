#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lseg::nn {

// Dense row-major tensor of doubles. Double precision keeps the
// finite-difference gradient checks meaningful.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double v);

  int numel() const;
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

struct Node {
  Tensor value;
  Tensor grad;  // same shape, starts zeroed
  std::string name;

  explicit Node(Tensor v) : value(std::move(v)), grad(Tensor::zeros(value.shape)) {}
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

using NodePtr = std::shared_ptr<Node>;

inline NodePtr make_node(Tensor v) { return std::make_shared<Node>(std::move(v)); }

// Tape of backward closures. Each forward op validates shapes, produces a
// fresh node and records how to push gradients to its parents. Reusing one
// node in several ops (shared Siamese weights) accumulates naturally.
class Graph {
 public:
  NodePtr input(Tensor v) { return make_node(std::move(v)); }

  // Seeds loss->grad with 1 and replays the tape in reverse.
  void backward(const NodePtr& loss);

  void clear() { tape_.clear(); }
  size_t tape_size() const { return tape_.size(); }

  // x: (Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout)
  NodePtr conv2d(NodePtr x, NodePtr w, NodePtr b, int stride, int dilation, int pad);
  // x: (C), w: (k), b: (1); zero padding k/2
  NodePtr conv1d(NodePtr x, NodePtr w, NodePtr b);
  // x: (In), w: (Out,In), b: (Out)
  NodePtr linear(NodePtr x, NodePtr w, NodePtr b);

  NodePtr relu(NodePtr x);
  NodePtr sigmoid(NodePtr x);
  NodePtr add(NodePtr a, NodePtr b);
  NodePtr mul(NodePtr a, NodePtr b);

  NodePtr scale_channels(NodePtr x, NodePtr gate);  // (C,H,W) * (C)
  NodePtr scale_spatial(NodePtr x, NodePtr map);    // (C,H,W) * (H,W)
  NodePtr scale_by_scalar(NodePtr x, NodePtr s);    // (any) * (1)
  NodePtr scale_const(NodePtr x, double a);

  NodePtr global_avg_pool(NodePtr x);  // (C,H,W) -> (C)
  NodePtr channel_mean(NodePtr x);     // (C,H,W) -> (H,W)

  // (H,W) -> (H,W); (x - min) / (max - min), all-ones when max == min
  NodePtr minmax_normalize(NodePtr x);

  // half-pixel-centered bilinear upsampling by an integer factor
  NodePtr upsample_bilinear(NodePtr x, int factor);

  NodePtr concat_channels(NodePtr a, NodePtr b);
  NodePtr reshape(NodePtr x, std::vector<int> shape);

  NodePtr matmul(NodePtr a, NodePtr b);  // (m,k) x (k,n)
  NodePtr transpose2d(NodePtr a);
  NodePtr softmax_rows(NodePtr a);

  NodePtr mean_all(NodePtr x);                  // -> (1)
  NodePtr dot(NodePtr x, const Tensor& w);      // fixed projection -> (1)
  // mean BCE with predictions clamped into [eps, 1-eps]
  NodePtr bce_mean(NodePtr pred, const Tensor& target, double clamp_eps = 1e-7);

 private:
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }
  std::vector<std::function<void()>> tape_;
};

// Output spatial size of a convolution along one axis.
int conv_out_size(int in, int kernel, int stride, int dilation, int pad);

}  // namespace lseg::nn
