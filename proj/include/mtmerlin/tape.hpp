#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace mtmerlin {

/// Dense C x H x W tensor. Convolution weights use C = out channels,
/// H = in channels, W = kernel area.
template <typename S>
struct Tensor {
  int C = 0;
  int H = 0;
  int W = 0;
  std::vector<S> v;

  Tensor() = default;
  Tensor(int c, int h, int w, S fill = S(0)) : C(c), H(h), W(w), v(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const { return v.size(); }
  S* channel(int c) { return v.data() + static_cast<std::size_t>(c) * H * W; }
  const S* channel(int c) const { return v.data() + static_cast<std::size_t>(c) * H * W; }
  bool same_shape(const Tensor& o) const { return C == o.C && H == o.H && W == o.W; }
};

/// Reverse-mode recording of one forward pass over a fixed op set.
///
/// Nodes are appended in evaluation order, so the reverse sweep visits each
/// node once, after every consumer has added its contribution to the node's
/// gradient. A tape can be swept once; a second sweep throws StaleTape.
template <typename S>
class Tape {
 public:
  using NodeId = int;

  NodeId input(Tensor<S> value);
  /// Leaf for trainable tensor `index`; its gradient is returned by backward.
  NodeId parameter(int index, Tensor<S> value);

  /// Same-size 3x3 (or any odd k) convolution with zero padding. weight is
  /// (Cout, Cin, k*k).
  NodeId conv2d(NodeId x, NodeId weight);
  /// Adds a per-channel bias (C, 1, 1).
  NodeId bias(NodeId x, NodeId b);
  NodeId leaky_relu(NodeId x, S slope);
  NodeId maxpool2(NodeId x);
  NodeId upsample2(NodeId x);
  NodeId concat(NodeId a, NodeId b);
  NodeId exp(NodeId x);
  /// y[c] = x[c] * scale[c] + shift[c]; constants, no gradient.
  NodeId affine(NodeId x, std::vector<S> scale, std::vector<S> shift);

  const Tensor<S>& value(NodeId id) const { return nodes_[id].value; }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool consumed() const { return consumed_; }

  /// Seeds d(output) = upstream and sweeps backwards. Returns one gradient per
  /// parameter index in [0, param_count); unused parameters get zeros.
  std::vector<Tensor<S>> backward(NodeId output, const Tensor<S>& upstream, int param_count);

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    std::function<void(Tape&, NodeId)> back;
    int param_index = -1;
    bool needs_grad = false;
  };

  NodeId push(Tensor<S> value, bool needs_grad, std::function<void(Tape&, NodeId)> back);
  Tensor<S>& grad(NodeId id);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mtmerlin
