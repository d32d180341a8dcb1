#include "mtmerlin/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int kernel_side(int area) {
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(area))));
  if (k * k != area || k % 2 == 0) throw Error(ErrorCode::ShapeMismatch, "convolution kernel must be odd and square");
  return k;
}

// col[(c*k + ky)*k + kx][y*W + x] = x[c][y + ky - r][x + kx - r], zero outside.
template <typename S>
void im2col(const Tensor<S>& in, int k, std::vector<S>& col) {
  const int H = in.H, W = in.W, r = k / 2;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  col.assign(static_cast<std::size_t>(in.C) * k * k * HW, S(0));
  for (int c = 0; c < in.C; ++c) {
    const S* src = in.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        S* dst = col.data() + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * HW;
        const int dy = ky - r, dx = kx - r;
        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
        if (x1 <= x0) continue;
        for (int y = std::max(0, -dy); y < std::min(H, H - dy); ++y) {
          std::memcpy(dst + static_cast<std::size_t>(y) * W + x0, src + static_cast<std::size_t>(y + dy) * W + x0 + dx,
                      sizeof(S) * (x1 - x0));
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const std::vector<S>& col, int k, Tensor<S>& out) {
  const int H = out.H, W = out.W, r = k / 2;
  const std::size_t HW = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < out.C; ++c) {
    S* dst = out.channel(c);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const S* src = col.data() + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * HW;
        const int dy = ky - r, dx = kx - r;
        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
        for (int y = std::max(0, -dy); y < std::min(H, H - dy); ++y) {
          const S* s = src + static_cast<std::size_t>(y) * W;
          S* d = dst + static_cast<std::size_t>(y + dy) * W + dx;
          for (int x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
    }
  }
}

}  // namespace

template <typename S>
typename Tape<S>::NodeId Tape<S>::push(Tensor<S> value, bool needs_grad, std::function<void(Tape&, NodeId)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename S>
Tensor<S>& Tape<S>::grad(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor<S>(n.value.C, n.value.H, n.value.W);
  return n.grad;
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::input(Tensor<S> value) {
  return push(std::move(value), false, {});
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::parameter(int index, Tensor<S> value) {
  const NodeId id = push(std::move(value), true, {});
  nodes_[id].param_index = index;
  return id;
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::conv2d(NodeId x, NodeId weight) {
  const Tensor<S>& in = nodes_[x].value;
  const Tensor<S>& w = nodes_[weight].value;
  if (w.H != in.C) throw Error(ErrorCode::ShapeMismatch, "convolution input channels differ from weight");
  const int k = kernel_side(w.W);
  const int HW = in.H * in.W;
  const int K = in.C * k * k;
  std::vector<S> col;
  im2col(in, k, col);
  Tensor<S> out(w.C, in.H, in.W);
  Eigen::Map<RowMat<S>>(out.v.data(), w.C, HW).noalias() =
      Eigen::Map<const RowMat<S>>(w.v.data(), w.C, K) * Eigen::Map<const RowMat<S>>(col.data(), K, HW);
  const bool ng = nodes_[x].needs_grad || nodes_[weight].needs_grad;
  return push(std::move(out), ng, [x, weight, k](Tape& t, NodeId self) {
    const Tensor<S>& in = t.nodes_[x].value;
    const Tensor<S>& w = t.nodes_[weight].value;
    const Tensor<S>& g = t.nodes_[self].grad;
    const int HW = in.H * in.W;
    const int K = in.C * k * k;
    const Eigen::Map<const RowMat<S>> G(g.v.data(), w.C, HW);
    std::vector<S> col;
    if (t.nodes_[weight].needs_grad) {
      im2col(in, k, col);
      Tensor<S>& gw = t.grad(weight);
      Eigen::Map<RowMat<S>>(gw.v.data(), w.C, K).noalias() +=
          G * Eigen::Map<const RowMat<S>>(col.data(), K, HW).transpose();
    }
    if (t.nodes_[x].needs_grad) {
      col.assign(static_cast<std::size_t>(K) * HW, S(0));
      Eigen::Map<RowMat<S>>(col.data(), K, HW).noalias() = Eigen::Map<const RowMat<S>>(w.v.data(), w.C, K).transpose() * G;
      col2im_add(col, k, t.grad(x));
    }
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::bias(NodeId x, NodeId b) {
  const Tensor<S>& in = nodes_[x].value;
  const Tensor<S>& bv = nodes_[b].value;
  if (static_cast<int>(bv.size()) != in.C) throw Error(ErrorCode::ShapeMismatch, "bias length differs from channels");
  Tensor<S> out = in;
  const int HW = in.H * in.W;
  for (int c = 0; c < in.C; ++c) {
    S* p = out.channel(c);
    for (int i = 0; i < HW; ++i) p[i] += bv.v[c];
  }
  const bool ng = nodes_[x].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), ng, [x, b](Tape& t, NodeId self) {
    const Tensor<S>& g = t.nodes_[self].grad;
    const int HW = g.H * g.W;
    if (t.nodes_[b].needs_grad) {
      Tensor<S>& gb = t.grad(b);
      for (int c = 0; c < g.C; ++c) {
        const S* p = g.channel(c);
        S acc = 0;
        for (int i = 0; i < HW; ++i) acc += p[i];
        gb.v[c] += acc;
      }
    }
    if (t.nodes_[x].needs_grad) {
      Tensor<S>& gx = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i];
    }
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::leaky_relu(NodeId x, S slope) {
  Tensor<S> out = nodes_[x].value;
  for (auto& v : out.v) v = v > S(0) ? v : slope * v;
  return push(std::move(out), nodes_[x].needs_grad, [x, slope](Tape& t, NodeId self) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor<S>& in = t.nodes_[x].value;
    const Tensor<S>& g = t.nodes_[self].grad;
    Tensor<S>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.v[i] += in.v[i] > S(0) ? g.v[i] : slope * g.v[i];
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::maxpool2(NodeId x) {
  const Tensor<S>& in = nodes_[x].value;
  if (in.H % 2 != 0 || in.W % 2 != 0) throw Error(ErrorCode::ShapeMismatch, "max-pooling needs even extents");
  const int Ho = in.H / 2, Wo = in.W / 2;
  Tensor<S> out(in.C, Ho, Wo);
  std::vector<int> arg(out.size());
  for (int c = 0; c < in.C; ++c) {
    const S* src = in.channel(c);
    for (int y = 0; y < Ho; ++y) {
      for (int xo = 0; xo < Wo; ++xo) {
        int best = (2 * y) * in.W + 2 * xo;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * in.W + 2 * xo + dx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * Ho + y) * Wo + xo;
        out.v[o] = src[best];
        arg[o] = best;
      }
    }
  }
  return push(std::move(out), nodes_[x].needs_grad, [x, arg = std::move(arg)](Tape& t, NodeId self) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor<S>& g = t.nodes_[self].grad;
    Tensor<S>& gx = t.grad(x);
    const std::size_t plane = static_cast<std::size_t>(g.H) * g.W;
    for (int c = 0; c < g.C; ++c) {
      S* dst = gx.channel(c);
      for (std::size_t i = 0; i < plane; ++i) dst[arg[c * plane + i]] += g.v[c * plane + i];
    }
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::upsample2(NodeId x) {
  const Tensor<S>& in = nodes_[x].value;
  Tensor<S> out(in.C, in.H * 2, in.W * 2);
  for (int c = 0; c < in.C; ++c) {
    const S* src = in.channel(c);
    S* dst = out.channel(c);
    for (int y = 0; y < out.H; ++y) {
      for (int xo = 0; xo < out.W; ++xo) dst[y * out.W + xo] = src[(y / 2) * in.W + xo / 2];
    }
  }
  return push(std::move(out), nodes_[x].needs_grad, [x](Tape& t, NodeId self) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor<S>& g = t.nodes_[self].grad;
    Tensor<S>& gx = t.grad(x);
    for (int c = 0; c < g.C; ++c) {
      const S* src = g.channel(c);
      S* dst = gx.channel(c);
      for (int y = 0; y < g.H; ++y) {
        for (int xo = 0; xo < g.W; ++xo) dst[(y / 2) * gx.W + xo / 2] += src[y * g.W + xo];
      }
    }
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::concat(NodeId a, NodeId b) {
  const Tensor<S>& va = nodes_[a].value;
  const Tensor<S>& vb = nodes_[b].value;
  if (va.H != vb.H || va.W != vb.W) throw Error(ErrorCode::ShapeMismatch, "concatenated tensors differ in extent");
  Tensor<S> out(va.C + vb.C, va.H, va.W);
  std::copy(va.v.begin(), va.v.end(), out.v.begin());
  std::copy(vb.v.begin(), vb.v.end(), out.v.begin() + va.size());
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  return push(std::move(out), ng, [a, b](Tape& t, NodeId self) {
    const Tensor<S>& g = t.nodes_[self].grad;
    const std::size_t na = t.nodes_[a].value.size();
    if (t.nodes_[a].needs_grad) {
      Tensor<S>& ga = t.grad(a);
      for (std::size_t i = 0; i < na; ++i) ga.v[i] += g.v[i];
    }
    if (t.nodes_[b].needs_grad) {
      Tensor<S>& gb = t.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.v[i] += g.v[na + i];
    }
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::exp(NodeId x) {
  Tensor<S> out = nodes_[x].value;
  for (auto& v : out.v) v = std::exp(v);
  return push(std::move(out), nodes_[x].needs_grad, [x](Tape& t, NodeId self) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor<S>& y = t.nodes_[self].value;
    const Tensor<S>& g = t.nodes_[self].grad;
    Tensor<S>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i] * y.v[i];
  });
}

template <typename S>
typename Tape<S>::NodeId Tape<S>::affine(NodeId x, std::vector<S> scale, std::vector<S> shift) {
  const Tensor<S>& in = nodes_[x].value;
  if (static_cast<int>(scale.size()) != in.C || static_cast<int>(shift.size()) != in.C) {
    throw Error(ErrorCode::ShapeMismatch, "affine coefficients differ from channel count");
  }
  Tensor<S> out = in;
  const int HW = in.H * in.W;
  for (int c = 0; c < in.C; ++c) {
    S* p = out.channel(c);
    for (int i = 0; i < HW; ++i) p[i] = p[i] * scale[c] + shift[c];
  }
  return push(std::move(out), nodes_[x].needs_grad, [x, scale = std::move(scale)](Tape& t, NodeId self) {
    if (!t.nodes_[x].needs_grad) return;
    const Tensor<S>& g = t.nodes_[self].grad;
    Tensor<S>& gx = t.grad(x);
    const int HW = g.H * g.W;
    for (int c = 0; c < g.C; ++c) {
      const S* src = g.channel(c);
      S* dst = gx.channel(c);
      for (int i = 0; i < HW; ++i) dst[i] += scale[c] * src[i];
    }
  });
}

template <typename S>
std::vector<Tensor<S>> Tape<S>::backward(NodeId output, const Tensor<S>& upstream, int param_count) {
  if (consumed_) throw Error(ErrorCode::StaleTape, "tape has already been swept");
  if (output < 0 || output >= size()) throw Error(ErrorCode::InvalidArgument, "unknown output node");
  if (!upstream.same_shape(nodes_[output].value)) throw Error(ErrorCode::ShapeMismatch, "upstream gradient shape");
  consumed_ = true;
  grad(output).v = upstream.v;
  for (NodeId id = output; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.size() == 0 || !n.back) continue;
    n.back(*this, id);
    // Interior gradients are released once propagated.
    n.grad = Tensor<S>();
  }
  std::vector<Tensor<S>> grads(param_count);
  for (Node& n : nodes_) {
    if (n.param_index < 0 || n.param_index >= param_count) continue;
    if (n.grad.size() == n.value.size()) {
      if (grads[n.param_index].size() == 0) {
        grads[n.param_index] = std::move(n.grad);
      } else {
        for (std::size_t i = 0; i < n.grad.size(); ++i) grads[n.param_index].v[i] += n.grad.v[i];
      }
    } else if (grads[n.param_index].size() == 0) {
      grads[n.param_index] = Tensor<S>(n.value.C, n.value.H, n.value.W);
    }
  }
  return grads;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mtmerlin
