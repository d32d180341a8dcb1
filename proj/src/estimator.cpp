#include "mtmerlin/estimator.hpp"

#include <cmath>
#include <string>

#include "mtmerlin/error.hpp"

namespace mtmerlin {

namespace {

struct ConvLayer {
  std::string name;
  int cin;
  int cout;
};

int level_width(const ArchSpec& a, int level) { return level == 0 ? a.base_width : 2 * a.base_width; }

std::vector<ConvLayer> layer_plan(const ArchSpec& a) {
  std::vector<ConvLayer> plan;
  if (a.base_width == 0) return plan;
  const auto w = [&](int l) { return level_width(a, l); };
  plan.push_back({"enc0_conv1", a.in_channels, w(0)});
  plan.push_back({"enc0_conv2", w(0), w(0)});
  for (int l = 1; l < a.depth; ++l) {
    plan.push_back({"enc" + std::to_string(l) + "_conv1", w(l - 1), w(l)});
    plan.push_back({"enc" + std::to_string(l) + "_conv2", w(l), w(l)});
  }
  if (a.depth >= 1) plan.push_back({"enc" + std::to_string(a.depth) + "_conv1", w(a.depth - 1), w(a.depth)});
  for (int l = a.depth - 1; l >= 0; --l) {
    plan.push_back({"dec" + std::to_string(l) + "_up", w(l + 1), w(l)});
    plan.push_back({"dec" + std::to_string(l) + "_conv", 2 * w(l), w(l)});
  }
  plan.push_back({"head", w(0), 1});
  return plan;
}

template <typename S>
Tensor<S> to_tensor(const ParamTensor& p) {
  Tensor<S> t;
  if (p.shape.size() == 4) t = Tensor<S>(p.shape[0], p.shape[1], p.shape[2] * p.shape[3]);
  else t = Tensor<S>(p.shape[0], 1, 1);
  for (std::size_t i = 0; i < p.data.size(); ++i) t.v[i] = static_cast<S>(p.data[i]);
  return t;
}

int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
  return i;
}

int padded_extent(int n, int depth) {
  const int m = 1 << depth;
  return (n + m - 1) / m * m;
}

}  // namespace

void validate(const ArchSpec& a) {
  if (a.in_channels < 1) throw Error(ErrorCode::InvalidArgument, "architecture needs at least one input channel");
  if (a.depth < 0 || a.depth > 6) throw Error(ErrorCode::InvalidArgument, "architecture depth must lie in [0, 6]");
  if (a.base_width < 0) throw Error(ErrorCode::InvalidArgument, "base width must be >= 0");
  if (a.kernel < 1 || a.kernel % 2 == 0) throw Error(ErrorCode::InvalidArgument, "kernel must be odd");
  if (!(a.leaky_slope >= 0.0 && a.leaky_slope < 1.0)) throw Error(ErrorCode::InvalidArgument, "leaky slope in [0, 1)");
}

std::size_t EstimatorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

EstimatorParams init_params(const ArchSpec& arch, const RngHandle& rng) {
  validate(arch);
  EstimatorParams p;
  p.arch = arch;
  RngHandle g = rng;
  const int k = arch.kernel;
  for (const auto& layer : layer_plan(arch)) {
    ParamTensor w{layer.name + ".weight", {layer.cout, layer.cin, k, k}, {}};
    const double sd = std::sqrt(2.0 / (layer.cin * k * k));
    w.data.resize(static_cast<std::size_t>(layer.cout) * layer.cin * k * k);
    for (auto& v : w.data) v = sd * g.normal();
    p.tensors.push_back(std::move(w));
    p.tensors.push_back({layer.name + ".bias", {layer.cout}, std::vector<double>(layer.cout, 0.0)});
  }
  if (arch.base_width == 0) p.tensors.push_back({"output.bias", {1}, {0.0}});
  p.norm.shift.assign(arch.in_channels, 0.0);
  p.norm.scale.assign(arch.in_channels, 1.0);
  return p;
}

std::vector<RealImage> side_channels(const InputSets& in, Side side) {
  std::vector<RealImage> ch;
  ch.push_back(side == Side::A ? in.a_ref : in.b_ref);
  ch.insert(ch.end(), in.aux.begin(), in.aux.end());
  return ch;
}

template <typename S>
ForwardPass<S> forward(const EstimatorParams& params, std::span<const RealImage> channels) {
  const ArchSpec& a = params.arch;
  if (static_cast<int>(channels.size()) != a.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "estimator expects " + std::to_string(a.in_channels) + " channels, got " +
                                              std::to_string(channels.size()));
  }
  const int H = channels[0].H, W = channels[0].W;
  for (const auto& c : channels) {
    if (c.H != H || c.W != W) throw Error(ErrorCode::ShapeMismatch, "input channels differ in extent");
  }
  if (static_cast<int>(params.norm.scale.size()) != a.in_channels ||
      static_cast<int>(params.norm.shift.size()) != a.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "normalization does not match channel count");
  }

  ForwardPass<S> pass;
  pass.version = params.version;
  pass.pad_H = padded_extent(H, a.base_width == 0 ? 0 : a.depth);
  pass.pad_W = padded_extent(W, a.base_width == 0 ? 0 : a.depth);
  Tape<S>& tape = pass.tape;

  Tensor<S> x(a.in_channels, pass.pad_H, pass.pad_W);
  for (int c = 0; c < a.in_channels; ++c) {
    S* dst = x.channel(c);
    for (int y = 0; y < pass.pad_H; ++y) {
      for (int xx = 0; xx < pass.pad_W; ++xx) dst[y * pass.pad_W + xx] = static_cast<S>(channels[c](mirror(y, H), mirror(xx, W)));
    }
  }
  std::vector<S> scale(a.in_channels), shift(a.in_channels);
  for (int c = 0; c < a.in_channels; ++c) {
    scale[c] = static_cast<S>(params.norm.scale[c]);
    shift[c] = static_cast<S>(-params.norm.shift[c] * params.norm.scale[c]);
  }
  int h = tape.affine(tape.input(std::move(x)), std::move(scale), std::move(shift));

  std::size_t next = 0;
  auto param = [&]() {
    if (next >= params.tensors.size()) throw Error(ErrorCode::ShapeMismatch, "parameter list shorter than architecture");
    const int idx = static_cast<int>(next++);
    return tape.parameter(idx, to_tensor<S>(params.tensors[idx]));
  };
  const S slope = static_cast<S>(a.leaky_slope);
  auto conv = [&](int in, bool activate) {
    const int wgt = param();
    const int b = param();
    int out = tape.bias(tape.conv2d(in, wgt), b);
    return activate ? tape.leaky_relu(out, slope) : out;
  };

  int out;
  if (a.base_width == 0) {
    out = tape.bias(tape.input(Tensor<S>(1, pass.pad_H, pass.pad_W)), param());
  } else {
    std::vector<int> skips;
    h = conv(h, true);
    h = conv(h, true);
    skips.push_back(h);
    for (int l = 1; l < a.depth; ++l) {
      h = tape.maxpool2(h);
      h = conv(h, true);
      h = conv(h, true);
      skips.push_back(h);
    }
    if (a.depth >= 1) {
      h = tape.maxpool2(h);
      h = conv(h, true);
    }
    for (int l = a.depth - 1; l >= 0; --l) {
      h = conv(tape.upsample2(h), true);
      h = conv(tape.concat(h, skips[l]), true);
    }
    out = conv(h, false);
  }
  if (next != params.tensors.size()) throw Error(ErrorCode::ShapeMismatch, "parameter list longer than architecture");
  out = tape.affine(out, {S(1)}, {static_cast<S>(params.norm.output_offset)});
  pass.output = out;

  const Tensor<S>& y = tape.value(out);
  pass.w = RealImage(H, W);
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) pass.w(r, c) = static_cast<double>(y.v[static_cast<std::size_t>(r) * pass.pad_W + c]);
  }
  return pass;
}

template <typename S>
std::vector<std::vector<double>> backward(const EstimatorParams& params, ForwardPass<S>& pass,
                                          const RealImage& upstream) {
  if (pass.tape.consumed()) throw Error(ErrorCode::StaleTape, "tape already consumed");
  if (pass.version != params.version) throw Error(ErrorCode::StaleTape, "parameters changed since the forward pass");
  if (!upstream.same_shape(pass.w)) throw Error(ErrorCode::ShapeMismatch, "upstream gradient shape differs from output");
  Tensor<S> up(1, pass.pad_H, pass.pad_W);
  for (int r = 0; r < upstream.H; ++r) {
    for (int c = 0; c < upstream.W; ++c) up.v[static_cast<std::size_t>(r) * pass.pad_W + c] = static_cast<S>(upstream(r, c));
  }
  const int n = static_cast<int>(params.tensors.size());
  auto g = pass.tape.backward(pass.output, up, n);
  std::vector<std::vector<double>> out(n);
  for (int i = 0; i < n; ++i) out[i].assign(g[i].v.begin(), g[i].v.end());
  return out;
}

template ForwardPass<float> forward<float>(const EstimatorParams&, std::span<const RealImage>);
template ForwardPass<double> forward<double>(const EstimatorParams&, std::span<const RealImage>);
template std::vector<std::vector<double>> backward<float>(const EstimatorParams&, ForwardPass<float>&, const RealImage&);
template std::vector<std::vector<double>> backward<double>(const EstimatorParams&, ForwardPass<double>&,
                                                           const RealImage&);

RealImage despeckle(const EstimatorParams& params, const InputSets& inputs) {
  if (inputs.encoding != params.arch.encoding) {
    throw Error(ErrorCode::ShapeMismatch, "auxiliary encoding of the stack differs from the one used in training");
  }
  if (inputs.channels() != params.arch.in_channels) {
    throw Error(ErrorCode::ShapeMismatch,
                "estimator was trained with " + std::to_string(params.arch.in_channels) + " input channels but the stack provides " +
                    std::to_string(inputs.channels()) + "; select " +
                    std::to_string((params.arch.in_channels - 1) / aux_channels_per_date(params.arch.encoding) + 1) +
                    " dates or retrain");
  }
  const auto ca = side_channels(inputs, Side::A);
  const auto cb = side_channels(inputs, Side::B);
  const auto wa = forward<double>(params, ca).w;
  const auto wb = forward<double>(params, cb).w;
  RealImage u(wa.H, wa.W), v(wb.H, wb.W);
  for (std::size_t k = 0; k < u.size(); ++k) {
    u.data[k] = std::exp(wa.data[k]);
    v.data[k] = std::exp(wb.data[k]);
  }
  return combine_estimates(u, v);
}

RealImage despeckle(const EstimatorParams& params, const WhitenedStack& wstack) {
  return despeckle(params, build_input_sets(wstack, params.arch.encoding));
}

}  // namespace mtmerlin
