#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "swidernet/tensor.hpp"

namespace swidernet {

// Squeeze-and-Excitation with a single fully connected layer:
// s = hard_sigmoid(W z), z = global average pool; output = x scaled by s.
template <typename T>
struct SeParamsT {
  TensorT<T> W;  // (c, c, 1, 1), no bias
};
using SeParams = SeParamsT<float>;

template <typename T>
TensorT<T> se_module(const TensorT<T>& x, const SeParamsT<T>& p) {
  if (p.W.n != x.c || p.W.c != x.c)
    throw std::invalid_argument("se_module: W must be square in the channel dim");
  TensorT<T> s = activation(Activation::hard_sigmoid,
                            fully_connected(global_avg_pool(x), p.W));
  return scale_channels(x, s);
}

// Global context: x + broadcast(FC(GAP(x))). Lightweight, near-identity at
// zero weights.
template <typename T>
struct GlobalContextParamsT {
  TensorT<T> W;         // (c, c, 1, 1)
  std::vector<T> bias;  // length c
};
using GlobalContextParams = GlobalContextParamsT<float>;

template <typename T>
TensorT<T> global_context(const TensorT<T>& x, const GlobalContextParamsT<T>& p) {
  if (p.W.n != x.c || p.W.c != x.c)
    throw std::invalid_argument("global_context: W must be square in the channel dim");
  TensorT<T> v = fully_connected(global_avg_pool(x), p.W, p.bias);
  return add_channels(x, v);
}

// Switchable Atrous Convolution: the same 3x3 weights evaluated at rates 1
// and 3, merged per position by a switch S = sigmoid(1x1 conv(5x5 avg pool)).
// Global context modules wrap the operation on both sides.
template <typename T>
struct SacParamsT {
  TensorT<T> shared_weights;  // (c_out, c_in, 3, 3), used by both branches
  TensorT<T> switch_weights;  // (1, c_in, 1, 1)
  std::vector<T> switch_bias; // length 1
  GlobalContextParamsT<T> pre_context;   // over c_in
  GlobalContextParamsT<T> post_context;  // over c_out
  int unit_rate = 1;  // multiplies both branch rates (multi-grid composition)
};
using SacParams = SacParamsT<float>;

template <typename T>
TensorT<T> sac(const TensorT<T>& x, const SacParamsT<T>& p) {
  if (p.shared_weights.c != x.c)
    throw std::invalid_argument("sac: channel mismatch");
  TensorT<T> xp = global_context(x, p.pre_context);

  ConvKernelT<T> sw;
  sw.weights = p.switch_weights;
  sw.bias = p.switch_bias;
  TensorT<T> s = activation(Activation::sigmoid,
                            conv2d(avg_pool2d(xp, 5, 1, 2), sw));

  ConvKernelT<T> k1;
  k1.weights = p.shared_weights;
  k1.rate = p.unit_rate;
  k1.pad_h = k1.pad_w = same_padding(3, k1.rate);
  ConvKernelT<T> k3;
  k3.weights = p.shared_weights;
  k3.rate = 3 * p.unit_rate;
  k3.pad_h = k3.pad_w = same_padding(3, k3.rate);
  TensorT<T> y1 = conv2d(xp, k1);
  TensorT<T> y3 = conv2d(xp, k3);

  TensorT<T> merged(y1.n, y1.c, y1.h, y1.w);
  for (int b = 0; b < y1.n; ++b)
    for (int c = 0; c < y1.c; ++c)
      for (int y = 0; y < y1.h; ++y)
        for (int xx = 0; xx < y1.w; ++xx) {
          const T g = s.at(b, 0, y, xx);
          merged.at(b, c, y, xx) =
              (T(1) - g) * y1.at(b, c, y, xx) + g * y3.at(b, c, y, xx);
        }
  return global_context(merged, p.post_context);
}

template <typename T>
struct BnParamsT {
  std::vector<T> mean, var, gamma, beta;
  T eps = T(1e-5);

  static BnParamsT identity(int c) {
    BnParamsT p;
    p.mean.assign(c, T(0));
    p.var.assign(c, T(1));
    p.gamma.assign(c, T(1));
    p.beta.assign(c, T(0));
    return p;
  }
};
using BnParams = BnParamsT<float>;

template <typename T>
TensorT<T> batch_norm_inference(const TensorT<T>& x, const BnParamsT<T>& p) {
  return batch_norm_inference(x, p.mean, p.var, p.gamma, p.beta, p.eps);
}

enum class BlockKind { basic, bottleneck };

struct BlockPlan {
  BlockKind kind = BlockKind::basic;
  int in_channels = 0;
  int mid_channels = 0;  // 3x3 width; equals out_channels for basic blocks
  int out_channels = 0;
  int stride = 1;
  int rate = 1;  // unit rate x multi-grid factor, applied to the 3x3 conv
  bool use_se = false;
  bool use_sac = false;
  double survival_rate = 1.0;

  bool needs_projection() const {
    return in_channels != out_channels || stride != 1;
  }
};

// Pre-activation residual block parameters. convs/bns are ordered along the
// branch; when use_sac is set the 3x3 conv slot is taken by `sac_params`.
template <typename T>
struct ResidualParamsT {
  std::vector<ConvKernelT<T>> convs;
  std::vector<BnParamsT<T>> bns;
  std::optional<ConvKernelT<T>> shortcut;
  std::optional<SeParamsT<T>> se;
  std::optional<SacParamsT<T>> sac_params;
};
using ResidualParams = ResidualParamsT<float>;

template <typename T>
TensorT<T> residual_block(const TensorT<T>& x, const BlockPlan& plan,
                          const ResidualParamsT<T>& params) {
  if (x.c != plan.in_channels)
    throw std::invalid_argument("residual_block: input channel mismatch");
  if (plan.stride > 2 || plan.stride < 1)
    throw std::invalid_argument("residual_block: stride must be 1 or 2");
  const int n_convs = plan.kind == BlockKind::basic ? 2 : 3;
  const int sac_slot = plan.kind == BlockKind::basic ? 1 : 1;  // the 3x3 conv
  if (static_cast<int>(params.bns.size()) != n_convs)
    throw std::invalid_argument("residual_block: expected one BN per conv");

  TensorT<T> t = x;
  int conv_i = 0;
  for (int i = 0; i < n_convs; ++i) {
    t = batch_norm_inference(t, params.bns[i]);
    t = activation(Activation::relu, t);
    if (plan.use_sac && i == sac_slot) {
      if (!params.sac_params)
        throw std::invalid_argument("residual_block: missing SAC parameters");
      t = sac(t, *params.sac_params);
    } else {
      t = conv2d(t, params.convs[conv_i]);
      ++conv_i;
    }
  }
  if (plan.use_se) {
    if (!params.se)
      throw std::invalid_argument("residual_block: missing SE parameters");
    t = se_module(t, *params.se);
  }

  TensorT<T> shortcut = x;
  if (params.shortcut) shortcut = conv2d(x, *params.shortcut);
  if (!shortcut.same_shape(t))
    throw std::invalid_argument("residual_block: branch/shortcut shape mismatch");
  return add(shortcut, t);
}

enum class RunMode { inference, train };

// Stochastic depth with the scale-at-train convention: inference is the
// identity; training keeps the branch with probability p and rescales by 1/p,
// independently per batch item.
template <typename T, typename Rng>
TensorT<T> drop_path(const TensorT<T>& branch, double survival_rate,
                     RunMode mode, Rng& rng) {
  if (survival_rate <= 0.0 || survival_rate > 1.0)
    throw std::invalid_argument("drop_path: survival rate must be in (0, 1]");
  if (mode == RunMode::inference) return branch;
  TensorT<T> out = branch;
  std::bernoulli_distribution keep(survival_rate);
  const T scale = static_cast<T>(1.0 / survival_rate);
  for (int b = 0; b < branch.n; ++b) {
    const T f = keep(rng) ? scale : T(0);
    for (int c = 0; c < branch.c; ++c)
      for (int y = 0; y < branch.h; ++y)
        for (int xx = 0; xx < branch.w; ++xx) out.at(b, c, y, xx) *= f;
  }
  return out;
}

}  // namespace swidernet
