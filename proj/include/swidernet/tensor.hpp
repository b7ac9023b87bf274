#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace swidernet {

// Dense rank-4 tensor, row-major (n, c, h, w).
template <typename T>
struct TensorT {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  TensorT() = default;
  TensorT(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("tensor extents must be nonnegative");
    data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }

  std::size_t size() const { return data.size(); }

  std::size_t index(int i, int j, int y, int x) const {
    return ((static_cast<std::size_t>(i) * c + j) * h + y) * w + x;
  }
  T& at(int i, int j, int y, int x) { return data[index(i, j, y, x)]; }
  const T& at(int i, int j, int y, int x) const { return data[index(i, j, y, x)]; }

  bool same_shape(const TensorT& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  std::string shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }
};

using Tensor = TensorT<float>;

template <typename T>
struct ConvKernelT {
  TensorT<T> weights;       // (out_channels, in_channels/groups, kh, kw)
  std::vector<T> bias;      // empty -> no bias
  int stride = 1;
  int rate = 1;             // atrous rate
  int pad_h = 0, pad_w = 0;
  int groups = 1;

  int out_channels() const { return weights.n; }
  int in_channels() const { return weights.c * groups; }
  int kh() const { return weights.h; }
  int kw() const { return weights.w; }
};

using ConvKernel = ConvKernelT<float>;

// pad that keeps stride-1 convs size-preserving; for stride 2 the same pad
// yields out = ceil(in / 2).
inline int same_padding(int k, int rate) { return rate * (k - 1) / 2; }

inline int conv_out_extent(int in, int k, int stride, int rate, int pad) {
  return (in + 2 * pad - rate * (k - 1) - 1) / stride + 1;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvKernelT<T>& k) {
  if (x.c != k.in_channels())
    throw std::invalid_argument("conv2d: input has " + std::to_string(x.c) +
                                " channels, kernel expects " +
                                std::to_string(k.in_channels()));
  if (k.groups < 1 || x.c % k.groups != 0 || k.out_channels() % k.groups != 0)
    throw std::invalid_argument("conv2d: bad group count");
  if (k.stride < 1 || k.rate < 1)
    throw std::invalid_argument("conv2d: stride and rate must be positive");
  const int oh = conv_out_extent(x.h, k.kh(), k.stride, k.rate, k.pad_h);
  const int ow = conv_out_extent(x.w, k.kw(), k.stride, k.rate, k.pad_w);
  if (oh <= 0 || ow <= 0)
    throw std::invalid_argument("conv2d: degenerate output shape " +
                                std::to_string(oh) + "x" + std::to_string(ow));
  const int oc = k.out_channels();
  const int icg = k.weights.c;  // in channels per group
  const int ocg = oc / k.groups;
  TensorT<T> out(x.n, oc, oh, ow);
  for (int b = 0; b < x.n; ++b) {
    for (int o = 0; o < oc; ++o) {
      const int g = o / ocg;
      const T bias = k.bias.empty() ? T(0) : k.bias[o];
      for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * k.stride - k.pad_h;
        for (int ox = 0; ox < ow; ++ox) {
          const int ix0 = ox * k.stride - k.pad_w;
          T acc = bias;
          for (int ci = 0; ci < icg; ++ci) {
            const int ic = g * icg + ci;
            for (int ky = 0; ky < k.kh(); ++ky) {
              const int iy = iy0 + ky * k.rate;
              if (iy < 0 || iy >= x.h) continue;
              const T* xrow = &x.data[x.index(b, ic, iy, 0)];
              const T* wrow = &k.weights.data[k.weights.index(o, ci, ky, 0)];
              for (int kx = 0; kx < k.kw(); ++kx) {
                const int ix = ix0 + kx * k.rate;
                if (ix < 0 || ix >= x.w) continue;
                acc += xrow[ix] * wrow[kx];
              }
            }
          }
          out.at(b, o, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

// Zero-padded window mean; padding excluded from the divisor.
template <typename T>
TensorT<T> avg_pool2d(const TensorT<T>& x, int window, int stride, int pad) {
  if (window < 1 || stride < 1)
    throw std::invalid_argument("avg_pool2d: window and stride must be positive");
  const int oh = conv_out_extent(x.h, window, stride, 1, pad);
  const int ow = conv_out_extent(x.w, window, stride, 1, pad);
  if (oh <= 0 || ow <= 0)
    throw std::invalid_argument("avg_pool2d: degenerate output shape");
  TensorT<T> out(x.n, x.c, oh, ow);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const int y0 = oy * stride - pad, x0 = ox * stride - pad;
          T acc = 0;
          int count = 0;
          for (int ky = 0; ky < window; ++ky) {
            const int iy = y0 + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < window; ++kx) {
              const int ix = x0 + kx;
              if (ix < 0 || ix >= x.w) continue;
              acc += x.at(b, ch, iy, ix);
              ++count;
            }
          }
          out.at(b, ch, oy, ox) = count > 0 ? acc / static_cast<T>(count) : T(0);
        }
  return out;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  if (x.h < 1 || x.w < 1)
    throw std::invalid_argument("global_avg_pool: empty spatial extent");
  TensorT<T> out(x.n, x.c, 1, 1);
  const T inv = T(1) / static_cast<T>(x.h * x.w);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch) {
      T acc = 0;
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) acc += x.at(b, ch, y, xx);
      out.at(b, ch, 0, 0) = acc * inv;
    }
  return out;
}

// z: (n, c, 1, 1); W: (c_out, c) stored as a rank-4 (c_out, c, 1, 1) tensor.
template <typename T>
TensorT<T> fully_connected(const TensorT<T>& z, const TensorT<T>& W,
                           const std::vector<T>& bias = {}) {
  if (z.h != 1 || z.w != 1)
    throw std::invalid_argument("fully_connected: input must be (n,c,1,1)");
  if (W.c != z.c)
    throw std::invalid_argument("fully_connected: weight inner dim " +
                                std::to_string(W.c) + " vs input channels " +
                                std::to_string(z.c));
  if (!bias.empty() && static_cast<int>(bias.size()) != W.n)
    throw std::invalid_argument("fully_connected: bias length mismatch");
  TensorT<T> out(z.n, W.n, 1, 1);
  for (int b = 0; b < z.n; ++b)
    for (int o = 0; o < W.n; ++o) {
      T acc = bias.empty() ? T(0) : bias[o];
      for (int i = 0; i < z.c; ++i) acc += W.at(o, i, 0, 0) * z.at(b, i, 0, 0);
      out.at(b, o, 0, 0) = acc;
    }
  return out;
}

enum class Activation { relu, relu6, sigmoid, hard_sigmoid };

template <typename T>
T apply_activation(Activation kind, T v) {
  switch (kind) {
    case Activation::relu: return v > T(0) ? v : T(0);
    case Activation::relu6: return std::min(std::max(v, T(0)), T(6));
    case Activation::sigmoid: return T(1) / (T(1) + std::exp(-v));
    case Activation::hard_sigmoid:
      return std::min(std::max(v + T(3), T(0)), T(6)) / T(6);
  }
  return v;
}

template <typename T>
TensorT<T> activation(Activation kind, const TensorT<T>& x) {
  TensorT<T> out = x;
  for (auto& v : out.data) v = apply_activation(kind, v);
  return out;
}

template <typename T>
TensorT<T> batch_norm_inference(const TensorT<T>& x, const std::vector<T>& mean,
                                const std::vector<T>& var,
                                const std::vector<T>& gamma,
                                const std::vector<T>& beta, T eps) {
  const auto c = static_cast<std::size_t>(x.c);
  if (mean.size() != c || var.size() != c || gamma.size() != c || beta.size() != c)
    throw std::invalid_argument("batch_norm_inference: parameter length mismatch");
  for (T v : var)
    if (v < T(0)) throw std::invalid_argument("batch_norm_inference: negative variance");
  TensorT<T> out(x.n, x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    const T scale = gamma[ch] / std::sqrt(var[ch] + eps);
    const T shift = beta[ch] - mean[ch] * scale;
    for (int b = 0; b < x.n; ++b)
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
          out.at(b, ch, y, xx) = x.at(b, ch, y, xx) * scale + shift;
  }
  return out;
}

// align-corners-false convention; resizing to the same size is the identity.
template <typename T>
TensorT<T> bilinear_resize(const TensorT<T>& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bilinear_resize: output extents must be >= 1");
  if (out_h == x.h && out_w == x.w) return x;
  TensorT<T> out(x.n, x.c, out_h, out_w);
  const double sy = static_cast<double>(x.h) / out_h;
  const double sx = static_cast<double>(x.w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::max(0.0, std::min(fy, static_cast<double>(x.h - 1)));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, x.h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::max(0.0, std::min(fx, static_cast<double>(x.w - 1)));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, x.w - 1);
      const double wx = fx - x0;
      for (int b = 0; b < x.n; ++b)
        for (int ch = 0; ch < x.c; ++ch) {
          const double top = (1 - wx) * x.at(b, ch, y0, x0) + wx * x.at(b, ch, y0, x1);
          const double bot = (1 - wx) * x.at(b, ch, y1, x0) + wx * x.at(b, ch, y1, x1);
          out.at(b, ch, oy, ox) = static_cast<T>((1 - wy) * top + wy * bot);
        }
    }
  }
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  TensorT<T> out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

// x * s, s shaped (n, c, 1, 1), broadcast over the spatial extent.
template <typename T>
TensorT<T> scale_channels(const TensorT<T>& x, const TensorT<T>& s) {
  if (s.n != x.n || s.c != x.c || s.h != 1 || s.w != 1)
    throw std::invalid_argument("scale_channels: scale must be (n,c,1,1)");
  TensorT<T> out = x;
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch) {
      const T f = s.at(b, ch, 0, 0);
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) out.at(b, ch, y, xx) *= f;
    }
  return out;
}

// x + v, v shaped (n, c, 1, 1), broadcast over the spatial extent.
template <typename T>
TensorT<T> add_channels(const TensorT<T>& x, const TensorT<T>& v) {
  if (v.n != x.n || v.c != x.c || v.h != 1 || v.w != 1)
    throw std::invalid_argument("add_channels: addend must be (n,c,1,1)");
  TensorT<T> out = x;
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch) {
      const T f = v.at(b, ch, 0, 0);
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) out.at(b, ch, y, xx) += f;
    }
  return out;
}

template <typename T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: empty input");
  int c_total = 0;
  for (const auto& p : parts) {
    if (p.n != parts[0].n || p.h != parts[0].h || p.w != parts[0].w)
      throw std::invalid_argument("concat_channels: spatial/batch mismatch");
    c_total += p.c;
  }
  TensorT<T> out(parts[0].n, c_total, parts[0].h, parts[0].w);
  int c_off = 0;
  for (const auto& p : parts) {
    for (int b = 0; b < p.n; ++b)
      for (int ch = 0; ch < p.c; ++ch)
        for (int y = 0; y < p.h; ++y)
          for (int xx = 0; xx < p.w; ++xx)
            out.at(b, c_off + ch, y, xx) = p.at(b, ch, y, xx);
    c_off += p.c;
  }
  return out;
}

template <typename T>
bool all_finite(const TensorT<T>& x) {
  for (T v : x.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace swidernet
