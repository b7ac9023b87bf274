#include "swidernet/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace swidernet::ad {

Var Tape::push(DTensor value, std::function<void(Tape&)> back) {
  Node node;
  node.grad = DTensor(value.n, value.c, value.h, value.w, 0.0);
  node.value = std::move(value);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(DTensor value) { return push(std::move(value), {}); }

Var Tape::conv2d(Var x, Var w, std::optional<Var> bias, int stride, int rate,
                 int pad_h, int pad_w) {
  ConvKernelT<double> k;
  k.weights = value(w);
  if (bias) {
    const DTensor& b = value(*bias);
    k.bias.assign(b.data.begin(), b.data.end());
  }
  k.stride = stride;
  k.rate = rate;
  k.pad_h = pad_h;
  k.pad_w = pad_w;
  DTensor out = swidernet::conv2d(value(x), k);
  // push first so the backward closure can reference the output node id
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, w, bias, stride, rate, pad_h, pad_w, out_id](Tape& t) {
    const DTensor& xin = t.value(x);
    const DTensor& wt = t.value(w);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    DTensor& gw = t.grad_mut(w);
    const int kh = wt.h, kw = wt.w;
    for (int b = 0; b < gout.n; ++b)
      for (int o = 0; o < gout.c; ++o)
        for (int oy = 0; oy < gout.h; ++oy)
          for (int ox = 0; ox < gout.w; ++ox) {
            const double g = gout.at(b, o, oy, ox);
            if (g == 0.0) continue;
            const int iy0 = oy * stride - pad_h;
            const int ix0 = ox * stride - pad_w;
            for (int ci = 0; ci < xin.c; ++ci)
              for (int ky = 0; ky < kh; ++ky) {
                const int iy = iy0 + ky * rate;
                if (iy < 0 || iy >= xin.h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  const int ix = ix0 + kx * rate;
                  if (ix < 0 || ix >= xin.w) continue;
                  gx.at(b, ci, iy, ix) += wt.at(o, ci, ky, kx) * g;
                  gw.at(o, ci, ky, kx) += xin.at(b, ci, iy, ix) * g;
                }
              }
          }
    if (bias) {
      DTensor& gb = t.grad_mut(*bias);
      for (int b = 0; b < gout.n; ++b)
        for (int o = 0; o < gout.c; ++o)
          for (int oy = 0; oy < gout.h; ++oy)
            for (int ox = 0; ox < gout.w; ++ox)
              gb.data[o] += gout.at(b, o, oy, ox);
    }
  };
  return out_var;
}

Var Tape::avg_pool2d(Var x, int window, int stride, int pad) {
  DTensor out = swidernet::avg_pool2d(value(x), window, stride, pad);
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, window, stride, pad, out_id](Tape& t) {
    const DTensor& xin = t.value(x);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    for (int b = 0; b < gout.n; ++b)
      for (int c = 0; c < gout.c; ++c)
        for (int oy = 0; oy < gout.h; ++oy)
          for (int ox = 0; ox < gout.w; ++ox) {
            const int y0 = oy * stride - pad, x0 = ox * stride - pad;
            int count = 0;
            for (int ky = 0; ky < window; ++ky) {
              const int iy = y0 + ky;
              if (iy < 0 || iy >= xin.h) continue;
              for (int kx = 0; kx < window; ++kx) {
                const int ix = x0 + kx;
                if (ix >= 0 && ix < xin.w) ++count;
              }
            }
            if (count == 0) continue;
            const double g = gout.at(b, c, oy, ox) / count;
            for (int ky = 0; ky < window; ++ky) {
              const int iy = y0 + ky;
              if (iy < 0 || iy >= xin.h) continue;
              for (int kx = 0; kx < window; ++kx) {
                const int ix = x0 + kx;
                if (ix < 0 || ix >= xin.w) continue;
                gx.at(b, c, iy, ix) += g;
              }
            }
          }
  };
  return out_var;
}

Var Tape::global_avg_pool(Var x) {
  DTensor out = swidernet::global_avg_pool(value(x));
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, out_id](Tape& t) {
    const DTensor& xin = t.value(x);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    const double inv = 1.0 / (xin.h * xin.w);
    for (int b = 0; b < xin.n; ++b)
      for (int c = 0; c < xin.c; ++c) {
        const double g = gout.at(b, c, 0, 0) * inv;
        for (int y = 0; y < xin.h; ++y)
          for (int xx = 0; xx < xin.w; ++xx) gx.at(b, c, y, xx) += g;
      }
  };
  return out_var;
}

Var Tape::fully_connected(Var z, Var w, std::optional<Var> bias) {
  std::vector<double> b;
  if (bias) b.assign(value(*bias).data.begin(), value(*bias).data.end());
  DTensor out = swidernet::fully_connected(value(z), value(w), b);
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [z, w, bias, out_id](Tape& t) {
    const DTensor& zin = t.value(z);
    const DTensor& wt = t.value(w);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gz = t.grad_mut(z);
    DTensor& gw = t.grad_mut(w);
    for (int b2 = 0; b2 < zin.n; ++b2)
      for (int o = 0; o < wt.n; ++o) {
        const double g = gout.at(b2, o, 0, 0);
        if (g == 0.0) continue;
        for (int i = 0; i < zin.c; ++i) {
          gz.at(b2, i, 0, 0) += wt.at(o, i, 0, 0) * g;
          gw.at(o, i, 0, 0) += zin.at(b2, i, 0, 0) * g;
        }
      }
    if (bias) {
      DTensor& gb = t.grad_mut(*bias);
      for (int b2 = 0; b2 < zin.n; ++b2)
        for (int o = 0; o < wt.n; ++o) gb.data[o] += gout.at(b2, o, 0, 0);
    }
  };
  return out_var;
}

Var Tape::activation(Activation kind, Var x) {
  DTensor out = swidernet::activation(kind, value(x));
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [kind, x, out_id](Tape& t) {
    const DTensor& xin = t.value(x);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < xin.data.size(); ++i) {
      const double v = xin.data[i];
      double d = 0.0;
      switch (kind) {
        case Activation::relu: d = v > 0 ? 1.0 : 0.0; break;
        case Activation::relu6: d = (v > 0 && v < 6) ? 1.0 : 0.0; break;
        case Activation::sigmoid: {
          const double s = 1.0 / (1.0 + std::exp(-v));
          d = s * (1.0 - s);
          break;
        }
        case Activation::hard_sigmoid:
          d = (v > -3 && v < 3) ? 1.0 / 6.0 : 0.0;
          break;
      }
      gx.data[i] += d * gout.data[i];
    }
  };
  return out_var;
}

Var Tape::add(Var a, Var b) {
  DTensor out = swidernet::add(value(a), value(b));
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [a, b, out_id](Tape& t) {
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& ga = t.grad_mut(a);
    DTensor& gb = t.grad_mut(b);
    for (std::size_t i = 0; i < gout.data.size(); ++i) {
      ga.data[i] += gout.data[i];
      gb.data[i] += gout.data[i];
    }
  };
  return out_var;
}

Var Tape::scale_channels(Var x, Var s) {
  DTensor out = swidernet::scale_channels(value(x), value(s));
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, s, out_id](Tape& t) {
    const DTensor& xin = t.value(x);
    const DTensor& sv = t.value(s);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    DTensor& gs = t.grad_mut(s);
    for (int b = 0; b < xin.n; ++b)
      for (int c = 0; c < xin.c; ++c) {
        const double f = sv.at(b, c, 0, 0);
        double acc = 0.0;
        for (int y = 0; y < xin.h; ++y)
          for (int xx = 0; xx < xin.w; ++xx) {
            const double g = gout.at(b, c, y, xx);
            gx.at(b, c, y, xx) += f * g;
            acc += xin.at(b, c, y, xx) * g;
          }
        gs.at(b, c, 0, 0) += acc;
      }
  };
  return out_var;
}

Var Tape::scale_map(Var x, Var m) {
  const DTensor& xv = value(x);
  const DTensor& mv = value(m);
  if (mv.c != 1 || mv.n != xv.n || mv.h != xv.h || mv.w != xv.w)
    throw std::invalid_argument("scale_map: map must be (n,1,h,w)");
  DTensor out = xv;
  for (int b = 0; b < xv.n; ++b)
    for (int c = 0; c < xv.c; ++c)
      for (int y = 0; y < xv.h; ++y)
        for (int xx = 0; xx < xv.w; ++xx)
          out.at(b, c, y, xx) *= mv.at(b, 0, y, xx);
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, m, out_id](Tape& t) {
    const DTensor& xin = t.value(x);
    const DTensor& mvv = t.value(m);
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    DTensor& gm = t.grad_mut(m);
    for (int b = 0; b < xin.n; ++b)
      for (int y = 0; y < xin.h; ++y)
        for (int xx = 0; xx < xin.w; ++xx) {
          const double f = mvv.at(b, 0, y, xx);
          double acc = 0.0;
          for (int c = 0; c < xin.c; ++c) {
            const double g = gout.at(b, c, y, xx);
            gx.at(b, c, y, xx) += f * g;
            acc += xin.at(b, c, y, xx) * g;
          }
          gm.at(b, 0, y, xx) += acc;
        }
  };
  return out_var;
}

Var Tape::add_channels(Var x, Var v) {
  DTensor out = swidernet::add_channels(value(x), value(v));
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, v, out_id](Tape& t) {
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    DTensor& gv = t.grad_mut(v);
    for (int b = 0; b < gout.n; ++b)
      for (int c = 0; c < gout.c; ++c) {
        double acc = 0.0;
        for (int y = 0; y < gout.h; ++y)
          for (int xx = 0; xx < gout.w; ++xx) {
            const double g = gout.at(b, c, y, xx);
            gx.at(b, c, y, xx) += g;
            acc += g;
          }
        gv.at(b, c, 0, 0) += acc;
      }
  };
  return out_var;
}

Var Tape::affine(Var x, double a, double b) {
  DTensor out = value(x);
  for (auto& v : out.data) v = a * v + b;
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, a, out_id](Tape& t) {
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    for (std::size_t i = 0; i < gout.data.size(); ++i)
      gx.data[i] += a * gout.data[i];
  };
  return out_var;
}

Var Tape::batch_norm_inference(Var x, const std::vector<double>& mean,
                               const std::vector<double>& var,
                               const std::vector<double>& gamma,
                               const std::vector<double>& beta, double eps) {
  DTensor out = swidernet::batch_norm_inference(value(x), mean, var, gamma, beta, eps);
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  std::vector<double> scale(gamma.size());
  for (std::size_t c = 0; c < gamma.size(); ++c)
    scale[c] = gamma[c] / std::sqrt(var[c] + eps);
  nodes_[out_id].back = [x, scale, out_id](Tape& t) {
    const DTensor& gout = t.nodes_[out_id].grad;
    DTensor& gx = t.grad_mut(x);
    for (int b = 0; b < gout.n; ++b)
      for (int c = 0; c < gout.c; ++c)
        for (int y = 0; y < gout.h; ++y)
          for (int xx = 0; xx < gout.w; ++xx)
            gx.at(b, c, y, xx) += scale[c] * gout.at(b, c, y, xx);
  };
  return out_var;
}

Var Tape::sum(Var x) {
  DTensor out(1, 1, 1, 1);
  double acc = 0.0;
  for (double v : value(x).data) acc += v;
  out.data[0] = acc;
  Var out_var = push(std::move(out), {});
  const int out_id = out_var.id;
  nodes_[out_id].back = [x, out_id](Tape& t) {
    const double g = t.nodes_[out_id].grad.data[0];
    DTensor& gx = t.grad_mut(x);
    for (auto& v : gx.data) v += g;
  };
  return out_var;
}

void Tape::backward(Var out) {
  if (value(out).size() != 1)
    throw std::invalid_argument("backward: output must be scalar");
  grad_mut(out).data[0] = 1.0;
  for (int i = out.id; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this);
}

double grad_check(const GraphBuilder& build, const std::vector<DTensor>& leaves,
                  double eps) {
  // analytic pass
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const auto& l : leaves) vars.push_back(tape.leaf(l));
  Var obj = build(tape, vars);
  tape.backward(obj);

  auto eval = [&build](const std::vector<DTensor>& inputs) {
    Tape t;
    std::vector<Var> vs;
    vs.reserve(inputs.size());
    for (const auto& l : inputs) vs.push_back(t.leaf(l));
    Var o = build(t, vs);
    const double v = t.value(o).data[0];
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite objective");
    return v;
  };

  double max_rel = 0.0;
  std::vector<DTensor> work = leaves;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const DTensor& analytic = tape.grad(vars[li]);
    for (std::size_t i = 0; i < leaves[li].data.size(); ++i) {
      const double orig = work[li].data[i];
      work[li].data[i] = orig + eps;
      const double fp = eval(work);
      work[li].data[i] = orig - eps;
      const double fm = eval(work);
      work[li].data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic.data[i];
      const double rel = std::abs(a - numeric) /
                         std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace swidernet::ad
