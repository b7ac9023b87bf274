#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "swidernet/tensor.hpp"

namespace swidernet::ad {

// Reverse-mode tape in double precision. This is a verification facility for
// gradient checking the op set used by the SE / SAC / residual blocks, not a
// training engine.

using DTensor = TensorT<double>;

class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var leaf(DTensor value);

  const DTensor& value(Var v) const { return nodes_[v.id].value; }
  const DTensor& grad(Var v) const { return nodes_[v.id].grad; }

  Var conv2d(Var x, Var w, std::optional<Var> bias, int stride, int rate,
             int pad_h, int pad_w);
  Var avg_pool2d(Var x, int window, int stride, int pad);
  Var global_avg_pool(Var x);
  Var fully_connected(Var z, Var w, std::optional<Var> bias);
  Var activation(Activation kind, Var x);
  Var add(Var a, Var b);
  // x * s with s shaped (n,c,1,1)
  Var scale_channels(Var x, Var s);
  // x * m with m shaped (n,1,h,w), broadcast over channels
  Var scale_map(Var x, Var m);
  Var add_channels(Var x, Var v);
  // a*x + b elementwise with scalar constants
  Var affine(Var x, double a, double b);
  Var batch_norm_inference(Var x, const std::vector<double>& mean,
                           const std::vector<double>& var,
                           const std::vector<double>& gamma,
                           const std::vector<double>& beta, double eps);
  // scalar (1,1,1,1) sum of all elements
  Var sum(Var x);

  // Seeds the (scalar) output with gradient 1 and propagates backwards.
  void backward(Var out);

 private:
  struct Node {
    DTensor value;
    DTensor grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  Var push(DTensor value, std::function<void(Tape&)> back);
  DTensor& grad_mut(Var v) { return nodes_[v.id].grad; }

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

// Builds the graph from leaf variables and must return a scalar objective
// (typically tape.sum of the op output).
using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares reverse-mode gradients of the scalar objective against central
// finite differences (f(x+eps) - f(x-eps)) / (2 eps) for every element of
// every leaf. Returns the maximum relative error.
double grad_check(const GraphBuilder& build, const std::vector<DTensor>& leaves,
                  double eps = 1e-4);

}  // namespace swidernet::ad
