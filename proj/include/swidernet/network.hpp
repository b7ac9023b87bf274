#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "swidernet/arch.hpp"

namespace swidernet {

// A realized network: one parameter entry per planned layer, keyed by the
// layer path from enumerate_layers.
struct Network {
  ArchPlan plan;
  std::uint64_t seed = 0;
  std::map<std::string, Tensor> weights;              // conv / fc weights
  std::map<std::string, std::vector<float>> biases;   // keyed like weights
  std::map<std::string, BnParams> bns;

  // trainable scalars: weights + biases + BN gamma/beta
  long long parameter_count() const;
};

struct NetworkOutputs {
  Tensor semantic_logits;  // (n, num_classes, H, W)
  Tensor center_heatmap;   // (n, 1, H, W), sigmoid-activated
  Tensor offsets;          // (n, 2, H, W), (dy, dx) in input pixels
};

// He fan-out normal init for conv/fc weights from a single seeded stream;
// BN starts as the identity transform. Deterministic per (plan, seed).
Network instantiate(const ArchPlan& plan, std::uint64_t seed);

NetworkOutputs forward(const Network& net, const Tensor& x);

}  // namespace swidernet
