#include "swidernet/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace swidernet {

long long Network::parameter_count() const {
  long long total = 0;
  for (const auto& [path, t] : weights) total += static_cast<long long>(t.size());
  for (const auto& [path, b] : biases) total += static_cast<long long>(b.size());
  for (const auto& [path, bn] : bns) total += 2LL * bn.gamma.size();
  return total;
}

Network instantiate(const ArchPlan& plan, std::uint64_t seed) {
  Network net;
  net.plan = plan;
  net.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (const LayerDef& d : enumerate_layers(plan)) {
    switch (d.type) {
      case LayerDef::Type::conv:
      case LayerDef::Type::fc: {
        Tensor w(d.out_ch, d.in_ch / d.groups, d.kh, d.kw);
        const float fan_out =
            static_cast<float>(d.out_ch) * d.kh * d.kw / static_cast<float>(d.groups);
        const float stddev = std::sqrt(2.0f / fan_out);
        for (auto& v : w.data) v = normal(rng) * stddev;
        net.weights.emplace(d.path, std::move(w));
        if (d.bias) net.biases.emplace(d.path, std::vector<float>(d.out_ch, 0.0f));
        break;
      }
      case LayerDef::Type::bn:
        net.bns.emplace(d.path, BnParams::identity(d.out_ch));
        break;
    }
  }
  return net;
}

namespace {

const Tensor& weight(const Network& net, const std::string& path) {
  auto it = net.weights.find(path);
  if (it == net.weights.end())
    throw std::runtime_error("missing parameter entry: " + path);
  return it->second;
}

std::vector<float> bias_or_empty(const Network& net, const std::string& path) {
  auto it = net.biases.find(path);
  return it == net.biases.end() ? std::vector<float>{} : it->second;
}

const BnParams& bn_params(const Network& net, const std::string& path) {
  auto it = net.bns.find(path);
  if (it == net.bns.end())
    throw std::runtime_error("missing BN entry: " + path);
  return it->second;
}

ConvKernel make_kernel(const Network& net, const std::string& path, int stride,
                       int rate, int groups = 1) {
  ConvKernel k;
  k.weights = weight(net, path);
  k.bias = bias_or_empty(net, path);
  k.stride = stride;
  k.rate = rate;
  k.groups = groups;
  k.pad_h = same_padding(k.weights.h, rate);
  k.pad_w = same_padding(k.weights.w, rate);
  return k;
}

Tensor conv_bn_relu(const Network& net, const std::string& prefix,
                    const Tensor& x, int stride = 1, int rate = 1) {
  Tensor t = conv2d(x, make_kernel(net, prefix + ".conv", stride, rate));
  t = batch_norm_inference(t, bn_params(net, prefix + ".bn"));
  return activation(Activation::relu, t);
}

// 5x5 (or 3x3) decoder conv that the sep_conv_head flag swaps for
// depthwise + pointwise
Tensor decoder_conv(const Network& net, const std::string& prefix,
                    const Tensor& x, int rate = 1) {
  if (net.weights.count(prefix + ".dw.conv")) {
    Tensor t = conv2d(x, make_kernel(net, prefix + ".dw.conv", 1, rate, x.c));
    t = batch_norm_inference(t, bn_params(net, prefix + ".dw.bn"));
    t = activation(Activation::relu, t);
    t = conv2d(t, make_kernel(net, prefix + ".pw.conv", 1, 1));
    t = batch_norm_inference(t, bn_params(net, prefix + ".pw.bn"));
    return activation(Activation::relu, t);
  }
  return conv_bn_relu(net, prefix, x, 1, rate);
}

GlobalContextParams context_params(const Network& net, const std::string& prefix) {
  GlobalContextParams p;
  p.W = weight(net, prefix + ".fc");
  p.bias = bias_or_empty(net, prefix + ".fc");
  return p;
}

Tensor run_block(const Network& net, const StagePlan& s, const std::string& path,
                 int block, const Tensor& x) {
  BlockPlan plan;
  plan.kind = s.kind;
  plan.in_channels = block == 0 ? s.in_channels : s.out_channels;
  plan.mid_channels = s.kind == BlockKind::basic ? s.out_channels : s.mid_channels;
  plan.out_channels = s.out_channels;
  plan.stride = block == 0 ? s.stride : 1;
  plan.rate = s.unit_rate * s.multigrid[block];
  plan.use_se = s.use_se;
  plan.use_sac = s.use_sac;

  ResidualParams params;
  const int n_convs = s.kind == BlockKind::basic ? 2 : 3;
  for (int i = 0; i < n_convs; ++i)
    params.bns.push_back(bn_params(net, path + ".bn" + std::to_string(i)));

  const int sac_slot = 1;
  for (int i = 0; i < n_convs; ++i) {
    if (plan.use_sac && i == sac_slot) continue;
    const std::string cp = path + ".conv" + std::to_string(i);
    int stride = i == 0 ? plan.stride : 1;
    int rate = 1;
    if (s.kind == BlockKind::basic)
      rate = plan.rate;
    else if (i == 1)
      rate = plan.rate;
    params.convs.push_back(make_kernel(net, cp, stride, rate));
  }
  if (plan.use_sac) {
    SacParams sp;
    sp.shared_weights = weight(net, path + ".sac.conv");
    sp.switch_weights = weight(net, path + ".sac.switch.conv");
    sp.switch_bias = bias_or_empty(net, path + ".sac.switch.conv");
    sp.pre_context = context_params(net, path + ".sac.pre_ctx");
    sp.post_context = context_params(net, path + ".sac.post_ctx");
    sp.unit_rate = plan.rate;
    params.sac_params = std::move(sp);
  }
  if (plan.use_se) params.se = SeParams{weight(net, path + ".se.fc")};
  if (plan.needs_projection())
    params.shortcut = make_kernel(net, path + ".proj", plan.stride, 1);
  return residual_block(x, plan, params);
}

}  // namespace

NetworkOutputs forward(const Network& net, const Tensor& x) {
  if (x.c != 3) throw std::invalid_argument("forward: input must have 3 channels");
  if (x.h < 33 || x.w < 33)
    throw std::invalid_argument("forward: input too small for the stride plan (min 33)");

  Tensor t = x;
  Tensor feat4, feat8;  // 1/4 and 1/8 resolution skips (conv3, conv4 outputs)
  for (const StagePlan& s : net.plan.stages) {
    if (s.is_stem) {
      for (int i = 0; i < s.count; ++i)
        t = conv_bn_relu(net, s.name + ".stem" + std::to_string(i), t,
                         i == 0 ? s.stride : 1);
      continue;
    }
    for (int b = 0; b < s.count; ++b)
      t = run_block(net, s, s.name + ".block" + std::to_string(b), b, t);
    if (s.name == "conv3") feat4 = t;
    if (s.name == "conv4") feat8 = t;
  }
  t = batch_norm_inference(t, bn_params(net, "post.bn"));
  t = activation(Activation::relu, t);

  // ASPP
  const HeadPlan& h = net.plan.head;
  std::vector<Tensor> branches;
  branches.push_back(conv_bn_relu(net, "head.aspp.conv1x1", t));
  for (int r : h.aspp_rates)
    branches.push_back(decoder_conv(net, "head.aspp.rate" + std::to_string(r), t, r));
  {
    Tensor pooled = fully_connected(global_avg_pool(t),
                                    weight(net, "head.aspp.pool.fc"));
    pooled = batch_norm_inference(pooled, bn_params(net, "head.aspp.pool.bn"));
    pooled = activation(Activation::relu, pooled);
    branches.push_back(bilinear_resize(pooled, t.h, t.w));
  }
  Tensor aspp = conv_bn_relu(net, "head.aspp.project", concat_channels(branches));

  const int h8 = feat8.h, w8 = feat8.w;
  const int h4 = feat4.h, w4 = feat4.w;

  auto decode = [&](const std::string& ns, int channels) {
    (void)channels;
    Tensor d = bilinear_resize(aspp, h8, w8);
    Tensor skip8 = conv_bn_relu(net, "head." + ns + ".skip8", feat8);
    d = decoder_conv(net, "head." + ns + ".fuse8", concat_channels(std::vector<Tensor>{d, skip8}));
    d = bilinear_resize(d, h4, w4);
    Tensor skip4 = conv_bn_relu(net, "head." + ns + ".skip4", feat4);
    d = decoder_conv(net, "head." + ns + ".fuse4", concat_channels(std::vector<Tensor>{d, skip4}));
    return d;
  };

  NetworkOutputs out;

  Tensor sem = decode("sem", h.sem_channels);
  sem = decoder_conv(net, "head.sem.logits", sem);
  sem = conv2d(sem, make_kernel(net, "head.sem.logits.pred", 1, 1));
  out.semantic_logits = bilinear_resize(sem, x.h, x.w);

  Tensor ins = decode("ins", h.ins_channels);
  Tensor center = decoder_conv(net, "head.ins.center", ins);
  center = conv2d(center, make_kernel(net, "head.ins.center.pred", 1, 1));
  center = activation(Activation::sigmoid, center);
  out.center_heatmap = bilinear_resize(center, x.h, x.w);

  Tensor offset = decoder_conv(net, "head.ins.offset", ins);
  offset = conv2d(offset, make_kernel(net, "head.ins.offset.pred", 1, 1));
  offset = bilinear_resize(offset, x.h, x.w);
  // heads run at 1/4 resolution; rescale offsets to input pixels
  for (auto& v : offset.data) v *= 4.0f;
  out.offsets = offset;
  return out;
}

}  // namespace swidernet
