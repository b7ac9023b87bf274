#pragma once

#include <string>
#include <vector>

#include "swidernet/blocks.hpp"

namespace swidernet {

struct ArchSpec {
  double w1 = 1.0;  // channel multiplier, conv1-conv2
  double w2 = 1.0;  // channel multiplier, conv3-conv6
  double l = 1.0;   // layer multiplier, conv3-conv6
  bool use_se = true;
  bool use_sac = true;
  bool use_multigrid = false;
  bool sep_conv_head = false;
  int output_stride = 16;  // 16 or 32

  bool operator==(const ArchSpec&) const = default;
};

struct StagePlan {
  std::string name;
  bool is_stem = false;
  BlockKind kind = BlockKind::basic;
  int count = 0;  // residual blocks, or standalone convs for the stem
  int in_channels = 0;
  int mid_channels = 0;
  int out_channels = 0;
  int stride = 1;     // applied at the first block
  int unit_rate = 1;
  std::vector<int> multigrid;  // per-block rate factors, length == count
  bool use_se = false;
  bool use_sac = false;

  bool operator==(const StagePlan&) const = default;
};

struct HeadPlan {
  int num_classes = 133;
  int aspp_channels = 256;
  std::vector<int> aspp_rates{6, 12, 18};
  bool separable = false;
  int sem_channels = 256;
  int ins_channels = 128;
  int sem_proj8 = 64, sem_proj4 = 32;   // skip projections at 1/8 and 1/4
  int ins_proj8 = 32, ins_proj4 = 16;
  int ins_head_channels = 32;

  bool operator==(const HeadPlan&) const = default;
};

struct ArchPlan {
  ArchSpec spec;
  std::vector<StagePlan> stages;  // conv1..conv6
  HeadPlan head;

  bool operator==(const ArchPlan&) const = default;

  const StagePlan& stage(const std::string& name) const;
};

// nearest multiple of 8, ties rounding up, never below 8
int round_to_multiple_of_8(double v);
// floor(x + 0.5), never below 1
int round_half_up_min1(double v);

ArchPlan build_plan(const ArchSpec& spec, int num_classes = 133);

// Backbone conv layers: stem convs plus 2 (basic) / 3 (bottleneck) per block.
// Projection shortcuts, SE, SAC switch and context layers are excluded.
int count_layers(const ArchPlan& plan);

std::string serialize_plan(const ArchPlan& plan);
ArchPlan parse_plan(const std::string& text);

ArchPlan load_plan_file(const std::string& path);
void save_plan_file(const ArchPlan& plan, const std::string& path);

// One parameterized layer of the realized network. The same enumeration
// drives initialization and the analytical cost model so the two can never
// disagree on what exists.
struct LayerDef {
  enum class Type { conv, fc, bn };
  std::string path;
  Type type = Type::conv;
  int in_ch = 0, out_ch = 0;
  int kh = 1, kw = 1;
  int groups = 1;
  bool bias = false;
  int stride = 1, rate = 1;
  // number of stride-2 halvings applied to this layer's output; -1 marks
  // layers operating on pooled 1x1 features (FC, SE, switches)
  int res_level = 0;
  // extra multiplier on madds (the SAC shared conv runs at two rates)
  int eval_count = 1;

  long long param_count() const {
    if (type == Type::bn) return 2LL * out_ch;  // gamma, beta
    long long p = static_cast<long long>(out_ch) * (in_ch / groups) * kh * kw;
    if (bias) p += out_ch;
    return p;
  }
};

std::vector<LayerDef> enumerate_layers(const ArchPlan& plan);

// spatial extent after `level` stride-2 halvings (ceil at every step)
int extent_at_level(int input, int level);

// output spatial sizes of conv1..conv6 for a given input extent
std::vector<int> stage_extents(const ArchPlan& plan, int input);

}  // namespace swidernet
