#include "swidernet/arch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace swidernet {

using ordered_json = nlohmann::ordered_json;

int round_to_multiple_of_8(double v) {
  const int k = static_cast<int>(std::floor(v / 8.0 + 0.5));
  return std::max(1, k) * 8;
}

int round_half_up_min1(double v) {
  return std::max(1, static_cast<int>(std::floor(v + 0.5)));
}

const StagePlan& ArchPlan::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown stage " + name);
}

ArchPlan build_plan(const ArchSpec& spec, int num_classes) {
  if (spec.w1 <= 0 || spec.w2 <= 0 || spec.l <= 0)
    throw std::invalid_argument("build_plan: scaling factors must be positive");
  if (spec.output_stride != 16 && spec.output_stride != 32)
    throw std::invalid_argument("build_plan: output stride must be 16 or 32");

  ArchPlan plan;
  plan.spec = spec;
  plan.head.num_classes = num_classes;
  plan.head.separable = spec.sep_conv_head;

  const int c1 = round_to_multiple_of_8(64 * spec.w1);
  const int c2 = round_to_multiple_of_8(128 * spec.w1);
  const int c3 = round_to_multiple_of_8(256 * spec.w2);
  const int c4 = round_to_multiple_of_8(512 * spec.w2);
  const int c5 = round_to_multiple_of_8(1024 * spec.w2);
  const int c6_mid = round_to_multiple_of_8(1024 * spec.w2);
  const int c6_out = round_to_multiple_of_8(2048 * spec.w2);

  auto stage = [&](std::string name, BlockKind kind, int count, int in_ch,
                   int mid_ch, int out_ch, int stride, int unit_rate,
                   bool sac_on) {
    StagePlan s;
    s.name = std::move(name);
    s.kind = kind;
    s.count = count;
    s.in_channels = in_ch;
    s.mid_channels = mid_ch;
    s.out_channels = out_ch;
    s.stride = stride;
    s.unit_rate = unit_rate;
    s.multigrid.assign(count, 1);
    s.use_se = spec.use_se;
    s.use_sac = sac_on;
    return s;
  };

  StagePlan stem;
  stem.name = "conv1";
  stem.is_stem = true;
  stem.count = 3;
  stem.in_channels = 3;
  stem.mid_channels = c1;
  stem.out_channels = c1;
  stem.stride = 1;
  stem.unit_rate = 1;
  stem.multigrid.assign(3, 1);
  plan.stages.push_back(stem);

  plan.stages.push_back(stage("conv2", BlockKind::basic, 2, c1, c2, c2, 2, 1, false));
  plan.stages.push_back(stage("conv3", BlockKind::basic,
                              round_half_up_min1(3 * spec.l), c2, c3, c3, 2, 1, false));
  plan.stages.push_back(stage("conv4", BlockKind::basic,
                              round_half_up_min1(6 * spec.l), c3, c4, c4, 2, 1, false));
  plan.stages.push_back(stage("conv5", BlockKind::basic,
                              round_half_up_min1(3 * spec.l), c4, c5, c5, 2, 1, false));

  // conv6 runs dilated instead of striding when the output stride is 16
  const bool dilate6 = spec.output_stride == 16;
  StagePlan conv6 = stage("conv6", BlockKind::bottleneck,
                          round_half_up_min1(3 * spec.l), c5, c6_mid, c6_out,
                          dilate6 ? 1 : 2, dilate6 ? 2 : 1, spec.use_sac);
  if (spec.use_multigrid) {
    const int factors[3] = {1, 2, 4};
    for (int b = 0; b < conv6.count; ++b) conv6.multigrid[b] = factors[b % 3];
  }
  plan.stages.push_back(conv6);
  return plan;
}

int count_layers(const ArchPlan& plan) {
  int total = 0;
  for (const auto& s : plan.stages) {
    if (s.is_stem)
      total += s.count;
    else
      total += s.count * (s.kind == BlockKind::basic ? 2 : 3);
  }
  return total;
}

int extent_at_level(int input, int level) {
  int e = input;
  for (int i = 0; i < level; ++i) e = (e + 1) / 2;
  return e;
}

namespace {

int stage_out_level(const ArchPlan& plan, std::size_t stage_idx) {
  int level = 0;
  for (std::size_t i = 0; i <= stage_idx; ++i)
    if (plan.stages[i].stride == 2) ++level;
  return level;
}

}  // namespace

std::vector<int> stage_extents(const ArchPlan& plan, int input) {
  std::vector<int> out;
  for (std::size_t i = 0; i < plan.stages.size(); ++i)
    out.push_back(extent_at_level(input, stage_out_level(plan, i)));
  return out;
}

std::vector<LayerDef> enumerate_layers(const ArchPlan& plan) {
  std::vector<LayerDef> layers;
  auto conv = [&](std::string path, int in_ch, int out_ch, int k, int stride,
                  int rate, int level, bool bias = false, int groups = 1,
                  int eval_count = 1) {
    LayerDef d;
    d.path = std::move(path);
    d.type = LayerDef::Type::conv;
    d.in_ch = in_ch;
    d.out_ch = out_ch;
    d.kh = d.kw = k;
    d.stride = stride;
    d.rate = rate;
    d.res_level = level;
    d.bias = bias;
    d.groups = groups;
    d.eval_count = eval_count;
    layers.push_back(std::move(d));
  };
  auto fc = [&](std::string path, int in_ch, int out_ch, bool bias) {
    LayerDef d;
    d.path = std::move(path);
    d.type = LayerDef::Type::fc;
    d.in_ch = in_ch;
    d.out_ch = out_ch;
    d.res_level = -1;
    d.bias = bias;
    layers.push_back(std::move(d));
  };
  auto bn = [&](std::string path, int ch, int level) {
    LayerDef d;
    d.path = std::move(path);
    d.type = LayerDef::Type::bn;
    d.in_ch = d.out_ch = ch;
    d.res_level = level;
    layers.push_back(std::move(d));
  };

  // backbone
  for (std::size_t si = 0; si < plan.stages.size(); ++si) {
    const StagePlan& s = plan.stages[si];
    const int in_level = si == 0 ? 0 : stage_out_level(plan, si - 1);
    const int out_level = stage_out_level(plan, si);
    if (s.is_stem) {
      for (int i = 0; i < s.count; ++i) {
        const std::string p = s.name + ".stem" + std::to_string(i);
        const int in_ch = i == 0 ? s.in_channels : s.out_channels;
        conv(p + ".conv", in_ch, s.out_channels, 3, i == 0 ? s.stride : 1, 1, out_level);
        bn(p + ".bn", s.out_channels, out_level);
      }
      continue;
    }
    for (int b = 0; b < s.count; ++b) {
      const std::string p = s.name + ".block" + std::to_string(b);
      const int in_ch = b == 0 ? s.in_channels : s.out_channels;
      const int stride = b == 0 ? s.stride : 1;
      const int lin = b == 0 ? in_level : out_level;
      const int rate = s.unit_rate * s.multigrid[b];
      const int mid = s.kind == BlockKind::basic ? s.out_channels : s.mid_channels;

      auto sac_layers = [&](int cc, int r) {
        fc(p + ".sac.pre_ctx.fc", cc, cc, true);
        conv(p + ".sac.switch.conv", cc, 1, 1, 1, 1, out_level, true);
        conv(p + ".sac.conv", cc, cc, 3, 1, r, out_level, false, 1, 2);
        fc(p + ".sac.post_ctx.fc", cc, cc, true);
      };

      if (s.kind == BlockKind::basic) {
        bn(p + ".bn0", in_ch, lin);
        conv(p + ".conv0", in_ch, s.out_channels, 3, stride, rate, out_level);
        bn(p + ".bn1", s.out_channels, out_level);
        if (s.use_sac)
          sac_layers(s.out_channels, rate);
        else
          conv(p + ".conv1", s.out_channels, s.out_channels, 3, 1, rate, out_level);
      } else {
        bn(p + ".bn0", in_ch, lin);
        conv(p + ".conv0", in_ch, mid, 1, stride, 1, out_level);
        bn(p + ".bn1", mid, out_level);
        if (s.use_sac)
          sac_layers(mid, rate);
        else
          conv(p + ".conv1", mid, mid, 3, 1, rate, out_level);
        bn(p + ".bn2", mid, out_level);
        conv(p + ".conv2", mid, s.out_channels, 1, 1, 1, out_level);
      }
      if (s.use_se) fc(p + ".se.fc", s.out_channels, s.out_channels, false);
      if (in_ch != s.out_channels || stride != 1)
        conv(p + ".proj", in_ch, s.out_channels, 1, stride, 1, out_level);
    }
  }

  const StagePlan& last = plan.stages.back();
  const int feat_level = stage_out_level(plan, plan.stages.size() - 1);
  const int feat_ch = last.out_channels;
  bn("post.bn", feat_ch, feat_level);

  const HeadPlan& h = plan.head;
  const int c3 = plan.stage("conv3").out_channels;  // 1/4 skip
  const int c4 = plan.stage("conv4").out_channels;  // 1/8 skip
  const int l8 = 3, l4 = 2;

  auto maybe_sep = [&](const std::string& name, int in_ch, int out_ch, int k,
                       int rate, int level) {
    if (h.separable && k > 1) {
      conv(name + ".dw.conv", in_ch, in_ch, k, 1, rate, level, false, in_ch);
      bn(name + ".dw.bn", in_ch, level);
      conv(name + ".pw.conv", in_ch, out_ch, 1, 1, 1, level);
      bn(name + ".pw.bn", out_ch, level);
    } else {
      conv(name + ".conv", in_ch, out_ch, k, 1, rate, level);
      bn(name + ".bn", out_ch, level);
    }
  };

  // ASPP over the final backbone feature
  conv("head.aspp.conv1x1.conv", feat_ch, h.aspp_channels, 1, 1, 1, feat_level);
  bn("head.aspp.conv1x1.bn", h.aspp_channels, feat_level);
  for (int r : h.aspp_rates)
    maybe_sep("head.aspp.rate" + std::to_string(r), feat_ch, h.aspp_channels, 3,
              r, feat_level);
  fc("head.aspp.pool.fc", feat_ch, h.aspp_channels, false);
  bn("head.aspp.pool.bn", h.aspp_channels, -1);
  conv("head.aspp.project.conv",
       h.aspp_channels * (2 + static_cast<int>(h.aspp_rates.size())),
       h.aspp_channels, 1, 1, 1, feat_level);
  bn("head.aspp.project.bn", h.aspp_channels, feat_level);

  // semantic decoder
  conv("head.sem.skip8.conv", c4, h.sem_proj8, 1, 1, 1, l8);
  bn("head.sem.skip8.bn", h.sem_proj8, l8);
  maybe_sep("head.sem.fuse8", h.aspp_channels + h.sem_proj8, h.sem_channels, 5, 1, l8);
  conv("head.sem.skip4.conv", c3, h.sem_proj4, 1, 1, 1, l4);
  bn("head.sem.skip4.bn", h.sem_proj4, l4);
  maybe_sep("head.sem.fuse4", h.sem_channels + h.sem_proj4, h.sem_channels, 5, 1, l4);
  maybe_sep("head.sem.logits", h.sem_channels, h.sem_channels, 5, 1, l4);
  conv("head.sem.logits.pred", h.sem_channels, h.num_classes, 1, 1, 1, l4, true);

  // instance decoder (center + offset)
  conv("head.ins.skip8.conv", c4, h.ins_proj8, 1, 1, 1, l8);
  bn("head.ins.skip8.bn", h.ins_proj8, l8);
  maybe_sep("head.ins.fuse8", h.aspp_channels + h.ins_proj8, h.ins_channels, 5, 1, l8);
  conv("head.ins.skip4.conv", c3, h.ins_proj4, 1, 1, 1, l4);
  bn("head.ins.skip4.bn", h.ins_proj4, l4);
  maybe_sep("head.ins.fuse4", h.ins_channels + h.ins_proj4, h.ins_channels, 5, 1, l4);
  maybe_sep("head.ins.center", h.ins_channels, h.ins_head_channels, 5, 1, l4);
  conv("head.ins.center.pred", h.ins_head_channels, 1, 1, 1, 1, l4, true);
  maybe_sep("head.ins.offset", h.ins_channels, h.ins_head_channels, 5, 1, l4);
  conv("head.ins.offset.pred", h.ins_head_channels, 2, 1, 1, 1, l4, true);

  return layers;
}

namespace {

void require_keys(const ordered_json& obj, const std::string& what,
                  const std::vector<std::string>& keys) {
  for (const auto& k : keys)
    if (!obj.contains(k))
      throw std::runtime_error("plan parse error: " + what + " missing field '" + k + "'");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw std::runtime_error("plan parse error: " + what + " has unknown field '" +
                               it.key() + "'");
}

}  // namespace

std::string serialize_plan(const ArchPlan& plan) {
  ordered_json j;
  j["version"] = 1;
  j["spec"] = {{"w1", plan.spec.w1},
               {"w2", plan.spec.w2},
               {"l", plan.spec.l},
               {"use_se", plan.spec.use_se},
               {"use_sac", plan.spec.use_sac},
               {"use_multigrid", plan.spec.use_multigrid},
               {"sep_conv_head", plan.spec.sep_conv_head},
               {"output_stride", plan.spec.output_stride}};
  j["stages"] = ordered_json::array();
  for (const auto& s : plan.stages) {
    ordered_json js = {{"name", s.name},
                       {"is_stem", s.is_stem},
                       {"kind", s.kind == BlockKind::basic ? "basic" : "bottleneck"},
                       {"count", s.count},
                       {"in_channels", s.in_channels},
                       {"mid_channels", s.mid_channels},
                       {"out_channels", s.out_channels},
                       {"stride", s.stride},
                       {"unit_rate", s.unit_rate},
                       {"multigrid", s.multigrid},
                       {"use_se", s.use_se},
                       {"use_sac", s.use_sac}};
    j["stages"].push_back(js);
  }
  j["head"] = {{"num_classes", plan.head.num_classes},
               {"aspp_channels", plan.head.aspp_channels},
               {"aspp_rates", plan.head.aspp_rates},
               {"separable", plan.head.separable},
               {"sem_channels", plan.head.sem_channels},
               {"ins_channels", plan.head.ins_channels},
               {"sem_proj8", plan.head.sem_proj8},
               {"sem_proj4", plan.head.sem_proj4},
               {"ins_proj8", plan.head.ins_proj8},
               {"ins_proj4", plan.head.ins_proj4},
               {"ins_head_channels", plan.head.ins_head_channels}};
  return j.dump(2) + "\n";
}

ArchPlan parse_plan(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("plan parse error: malformed JSON: ") + e.what());
  }
  require_keys(j, "plan", {"version", "spec", "stages", "head"});
  if (j["version"].get<int>() != 1)
    throw std::runtime_error("plan parse error: unsupported version " +
                             j["version"].dump());

  ArchPlan plan;
  const auto& sp = j["spec"];
  require_keys(sp, "spec", {"w1", "w2", "l", "use_se", "use_sac", "use_multigrid",
                            "sep_conv_head", "output_stride"});
  plan.spec.w1 = sp["w1"].get<double>();
  plan.spec.w2 = sp["w2"].get<double>();
  plan.spec.l = sp["l"].get<double>();
  plan.spec.use_se = sp["use_se"].get<bool>();
  plan.spec.use_sac = sp["use_sac"].get<bool>();
  plan.spec.use_multigrid = sp["use_multigrid"].get<bool>();
  plan.spec.sep_conv_head = sp["sep_conv_head"].get<bool>();
  plan.spec.output_stride = sp["output_stride"].get<int>();

  for (const auto& js : j["stages"]) {
    require_keys(js, "stage", {"name", "is_stem", "kind", "count", "in_channels",
                               "mid_channels", "out_channels", "stride",
                               "unit_rate", "multigrid", "use_se", "use_sac"});
    StagePlan s;
    s.name = js["name"].get<std::string>();
    s.is_stem = js["is_stem"].get<bool>();
    const std::string kind = js["kind"].get<std::string>();
    if (kind == "basic")
      s.kind = BlockKind::basic;
    else if (kind == "bottleneck")
      s.kind = BlockKind::bottleneck;
    else
      throw std::runtime_error("plan parse error: unknown block kind '" + kind + "'");
    s.count = js["count"].get<int>();
    s.in_channels = js["in_channels"].get<int>();
    s.mid_channels = js["mid_channels"].get<int>();
    s.out_channels = js["out_channels"].get<int>();
    s.stride = js["stride"].get<int>();
    s.unit_rate = js["unit_rate"].get<int>();
    s.multigrid = js["multigrid"].get<std::vector<int>>();
    s.use_se = js["use_se"].get<bool>();
    s.use_sac = js["use_sac"].get<bool>();
    if (static_cast<int>(s.multigrid.size()) != s.count)
      throw std::runtime_error("plan parse error: multigrid length mismatch in " + s.name);
    plan.stages.push_back(std::move(s));
  }

  const auto& jh = j["head"];
  require_keys(jh, "head", {"num_classes", "aspp_channels", "aspp_rates", "separable",
                            "sem_channels", "ins_channels", "sem_proj8", "sem_proj4",
                            "ins_proj8", "ins_proj4", "ins_head_channels"});
  plan.head.num_classes = jh["num_classes"].get<int>();
  plan.head.aspp_channels = jh["aspp_channels"].get<int>();
  plan.head.aspp_rates = jh["aspp_rates"].get<std::vector<int>>();
  plan.head.separable = jh["separable"].get<bool>();
  plan.head.sem_channels = jh["sem_channels"].get<int>();
  plan.head.ins_channels = jh["ins_channels"].get<int>();
  plan.head.sem_proj8 = jh["sem_proj8"].get<int>();
  plan.head.sem_proj4 = jh["sem_proj4"].get<int>();
  plan.head.ins_proj8 = jh["ins_proj8"].get<int>();
  plan.head.ins_proj4 = jh["ins_proj4"].get<int>();
  plan.head.ins_head_channels = jh["ins_head_channels"].get<int>();
  return plan;
}

ArchPlan load_plan_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open plan file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

void save_plan_file(const ArchPlan& plan, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plan file: " + path);
  out << serialize_plan(plan);
}

}  // namespace swidernet
