#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "swidernet/cost.hpp"

using namespace swidernet;

namespace {

std::string data_path(const std::string& name) {
  const char* dir = std::getenv("SWIDERNET_DATA_DIR");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + name;
}

ArchSpec spec_of(double w1, double w2, double l) {
  ArchSpec s;
  s.w1 = w1;
  s.w2 = w2;
  s.l = l;
  return s;
}

const CostRow& row_of(const CostReport& r, const std::string& layer) {
  for (const auto& row : r.rows)
    if (row.layer == layer) return row;
  FAIL("missing row ", layer);
  throw std::runtime_error("unreachable");
}

}  // namespace

TEST_CASE("per-layer params and madds match hand calculations") {
  const ArchPlan plan = build_plan(spec_of(1, 1, 1));
  const CostReport report = cost_report(plan, 65, 65);

  // stem conv0: 3x3, 3 -> 64 at full resolution
  const CostRow& stem = row_of(report, "conv1.stem0.conv");
  CHECK(stem.params == 64LL * 3 * 3 * 3);
  CHECK(stem.madds == 64LL * 3 * 3 * 3 * 65 * 65);

  // conv2 first block conv0: stride 2, 64 -> 128, output 33x33
  const CostRow& c2 = row_of(report, "conv2.block0.conv0");
  CHECK(c2.params == 128LL * 64 * 3 * 3);
  CHECK(c2.madds == 128LL * 64 * 3 * 3 * 33 * 33);

  // its BN: 2*C params, 2*C*H*W madds
  const CostRow& bn = row_of(report, "conv2.block0.bn1");
  CHECK(bn.params == 2LL * 128);
  CHECK(bn.madds == 2LL * 128 * 33 * 33);

  // SE gate on a conv4 block: C^2 params, C^2 madds (pooled features)
  const CostRow& se = row_of(report, "conv4.block1.se.fc");
  CHECK(se.params == 512LL * 512);
  CHECK(se.madds == 512LL * 512);

  // the SAC shared conv in conv6 runs at two rates: double madds, single params
  const CostRow& sac = row_of(report, "conv6.block0.sac.conv");
  CHECK(sac.params == 1024LL * 1024 * 3 * 3);
  CHECK(sac.madds == 2LL * 1024 * 1024 * 3 * 3 * 5 * 5);
}

TEST_CASE("atrous rate changes madds never") {
  // same spec at output stride 16 vs 32 differ in conv6 resolution only
  ArchSpec s16 = spec_of(0.25, 0.25, 1);
  ArchSpec s32 = s16;
  s32.output_stride = 32;
  const CostReport r16 = cost_report(build_plan(s16), 65, 65);
  const CostReport r32 = cost_report(build_plan(s32), 65, 65);
  CHECK(r16.total_params == r32.total_params);
  CHECK(r16.total_madds > r32.total_madds);  // dilated stage runs at 2x extent
}

TEST_CASE("se_param_delta equals the with/without difference exactly") {
  for (const ArchSpec base :
       {spec_of(1, 1, 1), spec_of(0.25, 0.35, 1), spec_of(0.5, 0.75, 2)}) {
    ArchSpec off = base;
    off.use_se = false;
    const CostReport with_se = cost_report(build_plan(base), 65, 65);
    const CostReport without = cost_report(build_plan(off), 65, 65);
    CHECK(se_param_delta(build_plan(base)) ==
          with_se.total_params - without.total_params);
  }
}

TEST_CASE("cost CSV lists every layer plus a total row") {
  const ArchPlan plan = build_plan(spec_of(0.25, 0.25, 0.35));
  const CostReport report = cost_report(plan, 65, 65);
  const std::string csv = cost_report_csv(report);
  CHECK(csv.rfind("layer,params,madds\n", 0) == 0);
  const std::string total_line = "total," + std::to_string(report.total_params) +
                                 "," + std::to_string(report.total_madds) + "\n";
  CHECK(csv.find(total_line) != std::string::npos);
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == static_cast<long>(report.rows.size()) + 2);
}

TEST_CASE("cost_report rejects inputs below the stride plan minimum") {
  const ArchPlan plan = build_plan(spec_of(1, 1, 1));
  CHECK_THROWS_AS(cost_report(plan, 16, 65), std::invalid_argument);
}

TEST_CASE("reference CSV loads the published rows") {
  const auto refs = load_reference_csv(data_path("reference_costs.csv"));
  REQUIRE(refs.size() >= 10);
  bool found_baseline = false;
  for (const auto& r : refs)
    if (r.w1 == 1 && r.w2 == 1 && r.l == 1 && r.input_h == 641) {
      found_baseline = true;
      CHECK(r.params_m == doctest::Approx(168.77));
      CHECK(r.madds_b == doctest::Approx(680.79));
      CHECK(r.source_table == "coco_design_choices");
    }
  CHECK(found_baseline);
  CHECK_THROWS_AS(load_reference_csv(data_path("missing.csv")), std::runtime_error);
}

TEST_CASE("compare_to_reference reports relative deviations, sorted") {
  const auto refs = load_reference_csv(data_path("reference_costs.csv"));
  const ArchSpec spec = spec_of(1, 1, 1);
  const CostReport report = cost_report(build_plan(spec), 641, 641);
  const auto devs = compare_to_reference(report, spec, refs);
  REQUIRE(devs.size() == 2);
  CHECK(devs[0].relative >= devs[1].relative);
  for (const auto& d : devs) {
    CHECK(d.relative == doctest::Approx(std::abs(d.ours - d.paper) / d.paper));
    CHECK(d.relative < 0.25);  // sanity bound; acceptance pins the real limits
  }
  // unmatched spec
  CHECK_THROWS_AS(compare_to_reference(report, spec_of(9, 9, 9), refs),
                  std::runtime_error);
}

TEST_CASE("madds scale with input area") {
  const ArchPlan plan = build_plan(spec_of(0.25, 0.25, 0.35));
  const CostReport small = cost_report(plan, 65, 65);
  const CostReport large = cost_report(plan, 129, 129);
  CHECK(small.total_params == large.total_params);
  const double ratio =
      static_cast<double>(large.total_madds) / small.total_madds;
  CHECK(ratio > 3.0);
  CHECK(ratio < 4.5);
}
