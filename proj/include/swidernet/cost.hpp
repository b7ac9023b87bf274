#pragma once

#include <optional>
#include <string>
#include <vector>

#include "swidernet/arch.hpp"

namespace swidernet {

struct CostRow {
  std::string layer;
  long long params = 0;
  long long madds = 0;
};

struct CostReport {
  std::vector<CostRow> rows;
  long long total_params = 0;
  long long total_madds = 0;
  int input_h = 0, input_w = 0;
};

// One multiply-add counted once; BN contributes 2*C params and 2*C*H*W madds;
// elementwise activations contribute nothing.
CostReport cost_report(const ArchPlan& plan, int input_h, int input_w);

// Parameter cost of the SE decoration alone; independent of input size and
// exactly equal to cost_report(with SE) - cost_report(without SE).
long long se_param_delta(const ArchPlan& plan);

std::string cost_report_csv(const CostReport& report);

struct ReferenceRow {
  std::string name;  // "(w1, w2, l)" or a baseline label
  double w1 = 0, w2 = 0, l = 0;
  double params_m = 0;
  double madds_b = 0;
  int input_h = 0, input_w = 0;
  std::string source_table;
};

// CSV columns: w1,w2,l,params_m,madds_b,input_h,input_w,source_table
std::vector<ReferenceRow> load_reference_csv(const std::string& path);

struct Deviation {
  std::string metric;
  double ours = 0;
  double paper = 0;
  double relative = 0;  // |ours - paper| / paper
};

// Compares a report against the reference rows matching (w1,w2,l,input size);
// output sorted by descending relative deviation.
std::vector<Deviation> compare_to_reference(const CostReport& report,
                                            const ArchSpec& spec,
                                            const std::vector<ReferenceRow>& refs);

}  // namespace swidernet
