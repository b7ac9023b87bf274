#include "swidernet/cost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swidernet {

CostReport cost_report(const ArchPlan& plan, int input_h, int input_w) {
  if (input_h < 33 || input_w < 33)
    throw std::invalid_argument("cost_report: input size incompatible with stride plan");
  CostReport report;
  report.input_h = input_h;
  report.input_w = input_w;
  for (const LayerDef& d : enumerate_layers(plan)) {
    const long long hh = d.res_level < 0 ? 1 : extent_at_level(input_h, d.res_level);
    const long long ww = d.res_level < 0 ? 1 : extent_at_level(input_w, d.res_level);
    CostRow row;
    row.layer = d.path;
    row.params = d.param_count();
    switch (d.type) {
      case LayerDef::Type::conv:
        row.madds = static_cast<long long>(d.out_ch) * (d.in_ch / d.groups) *
                    d.kh * d.kw * hh * ww * d.eval_count;
        break;
      case LayerDef::Type::fc:
        row.madds = static_cast<long long>(d.out_ch) * d.in_ch;
        break;
      case LayerDef::Type::bn:
        row.madds = 2LL * d.out_ch * hh * ww;
        break;
    }
    report.total_params += row.params;
    report.total_madds += row.madds;
    report.rows.push_back(std::move(row));
  }
  return report;
}

long long se_param_delta(const ArchPlan& plan) {
  long long delta = 0;
  for (const auto& s : plan.stages) {
    if (s.is_stem || !s.use_se) continue;
    delta += static_cast<long long>(s.count) * s.out_channels * s.out_channels;
  }
  return delta;
}

std::string cost_report_csv(const CostReport& report) {
  std::ostringstream out;
  out << "layer,params,madds\n";
  for (const auto& row : report.rows)
    out << row.layer << "," << row.params << "," << row.madds << "\n";
  out << "total," << report.total_params << "," << report.total_madds << "\n";
  return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::vector<ReferenceRow> load_reference_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reference CSV: " + path);
  std::vector<ReferenceRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (first && line.rfind("w1,", 0) == 0) {
      first = false;
      continue;  // header
    }
    first = false;
    auto f = split_csv_line(line);
    if (f.size() != 8)
      throw std::runtime_error("reference CSV: expected 8 columns, got " +
                               std::to_string(f.size()) + " in: " + line);
    ReferenceRow r;
    r.w1 = std::stod(f[0]);
    r.w2 = std::stod(f[1]);
    r.l = std::stod(f[2]);
    r.params_m = std::stod(f[3]);
    r.madds_b = std::stod(f[4]);
    r.input_h = std::stoi(f[5]);
    r.input_w = std::stoi(f[6]);
    r.source_table = f[7];
    std::ostringstream name;
    name << "(" << r.w1 << ", " << r.w2 << ", " << r.l << ")";
    r.name = name.str();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Deviation> compare_to_reference(const CostReport& report,
                                            const ArchSpec& spec,
                                            const std::vector<ReferenceRow>& refs) {
  const auto match = std::find_if(refs.begin(), refs.end(), [&](const ReferenceRow& r) {
    return std::abs(r.w1 - spec.w1) < 1e-9 && std::abs(r.w2 - spec.w2) < 1e-9 &&
           std::abs(r.l - spec.l) < 1e-9 && r.input_h == report.input_h &&
           r.input_w == report.input_w;
  });
  if (match == refs.end())
    throw std::runtime_error("compare_to_reference: no reference row for this spec");
  std::vector<Deviation> out;
  const double ours_params_m = report.total_params / 1e6;
  const double ours_madds_b = report.total_madds / 1e9;
  // reference rows may carry only one of the two metrics (0 = unknown)
  if (match->params_m > 0)
    out.push_back({"params_m", ours_params_m, match->params_m,
                   std::abs(ours_params_m - match->params_m) / match->params_m});
  if (match->madds_b > 0)
    out.push_back({"madds_b", ours_madds_b, match->madds_b,
                   std::abs(ours_madds_b - match->madds_b) / match->madds_b});
  std::sort(out.begin(), out.end(),
            [](const Deviation& a, const Deviation& b) { return a.relative > b.relative; });
  return out;
}

}  // namespace swidernet
