#include "swidernet/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "swidernet/arch.hpp"
#include "swidernet/augment.hpp"
#include "swidernet/cost.hpp"
#include "swidernet/gradcheck.hpp"
#include "swidernet/network.hpp"
#include "swidernet/panoptic.hpp"
#include "swidernet/search.hpp"

namespace swidernet {

namespace {

namespace fs = std::filesystem;

struct Size {
  int h = 0, w = 0;
};

Size parse_size(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos)
    throw std::invalid_argument("--input must look like HxW, got '" + text + "'");
  Size s;
  try {
    s.h = std::stoi(text.substr(0, x));
    s.w = std::stoi(text.substr(x + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("--input must look like HxW, got '" + text + "'");
  }
  if (s.h < 1 || s.w < 1)
    throw std::invalid_argument("--input dimensions must be positive: '" + text + "'");
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

// CSV either goes to the -o file (summary to stdout) or to stdout itself, in
// which case the summary becomes a trailing '#' comment so the CSV stays
// parseable.
void emit_csv(const std::string& out_path, const std::string& csv,
              const std::string& summary) {
  if (out_path.empty()) {
    std::cout << csv << "# " << summary << "\n";
  } else {
    write_text(out_path, csv);
    std::cout << summary << "\n";
  }
}

int cmd_build(double w1, double w2, double l, bool no_se, bool no_sac,
              bool multigrid, bool sep_conv, int output_stride,
              const std::string& out_path) {
  if (w1 <= 0 || w2 <= 0 || l <= 0)
    throw std::invalid_argument("--w1/--w2/--l must be positive");
  if (output_stride != 16 && output_stride != 32)
    throw std::invalid_argument("--output-stride must be 16 or 32");
  ArchSpec spec;
  spec.w1 = w1;
  spec.w2 = w2;
  spec.l = l;
  spec.use_se = !no_se;
  spec.use_sac = !no_sac;
  spec.use_multigrid = multigrid;
  spec.sep_conv_head = sep_conv;
  spec.output_stride = output_stride;
  const ArchPlan plan = build_plan(spec);
  save_plan_file(plan, out_path);
  std::cout << "summary verb=build name=\"" << spec_name(spec)
            << "\" layers=" << count_layers(plan) << " out=" << out_path << "\n";
  return 0;
}

int cmd_cost(const std::string& plan_path, const std::string& input,
             const std::string& ref_path, const std::string& out_path) {
  const ArchPlan plan = load_plan_file(plan_path);
  const Size size = parse_size(input);
  const CostReport report = cost_report(plan, size.h, size.w);
  std::string csv = cost_report_csv(report);
  if (!ref_path.empty()) {
    const auto devs =
        compare_to_reference(report, plan.spec, load_reference_csv(ref_path));
    std::ostringstream extra;
    for (const Deviation& d : devs)
      extra << "# deviation " << d.metric << " ours=" << d.ours
            << " paper=" << d.paper << " relative=" << d.relative << "\n";
    csv += extra.str();
  }
  std::ostringstream summary;
  summary << "summary verb=cost layers=" << count_layers(plan)
          << " params=" << report.total_params << " madds=" << report.total_madds
          << " input=" << input;
  emit_csv(out_path, csv, summary.str());
  return 0;
}

int cmd_search(const std::string& space, const std::string& input,
               const std::string& quality_path, bool with_latency,
               const std::string& out_path) {
  SearchSpace kind;
  if (space == "fast")
    kind = SearchSpace::fast;
  else if (space == "strong")
    kind = SearchSpace::strong;
  else
    throw std::invalid_argument("--space must be fast or strong, got '" + space + "'");
  const Size size = parse_size(input);

  std::vector<MetricOracle> oracles;
  oracles.push_back({"params", [&](const ArchSpec& s) {
                       return static_cast<double>(
                           cost_report(build_plan(s), size.h, size.w).total_params);
                     }});
  oracles.push_back({"madds", [&](const ArchSpec& s) {
                       return static_cast<double>(
                           cost_report(build_plan(s), size.h, size.w).total_madds);
                     }});
  if (with_latency)
    oracles.push_back({"latency_ms", [&](const ArchSpec& s) {
                         const Network net = instantiate(build_plan(s), 0);
                         return measure_latency(net, size.h, size.w, 1, 3);
                       }});

  std::vector<Candidate> candidates =
      evaluate_candidates(enumerate_space(kind), oracles);
  if (!quality_path.empty()) {
    const auto quality = load_quality_csv(quality_path);
    for (Candidate& c : candidates) {
      auto it = quality.find(c.name);
      if (it != quality.end()) c.metrics["quality"] = it->second;
    }
  }
  int errors = 0;
  for (const Candidate& c : candidates)
    if (c.error) ++errors;
  std::ostringstream summary;
  summary << "summary verb=search space=" << space
          << " candidates=" << candidates.size() << " errors=" << errors;
  emit_csv(out_path, candidates_csv(candidates), summary.str());
  return 0;
}

int cmd_pareto(const std::string& candidates_path, const std::string& x_key,
               const std::string& y_key, const std::string& out_path) {
  const auto candidates = load_candidates_csv(candidates_path);
  const auto front = pareto_front(candidates, x_key, y_key);
  std::ostringstream summary;
  summary << "summary verb=pareto x=" << x_key << " y=" << y_key
          << " candidates=" << candidates.size() << " front=" << front.size();
  emit_csv(out_path, candidates_csv(front), summary.str());
  return 0;
}

std::vector<std::pair<fs::path, fs::path>> pair_panoptic_dirs(
    const std::string& pred_dir, const std::string& gt_dir) {
  auto list = [](const std::string& dir) {
    if (!fs::is_directory(dir))
      throw std::runtime_error("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".pan")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto preds = list(pred_dir);
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const fs::path& p : preds) {
    const fs::path g = fs::path(gt_dir) / p.filename();
    if (!fs::exists(g))
      throw std::runtime_error("missing ground truth for " + p.filename().string());
    pairs.emplace_back(p, g);
  }
  if (pairs.empty())
    throw std::runtime_error("no .pan files found in " + pred_dir);
  return pairs;
}

int cmd_eval_pq(const std::string& pred_dir, const std::string& gt_dir,
                const std::string& meta_path, long long stuff_threshold,
                const std::string& out_path) {
  const CategoryMeta meta = load_meta_file(meta_path);
  const auto pairs = pair_panoptic_dirs(pred_dir, gt_dir);

  std::map<std::uint16_t, ClassPQ> merged;
  for (const auto& [pred_path, gt_path] : pairs) {
    PanopticMap pred = load_panoptic_file(pred_path.string());
    const PanopticMap gt = load_panoptic_file(gt_path.string());
    if (auto err = validate_map(pred, meta))
      throw std::runtime_error(pred_path.string() + ": " + *err);
    if (auto err = validate_map(gt, meta))
      throw std::runtime_error(gt_path.string() + ": " + *err);
    if (stuff_threshold > 0) pred = stuff_area_filter(pred, meta, stuff_threshold);
    const PQResult r = pq(pred, gt, meta);
    for (const auto& [cls, stats] : r.per_class) {
      ClassPQ& m = merged[cls];
      m.iou_sum += stats.iou_sum;
      m.tp += stats.tp;
      m.fp += stats.fp;
      m.fn += stats.fn;
    }
  }

  std::ostringstream csv, text;
  csv << "class,pq,sq,rq,tp,fp,fn\n";
  double pq_sum = 0, pq_things = 0, pq_stuff = 0;
  int n_things = 0, n_stuff = 0;
  for (auto& [cls, s] : merged) {
    const double denom = s.tp + 0.5 * s.fp + 0.5 * s.fn;
    s.pq = denom > 0 ? s.iou_sum / denom : 0;
    s.sq = s.tp > 0 ? s.iou_sum / s.tp : 0;
    s.rq = denom > 0 ? s.tp / denom : 0;
    pq_sum += s.pq;
    (meta.thing(cls) ? pq_things : pq_stuff) += s.pq;
    (meta.thing(cls) ? n_things : n_stuff)++;
    csv << cls << "," << s.pq << "," << s.sq << "," << s.rq << "," << s.tp << ","
        << s.fp << "," << s.fn << "\n";
    text << "class " << cls << " (" << meta.names.at(cls) << "): pq=" << s.pq
         << " sq=" << s.sq << " rq=" << s.rq << "\n";
  }
  const int n = static_cast<int>(merged.size());
  const double pq_all = n > 0 ? pq_sum / n : 0;
  text << "all: pq=" << pq_all
       << " things=" << (n_things > 0 ? pq_things / n_things : 0)
       << " stuff=" << (n_stuff > 0 ? pq_stuff / n_stuff : 0) << " over " << n
       << " classes, " << pairs.size() << " images\n";

  std::cout << text.str();
  std::ostringstream summary;
  summary << "summary verb=eval-pq images=" << pairs.size() << " classes=" << n
          << " pq=" << pq_all;
  emit_csv(out_path, csv.str(), summary.str());
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, double tol) {
  const auto results = run_grad_checks(seed, tol);
  bool all_pass = true;
  for (const GradCheckCase& r : results) {
    std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.name
              << "  max_rel_error=" << r.max_rel_error << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << "summary verb=gradcheck seed=" << seed << " cases=" << results.size()
            << " result=" << (all_pass ? "pass" : "fail") << "\n";
  return all_pass ? 0 : 2;
}

int cmd_latency(const std::string& plan_path, const std::string& input, int warmup,
                int iters) {
  const ArchPlan plan = load_plan_file(plan_path);
  const Size size = parse_size(input);
  const Network net = instantiate(plan, 0);
  const double ms = measure_latency(net, size.h, size.w, warmup, iters);
  std::cout << "summary verb=latency input=" << input << " iters=" << iters
            << " median_ms=" << ms << "\n";
  return 0;
}

int cmd_augment(const std::string& image_path, std::uint64_t seed, double factor,
                const std::string& out_path) {
  const Image img = load_ppm(image_path);
  AugPolicy policy = default_policy();
  if (factor != 1.0) policy = scale_magnitudes(policy, factor);
  std::mt19937_64 rng(seed);
  const int idx = sample_subpolicy(policy, rng);
  const Image out = apply_subpolicy(img, policy.sub_policies[idx], rng);
  save_ppm(out, out_path);
  std::cout << "summary verb=augment subpolicy=" << (idx + 1) << " seed=" << seed
            << " factor=" << factor << " out=" << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"SWideRNet architecture toolkit"};
  app.require_subcommand(1);

  // build
  double w1 = 1, w2 = 1, l = 1;
  bool no_se = false, no_sac = false, multigrid = false, sep_conv = false;
  int output_stride = 16;
  std::string build_out;
  auto* build = app.add_subcommand("build", "write an architecture plan");
  build->add_option("--w1", w1)->required();
  build->add_option("--w2", w2)->required();
  build->add_option("--l", l)->required();
  build->add_flag("--no-se", no_se);
  build->add_flag("--no-sac", no_sac);
  build->add_flag("--multigrid", multigrid);
  build->add_flag("--sep-conv", sep_conv);
  build->add_option("--output-stride", output_stride);
  build->add_option("-o,--output", build_out)->required();

  // cost
  std::string cost_plan, cost_input, cost_ref, cost_out;
  auto* cost = app.add_subcommand("cost", "analytical params/madds report");
  cost->add_option("--plan", cost_plan)->required();
  cost->add_option("--input", cost_input)->required();
  cost->add_option("--ref", cost_ref);
  cost->add_option("-o,--output", cost_out);

  // search
  std::string search_space, search_input = "641x641", search_quality, search_out;
  bool search_latency = false;
  auto* search = app.add_subcommand("search", "grid-search a candidate space");
  search->add_option("--space", search_space)->required();
  search->add_option("--input", search_input);
  search->add_option("--quality", search_quality);
  search->add_flag("--measure-latency", search_latency);
  search->add_option("-o,--output", search_out);

  // pareto
  std::string par_candidates, par_x = "madds", par_y = "quality", par_out;
  auto* pareto = app.add_subcommand("pareto", "nondominated front of a CSV");
  pareto->add_option("--candidates", par_candidates)->required();
  pareto->add_option("--x", par_x);
  pareto->add_option("--y", par_y);
  pareto->add_option("-o,--output", par_out);

  // eval-pq
  std::string pq_pred, pq_gt, pq_meta, pq_out;
  long long pq_threshold = 0;
  auto* evalpq = app.add_subcommand("eval-pq", "panoptic quality over file pairs");
  evalpq->add_option("--pred", pq_pred)->required();
  evalpq->add_option("--gt", pq_gt)->required();
  evalpq->add_option("--meta", pq_meta)->required();
  evalpq->add_option("--stuff-threshold", pq_threshold);
  evalpq->add_option("-o,--output", pq_out);

  // gradcheck
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "reverse-mode vs finite diff");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_option("--tol", gc_tol);

  // latency
  std::string lat_plan, lat_input;
  int lat_warmup = 1, lat_iters = 5;
  auto* latency = app.add_subcommand("latency", "median forward-pass time");
  latency->add_option("--plan", lat_plan)->required();
  latency->add_option("--input", lat_input)->required();
  latency->add_option("--warmup", lat_warmup);
  latency->add_option("--iters", lat_iters);

  // augment
  std::string aug_image, aug_out;
  std::uint64_t aug_seed = 0;
  double aug_factor = 1.0;
  auto* augment = app.add_subcommand("augment", "apply a sampled sub-policy");
  augment->add_option("--image", aug_image)->required();
  augment->add_option("--seed", aug_seed);
  augment->add_option("--factor", aug_factor);
  augment->add_option("-o,--output", aug_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (build->parsed())
      return cmd_build(w1, w2, l, no_se, no_sac, multigrid, sep_conv,
                       output_stride, build_out);
    if (cost->parsed()) return cmd_cost(cost_plan, cost_input, cost_ref, cost_out);
    if (search->parsed())
      return cmd_search(search_space, search_input, search_quality, search_latency,
                        search_out);
    if (pareto->parsed()) return cmd_pareto(par_candidates, par_x, par_y, par_out);
    if (evalpq->parsed())
      return cmd_eval_pq(pq_pred, pq_gt, pq_meta, pq_threshold, pq_out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_tol);
    if (latency->parsed())
      return cmd_latency(lat_plan, lat_input, lat_warmup, lat_iters);
    if (augment->parsed())
      return cmd_augment(aug_image, aug_seed, aug_factor, aug_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace swidernet
