#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swidernet/arch.hpp"
#include "swidernet/network.hpp"

namespace swidernet {

enum class SearchSpace { fast, strong };

// The two discretized grids, in lexicographic (w1, w2, l) order.
// fast: {0.25,0.5,1} x {0.25,0.35,0.5,0.75,1} x {0.35,0.75,1}  (45)
// strong: {1} x {1,1.5,2} x {1,2,3,4,5,5.5,6}                  (21)
std::vector<ArchSpec> enumerate_space(SearchSpace kind);

struct Candidate {
  std::string name;  // "(w1, w2, l)" for spec candidates, free label otherwise
  std::optional<ArchSpec> spec;
  std::map<std::string, double> metrics;  // params, madds, latency_ms, quality
  std::optional<std::string> error;       // first oracle failure, if any

  std::optional<double> metric(const std::string& key) const {
    auto it = metrics.find(key);
    return it == metrics.end() ? std::nullopt : std::optional<double>(it->second);
  }
};

std::string spec_name(const ArchSpec& spec);

struct MetricOracle {
  std::string metric;
  std::function<double(const ArchSpec&)> fn;
};

// One candidate per spec, input order preserved. Oracle failures are recorded
// on the candidate, not fatal.
std::vector<Candidate> evaluate_candidates(const std::vector<ArchSpec>& specs,
                                           const std::vector<MetricOracle>& oracles);

// Nondominated subset under (cost minimized, quality maximized), weak
// dominance with at least one strict inequality. Exact ties on both keys keep
// the lexicographically smaller candidate. Result ascends in cost.
std::vector<Candidate> pareto_front(const std::vector<Candidate>& candidates,
                                    const std::string& cost_key,
                                    const std::string& quality_key);

// Median wall-clock milliseconds of a forward pass after `warmup` discarded
// runs. Measurements are serialized process-wide.
double measure_latency(const Network& net, int input_h, int input_w, int warmup,
                       int iters);

std::string candidates_csv(const std::vector<Candidate>& candidates);
std::vector<Candidate> load_candidates_csv(const std::string& path);

// quality CSV: w1,w2,l,quality
std::map<std::string, double> load_quality_csv(const std::string& path);

}  // namespace swidernet
