#include "swidernet/search.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>

namespace swidernet {

std::vector<ArchSpec> enumerate_space(SearchSpace kind) {
  std::vector<double> w1s, w2s, ls;
  if (kind == SearchSpace::fast) {
    w1s = {0.25, 0.5, 1};
    w2s = {0.25, 0.35, 0.5, 0.75, 1};
    ls = {0.35, 0.75, 1};
  } else {
    w1s = {1};
    w2s = {1, 1.5, 2};
    ls = {1, 2, 3, 4, 5, 5.5, 6};
  }
  std::vector<ArchSpec> out;
  for (double w1 : w1s)
    for (double w2 : w2s)
      for (double l : ls) {
        ArchSpec s;
        s.w1 = w1;
        s.w2 = w2;
        s.l = l;
        // fast models trade a little accuracy for speed in the head
        s.sep_conv_head = kind == SearchSpace::fast;
        out.push_back(s);
      }
  return out;
}

namespace {

std::string trim_zeros(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

std::string spec_name(const ArchSpec& spec) {
  return "(" + trim_zeros(spec.w1) + ", " + trim_zeros(spec.w2) + ", " +
         trim_zeros(spec.l) + ")";
}

std::vector<Candidate> evaluate_candidates(const std::vector<ArchSpec>& specs,
                                           const std::vector<MetricOracle>& oracles) {
  std::vector<Candidate> out;
  out.reserve(specs.size());
  for (const ArchSpec& spec : specs) {
    Candidate c;
    c.name = spec_name(spec);
    c.spec = spec;
    for (const MetricOracle& oracle : oracles) {
      try {
        c.metrics[oracle.metric] = oracle.fn(spec);
      } catch (const std::exception& e) {
        if (!c.error) c.error = oracle.metric + ": " + e.what();
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

// lexicographic (w1, w2, l) order for spec candidates; name order otherwise;
// spec candidates sort before named-only ones
bool lex_less(const Candidate& a, const Candidate& b) {
  if (a.spec && b.spec) {
    const auto ka = std::make_tuple(a.spec->w1, a.spec->w2, a.spec->l);
    const auto kb = std::make_tuple(b.spec->w1, b.spec->w2, b.spec->l);
    if (ka != kb) return ka < kb;
    return a.name < b.name;
  }
  if (a.spec != std::nullopt && b.spec == std::nullopt) return true;
  if (a.spec == std::nullopt && b.spec != std::nullopt) return false;
  return a.name < b.name;
}

}  // namespace

std::vector<Candidate> pareto_front(const std::vector<Candidate>& candidates,
                                    const std::string& cost_key,
                                    const std::string& quality_key) {
  struct Entry {
    const Candidate* c;
    double cost, quality;
  };
  std::vector<Entry> entries;
  for (const Candidate& c : candidates) {
    const auto cost = c.metric(cost_key);
    const auto quality = c.metric(quality_key);
    if (!cost || !quality)
      throw std::invalid_argument("pareto_front: candidate '" + c.name +
                                  "' is missing metric '" +
                                  (!cost ? cost_key : quality_key) + "'");
    entries.push_back({&c, *cost, *quality});
  }

  std::vector<Candidate> front;
  for (const Entry& a : entries) {
    bool dominated = false;
    for (const Entry& b : entries) {
      if (b.c == a.c) continue;
      const bool weak = b.cost <= a.cost && b.quality >= a.quality;
      const bool strict = b.cost < a.cost || b.quality > a.quality;
      if (weak && strict) {
        dominated = true;
        break;
      }
      // exact tie on both keys: keep only the lexicographically smaller one
      if (b.cost == a.cost && b.quality == a.quality && lex_less(*b.c, *a.c)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(*a.c);
  }
  std::sort(front.begin(), front.end(), [&](const Candidate& a, const Candidate& b) {
    const double ca = *a.metric(cost_key), cb = *b.metric(cost_key);
    if (ca != cb) return ca < cb;
    return lex_less(a, b);
  });
  return front;
}

double measure_latency(const Network& net, int input_h, int input_w, int warmup,
                       int iters) {
  if (iters < 1) throw std::invalid_argument("measure_latency: iters must be >= 1");
  static std::mutex latency_mutex;  // at most one measurement in flight
  std::lock_guard<std::mutex> lock(latency_mutex);

  Tensor x(1, 3, input_h, input_w);
  std::mt19937_64 rng(0);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (auto& v : x.data) v = normal(rng);

  for (int i = 0; i < warmup; ++i) (void)forward(net, x);
  std::vector<double> samples;
  samples.reserve(iters);
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)forward(net, x);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

namespace {

std::string metric_field(const Candidate& c, const std::string& key) {
  const auto v = c.metric(key);
  if (!v) return "";
  std::ostringstream ss;
  ss.precision(10);
  ss << *v;
  return ss.str();
}

}  // namespace

std::string candidates_csv(const std::vector<Candidate>& candidates) {
  std::ostringstream out;
  out << "w1,w2,l,params,madds,latency_ms,quality,name\n";
  for (const Candidate& c : candidates) {
    if (c.spec)
      out << trim_zeros(c.spec->w1) << "," << trim_zeros(c.spec->w2) << ","
          << trim_zeros(c.spec->l) << ",";
    else
      out << ",,,";
    out << metric_field(c, "params") << "," << metric_field(c, "madds") << ","
        << metric_field(c, "latency_ms") << "," << metric_field(c, "quality")
        << "," << c.name << "\n";
  }
  return out.str();
}

std::vector<Candidate> load_candidates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open candidates CSV: " + path);
  std::vector<Candidate> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (first) {
      first = false;
      if (line.rfind("w1,", 0) == 0) continue;
    }
    std::vector<std::string> f;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) f.push_back(cur);
    // the name is the final column and may itself contain commas
    for (std::size_t i = 8; i < f.size(); ++i) f[7] += "," + f[i];
    f.resize(8);
    Candidate c;
    if (!f[0].empty() && !f[1].empty() && !f[2].empty()) {
      ArchSpec s;
      s.w1 = std::stod(f[0]);
      s.w2 = std::stod(f[1]);
      s.l = std::stod(f[2]);
      c.spec = s;
      c.name = spec_name(s);
    }
    const char* keys[4] = {"params", "madds", "latency_ms", "quality"};
    for (int i = 0; i < 4; ++i)
      if (!f[3 + i].empty()) c.metrics[keys[i]] = std::stod(f[3 + i]);
    if (!f[7].empty()) c.name = f[7];
    if (c.name.empty())
      throw std::runtime_error("candidates CSV: row without spec or name: " + line);
    out.push_back(std::move(c));
  }
  return out;
}

std::map<std::string, double> load_quality_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open quality CSV: " + path);
  std::map<std::string, double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (first) {
      first = false;
      if (line.rfind("w1,", 0) == 0) continue;
    }
    std::vector<std::string> f;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) f.push_back(cur);
    if (f.size() != 4)
      throw std::runtime_error("quality CSV: expected w1,w2,l,quality: " + line);
    ArchSpec s;
    s.w1 = std::stod(f[0]);
    s.w2 = std::stod(f[1]);
    s.l = std::stod(f[2]);
    out[spec_name(s)] = std::stod(f[3]);
  }
  return out;
}

}  // namespace swidernet
