#include "swidernet/gradcheck.hpp"

#include <random>

#include "swidernet/autograd.hpp"

namespace swidernet {

namespace {

using ad::DTensor;
using ad::Tape;
using ad::Var;

DTensor rand_tensor(int n, int c, int h, int w, std::mt19937_64& rng,
                    double scale = 1.0) {
  DTensor t(n, c, h, w);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : t.data) v = scale * dist(rng);
  return t;
}

// x + broadcast(FC(GAP(x), W) + b), the SAC global-context wrapper
Var context(Tape& t, Var x, Var w, Var b) {
  return t.add_channels(x, t.fully_connected(t.global_avg_pool(x), w, b));
}

// (1 - S) * y1 + S * y3  ==  y1 + S * (y3 - y1)
Var switch_merge(Tape& t, Var s, Var y1, Var y3) {
  Var diff = t.add(y3, t.affine(y1, -1.0, 0.0));
  return t.add(y1, t.scale_map(diff, s));
}

Var sac_graph(Tape& t, Var x, Var shared, Var sw, Var swb, Var pre_w, Var pre_b,
              Var post_w, Var post_b) {
  Var xp = context(t, x, pre_w, pre_b);
  Var s = t.activation(Activation::sigmoid,
                       t.conv2d(t.avg_pool2d(xp, 5, 1, 2), sw, swb, 1, 1, 0, 0));
  Var y1 = t.conv2d(xp, shared, std::nullopt, 1, 1, 1, 1);
  Var y3 = t.conv2d(xp, shared, std::nullopt, 1, 3, 3, 3);
  return context(t, switch_merge(t, s, y1, y3), post_w, post_b);
}

Var se_graph(Tape& t, Var x, Var w) {
  Var s = t.activation(Activation::hard_sigmoid,
                       t.fully_connected(t.global_avg_pool(x), w, std::nullopt));
  return t.scale_channels(x, s);
}

Var preact(Tape& t, Var x, int c) {
  Var bn = t.batch_norm_inference(x, std::vector<double>(c, 0.0),
                                  std::vector<double>(c, 1.0),
                                  std::vector<double>(c, 1.0),
                                  std::vector<double>(c, 0.0), 1e-5);
  return t.activation(Activation::relu, bn);
}

struct CaseDef {
  std::string name;
  ad::GraphBuilder build;
  std::vector<DTensor> leaves;
};

std::vector<CaseDef> make_cases(std::mt19937_64& rng) {
  std::vector<CaseDef> cases;

  cases.push_back(
      {"conv2d",
       [](Tape& t, const std::vector<Var>& v) {
         return t.sum(t.conv2d(v[0], v[1], v[2], 1, 2, 2, 2));
       },
       {rand_tensor(2, 3, 5, 5, rng), rand_tensor(4, 3, 3, 3, rng, 0.5),
        rand_tensor(1, 4, 1, 1, rng)}});

  cases.push_back({"avg_pool2d",
                   [](Tape& t, const std::vector<Var>& v) {
                     return t.sum(t.avg_pool2d(v[0], 3, 2, 1));
                   },
                   {rand_tensor(1, 2, 6, 6, rng)}});

  cases.push_back({"global_avg_pool",
                   [](Tape& t, const std::vector<Var>& v) {
                     return t.sum(t.global_avg_pool(v[0]));
                   },
                   {rand_tensor(2, 3, 4, 4, rng)}});

  cases.push_back(
      {"fully_connected",
       [](Tape& t, const std::vector<Var>& v) {
         return t.sum(t.fully_connected(v[0], v[1], v[2]));
       },
       {rand_tensor(2, 5, 1, 1, rng), rand_tensor(3, 5, 1, 1, rng),
        rand_tensor(1, 3, 1, 1, rng)}});

  // small weights keep the gate away from the hard-sigmoid kinks at +-3
  cases.push_back({"se_module",
                   [](Tape& t, const std::vector<Var>& v) {
                     return t.sum(se_graph(t, v[0], v[1]));
                   },
                   {rand_tensor(1, 3, 4, 4, rng), rand_tensor(3, 3, 1, 1, rng, 0.3)}});

  cases.push_back(
      {"sac",
       [](Tape& t, const std::vector<Var>& v) {
         return t.sum(sac_graph(t, v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]));
       },
       {rand_tensor(1, 3, 5, 5, rng), rand_tensor(4, 3, 3, 3, rng, 0.5),
        rand_tensor(1, 3, 1, 1, rng, 0.5), rand_tensor(1, 1, 1, 1, rng),
        rand_tensor(3, 3, 1, 1, rng, 0.3), rand_tensor(1, 3, 1, 1, rng, 0.3),
        rand_tensor(4, 4, 1, 1, rng, 0.3), rand_tensor(1, 4, 1, 1, rng, 0.3)}});

  cases.push_back(
      {"residual_basic",
       [](Tape& t, const std::vector<Var>& v) {
         Var b = t.conv2d(preact(t, v[0], 3), v[1], std::nullopt, 1, 1, 1, 1);
         b = t.conv2d(preact(t, b, 3), v[2], std::nullopt, 1, 1, 1, 1);
         return t.sum(t.add(v[0], b));
       },
       {rand_tensor(1, 3, 5, 5, rng), rand_tensor(3, 3, 3, 3, rng, 0.5),
        rand_tensor(3, 3, 3, 3, rng, 0.5)}});

  cases.push_back(
      {"residual_bottleneck_se",
       [](Tape& t, const std::vector<Var>& v) {
         Var b = t.conv2d(preact(t, v[0], 4), v[1], std::nullopt, 1, 1, 0, 0);
         b = t.conv2d(preact(t, b, 2), v[2], std::nullopt, 1, 1, 1, 1);
         b = t.conv2d(preact(t, b, 2), v[3], std::nullopt, 1, 1, 0, 0);
         b = se_graph(t, b, v[4]);
         return t.sum(t.add(v[0], b));
       },
       {rand_tensor(1, 4, 5, 5, rng), rand_tensor(2, 4, 1, 1, rng, 0.5),
        rand_tensor(2, 2, 3, 3, rng, 0.5), rand_tensor(4, 2, 1, 1, rng, 0.5),
        rand_tensor(4, 4, 1, 1, rng, 0.3)}});

  return cases;
}

}  // namespace

std::vector<GradCheckCase> run_grad_checks(std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckCase> out;
  for (CaseDef& def : make_cases(rng)) {
    GradCheckCase r;
    r.name = def.name;
    r.max_rel_error = ad::grad_check(def.build, def.leaves);
    r.pass = r.max_rel_error < tol;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace swidernet
