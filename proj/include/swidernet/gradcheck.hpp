#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace swidernet {

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0;
  bool pass = false;
};

// Gradient checks (reverse mode vs central differences) for every op the
// blocks are built from, plus the composed SE / SAC / residual graphs.
std::vector<GradCheckCase> run_grad_checks(std::uint64_t seed, double tol = 1e-4);

}  // namespace swidernet
