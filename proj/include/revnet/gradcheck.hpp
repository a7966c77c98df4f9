#pragma once

#include <functional>
#include <string>
#include <vector>

#include "revnet/tape.hpp"

namespace revnet {

// Named reference to a parameter tensor owned elsewhere.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

using ParamRegistry = std::vector<ParamRef>;

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::int64_t worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of reverse-mode gradients. build_loss must bind the
// registry tensors via Tape::param and return a scalar loss; it is re-run for
// every perturbed evaluation. Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-8). A non-finite loss at a perturbed point
// raises NumericError naming the parameter and element.
FiniteDiffReport finite_diff_check(const std::function<Var(Tape&)>& build_loss, const ParamRegistry& params,
                                   double eps = 1e-5);

}  // namespace revnet
