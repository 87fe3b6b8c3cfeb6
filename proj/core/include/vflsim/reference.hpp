#pragma once

#include <vector>

#include "vflsim/dataset.hpp"
#include "vflsim/types.hpp"

namespace vflsim {

struct ReferenceSolution {
  std::vector<double> w;
  double objective = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

// High-precision full-batch solve of the training objective, used as the
// suboptimality reference for the stochastic runs. Deliberately a different
// algorithm family (deterministic gradient descent with backtracking line
// search) from anything in the runtime.
ReferenceSolution solve_reference(const PartitionedDataset& data, const HyperParams& hp,
                                  double grad_tol = 1e-12, long max_iters = 200000);

}  // namespace vflsim
