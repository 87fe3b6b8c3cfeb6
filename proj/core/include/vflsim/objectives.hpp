#pragma once

#include <span>
#include <vector>

#include "vflsim/dataset.hpp"
#include "vflsim/types.hpp"

namespace vflsim {

// Per-sample loss L(inner, y).
//   Logistic:     log(1 + exp(-y*inner)), y in {-1,+1}
//   Square:       (inner - y)^2
//   RobustLinear: log(r^2/2 + 1) with r = y - inner
double loss_value(LossKind loss, double inner, double y);

// The backward-updating scalar: dL/d(inner). This is the only label-derived
// quantity that ever leaves an active party.
double theta(LossKind loss, double inner, double y);

double reg_value(RegularizerKind reg, std::span<const double> w_block);
std::vector<double> reg_grad(RegularizerKind reg, std::span<const double> w_block);

// theta * x_block + lambda * reg_grad(w_block), dense x.
std::vector<double> block_gradient(double theta_val, std::span<const double> x_block, double lambda,
                                   RegularizerKind reg, std::span<const double> w_block);
// Same with a sparse block row; block dimension taken from w_block.
std::vector<double> block_gradient(double theta_val, const SparseRow& x_block, double lambda,
                                   RegularizerKind reg, std::span<const double> w_block);

// f(w) = (1/n) sum_i L(w'x_i, y_i) + lambda * sum_l g(w_block_l)
double full_objective(const PartitionedDataset& data, std::span<const double> w,
                      const HyperParams& hp);

struct FullGradients {
  std::vector<double> grad;    // length d, block-concatenated full gradient
  std::vector<double> theta0;  // per-sample theta at w (the SVRG snapshot table)
};
FullGradients full_block_gradients(const PartitionedDataset& data, std::span<const double> w,
                                   const HyperParams& hp);

// Classification accuracy at threshold 0 (logistic) or RMSE (regression).
double test_metric(const PartitionedDataset& data, std::span<const double> w, LossKind loss);

}  // namespace vflsim
