#include "vflsim/objectives.hpp"

#include <cmath>

#include "vflsim/errors.hpp"

namespace vflsim {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
}

void check_logistic_label(double y) {
  if (y != 1.0 && y != -1.0) throw NumericalError("logistic labels must be -1 or +1");
}

}  // namespace

double loss_value(LossKind loss, double inner, double y) {
  require_finite(inner, "inner product");
  require_finite(y, "label");
  switch (loss) {
    case LossKind::Logistic: {
      check_logistic_label(y);
      const double t = y * inner;
      // log(1+exp(-t)) without overflow for large |t|
      return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
    }
    case LossKind::Square: {
      const double r = inner - y;
      return r * r;
    }
    case LossKind::RobustLinear: {
      const double r = y - inner;
      return std::log(0.5 * r * r + 1.0);
    }
  }
  throw InvalidInputError("unknown loss kind");
}

double theta(LossKind loss, double inner, double y) {
  require_finite(inner, "inner product");
  require_finite(y, "label");
  switch (loss) {
    case LossKind::Logistic: {
      check_logistic_label(y);
      const double t = y * inner;
      // -y / (1 + exp(t)), branching so exp never overflows
      if (t >= 0.0) {
        const double e = std::exp(-t);
        return -y * e / (1.0 + e);
      }
      return -y / (1.0 + std::exp(t));
    }
    case LossKind::Square:
      return 2.0 * (inner - y);
    case LossKind::RobustLinear: {
      const double r = y - inner;
      return -r / (0.5 * r * r + 1.0);
    }
  }
  throw InvalidInputError("unknown loss kind");
}

double reg_value(RegularizerKind reg, std::span<const double> w_block) {
  double acc = 0.0;
  switch (reg) {
    case RegularizerKind::L2:
      for (double w : w_block) acc += 0.5 * w * w;
      return acc;
    case RegularizerKind::NonconvexRational:
      for (double w : w_block) acc += w * w / (1.0 + w * w);
      return acc;
    case RegularizerKind::None:
      return 0.0;
  }
  throw InvalidInputError("unknown regularizer kind");
}

std::vector<double> reg_grad(RegularizerKind reg, std::span<const double> w_block) {
  std::vector<double> g(w_block.size(), 0.0);
  switch (reg) {
    case RegularizerKind::L2:
      for (std::size_t k = 0; k < w_block.size(); ++k) {
        require_finite(w_block[k], "weight");
        g[k] = w_block[k];
      }
      return g;
    case RegularizerKind::NonconvexRational:
      for (std::size_t k = 0; k < w_block.size(); ++k) {
        require_finite(w_block[k], "weight");
        const double w = w_block[k];
        const double den = 1.0 + w * w;
        g[k] = 2.0 * w / (den * den);
      }
      return g;
    case RegularizerKind::None:
      return g;
  }
  throw InvalidInputError("unknown regularizer kind");
}

std::vector<double> block_gradient(double theta_val, std::span<const double> x_block, double lambda,
                                   RegularizerKind reg, std::span<const double> w_block) {
  if (x_block.size() != w_block.size())
    throw DimensionError("x_block and w_block length mismatch");
  std::vector<double> g = reg_grad(reg, w_block);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = theta_val * x_block[k] + lambda * g[k];
  return g;
}

std::vector<double> block_gradient(double theta_val, const SparseRow& x_block, double lambda,
                                   RegularizerKind reg, std::span<const double> w_block) {
  std::vector<double> g = reg_grad(reg, w_block);
  for (double& v : g) v *= lambda;
  for (std::size_t k = 0; k < x_block.idx.size(); ++k) {
    const int j = x_block.idx[k];
    if (j < 0 || static_cast<std::size_t>(j) >= g.size())
      throw DimensionError("sparse row index exceeds block dimension");
    g[j] += theta_val * x_block.val[k];
  }
  return g;
}

double full_objective(const PartitionedDataset& data, std::span<const double> w,
                      const HyperParams& hp) {
  if (data.n() == 0) throw EmptyDataError("empty dataset");
  if (static_cast<int>(w.size()) != data.d()) throw DimensionError("w length mismatch");

  const auto& labels = data.eval_labels();
  double loss_sum = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    loss_sum += loss_value(hp.loss, data.full_inner_product(w, i), labels[i]);
  }
  double reg_sum = 0.0;
  for (int l = 0; l < data.q(); ++l) {
    const auto block = gather_block(w, data.partition(), l);
    reg_sum += reg_value(hp.regularizer, block);
  }
  return loss_sum / data.n() + hp.lambda * reg_sum;
}

FullGradients full_block_gradients(const PartitionedDataset& data, std::span<const double> w,
                                   const HyperParams& hp) {
  if (data.n() == 0) throw EmptyDataError("empty dataset");
  if (static_cast<int>(w.size()) != data.d()) throw DimensionError("w length mismatch");

  FullGradients out;
  out.grad.assign(data.d(), 0.0);
  out.theta0.resize(data.n());

  const auto& labels = data.eval_labels();
  for (int i = 0; i < data.n(); ++i) {
    out.theta0[i] = theta(hp.loss, data.full_inner_product(w, i), labels[i]);
  }

  const double inv_n = 1.0 / data.n();
  for (int l = 0; l < data.q(); ++l) {
    const auto& global = data.partition().blocks[l];
    const auto w_block = gather_block(w, data.partition(), l);
    std::vector<double> acc(global.size(), 0.0);
    for (int i = 0; i < data.n(); ++i) {
      const SparseRow& row = data.row_block(l, i);
      for (std::size_t k = 0; k < row.idx.size(); ++k)
        acc[row.idx[k]] += out.theta0[i] * row.val[k];
    }
    const auto rg = reg_grad(hp.regularizer, w_block);
    for (std::size_t k = 0; k < global.size(); ++k)
      out.grad[global[k]] = acc[k] * inv_n + hp.lambda * rg[k];
  }
  return out;
}

double test_metric(const PartitionedDataset& data, std::span<const double> w, LossKind loss) {
  if (data.n() == 0) throw EmptyDataError("empty dataset");
  const auto& labels = data.eval_labels();
  if (loss == LossKind::Logistic) {
    int correct = 0;
    for (int i = 0; i < data.n(); ++i) {
      const double pred = data.full_inner_product(w, i) >= 0.0 ? 1.0 : -1.0;
      if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / data.n();
  }
  double sq = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double r = data.full_inner_product(w, i) - labels[i];
    sq += r * r;
  }
  return std::sqrt(sq / data.n());
}

}  // namespace vflsim
