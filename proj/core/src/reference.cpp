#include "vflsim/reference.hpp"

#include <algorithm>
#include <cmath>

#include "vflsim/objectives.hpp"

namespace vflsim {

namespace {

// d^2 L / d(inner)^2
double loss_curvature(LossKind loss, double inner, double y) {
  switch (loss) {
    case LossKind::Logistic: {
      const double t = y * inner;
      const double e = std::exp(-std::abs(t));
      const double s = e / (1.0 + e);  // min(sigma, 1-sigma)
      return s * (1.0 - s);
    }
    case LossKind::Square:
      return 2.0;
    case LossKind::RobustLinear: {
      const double r = y - inner;
      const double den = 0.5 * r * r + 1.0;
      return (1.0 - 0.5 * r * r) / (den * den);
    }
  }
  return 0.0;
}

// second derivative of the separable regularizer at one coordinate
double reg_curvature(RegularizerKind reg, double w) {
  switch (reg) {
    case RegularizerKind::L2:
      return 1.0;
    case RegularizerKind::NonconvexRational: {
      const double den = 1.0 + w * w;
      return (2.0 - 6.0 * w * w) / (den * den * den);
    }
    case RegularizerKind::None:
      return 0.0;
  }
  return 0.0;
}

// in-place Cholesky; returns false when the matrix is not positive definite
bool cholesky(std::vector<double>& a, int d) {
  for (int j = 0; j < d; ++j) {
    double diag = a[j * d + j];
    for (int k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
    if (diag <= 0.0) return false;
    const double root = std::sqrt(diag);
    a[j * d + j] = root;
    for (int i = j + 1; i < d; ++i) {
      double v = a[i * d + j];
      for (int k = 0; k < j; ++k) v -= a[i * d + k] * a[j * d + k];
      a[i * d + j] = v / root;
    }
  }
  return true;
}

void cholesky_solve(const std::vector<double>& chol, int d, std::vector<double>& x) {
  for (int i = 0; i < d; ++i) {
    double v = x[i];
    for (int k = 0; k < i; ++k) v -= chol[i * d + k] * x[k];
    x[i] = v / chol[i * d + i];
  }
  for (int i = d - 1; i >= 0; --i) {
    double v = x[i];
    for (int k = i + 1; k < d; ++k) v -= chol[k * d + i] * x[k];
    x[i] = v / chol[i * d + i];
  }
}

double grad_norm(const std::vector<double>& g) {
  double acc = 0.0;
  for (double v : g) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace

ReferenceSolution solve_reference(const PartitionedDataset& data, const HyperParams& hp,
                                  double grad_tol, long max_iters) {
  const int d = data.d();
  const int n = data.n();
  const auto& labels = data.eval_labels();

  ReferenceSolution sol;
  sol.w.assign(d, 0.0);
  double f = full_objective(data, sol.w, hp);

  // dense per-sample rows for the Hessian accumulation
  std::vector<std::vector<std::pair<int, double>>> rows(n);
  for (int l = 0; l < data.q(); ++l) {
    const auto& global = data.partition().blocks[l];
    for (int i = 0; i < n; ++i) {
      const SparseRow& rb = data.row_block(l, i);
      for (std::size_t k = 0; k < rb.idx.size(); ++k)
        rows[i].emplace_back(global[rb.idx[k]], rb.val[k]);
    }
  }

  std::vector<double> hess(static_cast<std::size_t>(d) * d);
  std::vector<double> step(d), trial(d), g_trial(d);

  for (long it = 0; it < max_iters; ++it) {
    auto fg = full_block_gradients(data, sol.w, hp);
    sol.grad_norm = grad_norm(fg.grad);
    sol.iterations = it;
    if (sol.grad_norm <= grad_tol) {
      sol.converged = true;
      break;
    }

    // Hessian = (1/n) sum L''_i x_i x_i' + lambda diag(reg'')
    std::fill(hess.begin(), hess.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double c = loss_curvature(hp.loss, data.full_inner_product(sol.w, i), labels[i]) / n;
      if (c == 0.0) continue;
      for (const auto& [ja, va] : rows[i]) {
        for (const auto& [jb, vb] : rows[i]) hess[ja * d + jb] += c * va * vb;
      }
    }
    for (int j = 0; j < d; ++j)
      hess[j * d + j] += hp.lambda * reg_curvature(hp.regularizer, sol.w[j]);

    // damped Newton: bump the ridge until the factorization succeeds
    double mu = 0.0;
    std::vector<double> chol;
    for (int tries = 0; tries < 60; ++tries) {
      chol = hess;
      if (mu > 0.0) {
        for (int j = 0; j < d; ++j) chol[j * d + j] += mu;
      }
      if (cholesky(chol, d)) break;
      mu = std::max(1e-10, mu * 8.0);
      chol.clear();
    }
    if (chol.empty()) break;

    for (int j = 0; j < d; ++j) step[j] = -fg.grad[j];
    cholesky_solve(chol, d, step);

    // backtracking: accept on objective decrease, or on gradient-norm
    // decrease once objective differences fall below fp resolution
    bool accepted = false;
    double t = 1.0;
    for (int bt = 0; bt < 40; ++bt) {
      for (int j = 0; j < d; ++j) trial[j] = sol.w[j] + t * step[j];
      const double f_trial = full_objective(data, trial, hp);
      bool ok = f_trial < f;
      if (!ok) {
        const auto fg_trial = full_block_gradients(data, trial, hp);
        ok = grad_norm(fg_trial.grad) < (1.0 - 0.1 * t) * sol.grad_norm;
      }
      if (ok) {
        sol.w = trial;
        f = f_trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      sol.converged = sol.grad_norm <= std::max(grad_tol, 1e-9);
      break;
    }
  }
  sol.objective = f;
  return sol;
}

}  // namespace vflsim
