#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"
#include "vflsim/objectives.hpp"
#include "vflsim/reference.hpp"
#include "vflsim/rng.hpp"
#include "vflsim/synthetic.hpp"

using namespace vflsim;
using test_support::tiny_dataset;

TEST_CASE("theta at the standard anchor points") {
  CHECK(theta(LossKind::Logistic, 0.0, 1.0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(theta(LossKind::Square, 3.0, 3.0) == doctest::Approx(0.0));
  CHECK(theta(LossKind::RobustLinear, 1.0, 2.0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("theta matches the finite-difference derivative of each loss") {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double inner = unif(eng);
    const double yreg = unif(eng);
    const double ycls = trial % 2 == 0 ? 1.0 : -1.0;

    const double t_log = theta(LossKind::Logistic, inner, ycls);
    const double fd_log = oracles::central_diff(
        [&](double z) { return loss_value(LossKind::Logistic, z, ycls); }, inner);
    CHECK(oracles::rel_err(t_log, fd_log) < 1e-5);

    const double t_sq = theta(LossKind::Square, inner, yreg);
    const double fd_sq = oracles::central_diff(
        [&](double z) { return loss_value(LossKind::Square, z, yreg); }, inner);
    CHECK(oracles::rel_err(t_sq, fd_sq) < 1e-5);

    const double t_rob = theta(LossKind::RobustLinear, inner, yreg);
    const double fd_rob = oracles::central_diff(
        [&](double z) { return loss_value(LossKind::RobustLinear, z, yreg); }, inner);
    CHECK(oracles::rel_err(t_rob, fd_rob) < 1e-5);
  }
}

TEST_CASE("theta rejects non-finite input") {
  CHECK_THROWS_AS(theta(LossKind::Logistic, std::numeric_limits<double>::quiet_NaN(), 1.0),
                  NumericalError);
  CHECK_THROWS_AS(theta(LossKind::Square, std::numeric_limits<double>::infinity(), 0.0),
                  NumericalError);
}

TEST_CASE("logistic theta is overflow-safe and in the right range") {
  CHECK(std::isfinite(theta(LossKind::Logistic, 1000.0, 1.0)));
  CHECK(std::isfinite(theta(LossKind::Logistic, -1000.0, 1.0)));
  CHECK(theta(LossKind::Logistic, 1000.0, 1.0) == doctest::Approx(0.0));
  CHECK(theta(LossKind::Logistic, -1000.0, 1.0) == doctest::Approx(-1.0));

  std::mt19937_64 eng(11);
  // |inner| <= 30 keeps 1/(1+e^t) strictly inside (0,1) at double precision
  std::uniform_real_distribution<double> unif(-30.0, 30.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double inner = unif(eng);
    const double tp = theta(LossKind::Logistic, inner, 1.0);
    const double tm = theta(LossKind::Logistic, inner, -1.0);
    CHECK(tp > -1.0);
    CHECK(tp < 0.0);
    CHECK(tm > 0.0);
    CHECK(tm < 1.0);
  }
}

TEST_CASE("theta is strictly increasing in the inner product for logistic and square") {
  double prev_log = theta(LossKind::Logistic, -20.0, 1.0);
  double prev_sq = theta(LossKind::Square, -20.0, 0.5);
  for (double inner = -19.5; inner <= 20.0; inner += 0.5) {
    const double cur_log = theta(LossKind::Logistic, inner, 1.0);
    const double cur_sq = theta(LossKind::Square, inner, 0.5);
    CHECK(cur_log > prev_log);
    CHECK(cur_sq > prev_sq);
    prev_log = cur_log;
    prev_sq = cur_sq;
  }
}

TEST_CASE("reg_grad anchor values") {
  const std::vector<double> w1{1.0, -2.0};
  CHECK(reg_grad(RegularizerKind::L2, w1) == std::vector<double>{1.0, -2.0});

  const std::vector<double> w2{0.0, 0.0};
  CHECK(reg_grad(RegularizerKind::NonconvexRational, w2) == std::vector<double>{0.0, 0.0});

  const std::vector<double> w3{1.0};
  CHECK(reg_grad(RegularizerKind::NonconvexRational, w3)[0] == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(reg_grad(RegularizerKind::None, w1) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("reg_grad matches finite differences of the regularizer value") {
  std::mt19937_64 eng(13);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(4);
    for (double& x : w) x = unif(eng);
    for (auto reg : {RegularizerKind::L2, RegularizerKind::NonconvexRational}) {
      const auto got = reg_grad(reg, w);
      const auto want = oracles::fd_gradient(
          [&](const std::vector<double>& v) { return reg_value(reg, v); }, w, {0, 1, 2, 3});
      CHECK(oracles::max_rel_err(got, want) < 1e-5);
    }
  }
}

TEST_CASE("block_gradient anchor values") {
  {
    const std::vector<double> x{5.0, 5.0}, w{1.0, 1.0};
    CHECK(block_gradient(0.0, x, 0.0, RegularizerKind::None, w) == std::vector<double>{0.0, 0.0});
  }
  {
    const std::vector<double> x{2.0, 0.0}, w{1.0, 1.0};
    const auto g = block_gradient(-0.5, x, 0.1, RegularizerKind::L2, w);
    CHECK(g[0] == doctest::Approx(-0.9).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(0.1).epsilon(1e-12));
  }
  {
    const std::vector<double> x{1.0}, w{0.0};
    CHECK(block_gradient(2.0, x, 0.0, RegularizerKind::None, w) == std::vector<double>{2.0});
  }
}

TEST_CASE("block_gradient rejects mismatched lengths") {
  const std::vector<double> x{1.0, 2.0}, w{1.0};
  CHECK_THROWS_AS(block_gradient(1.0, x, 0.0, RegularizerKind::None, w), DimensionError);
}

TEST_CASE("chain rule: block_gradient equals finite differences of the composite") {
  // full per-sample objective restricted to a block, all loss x regularizer pairs
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> unif(-1.5, 1.5);
  const int dim = 5;
  for (auto loss : {LossKind::Logistic, LossKind::Square, LossKind::RobustLinear}) {
    for (auto reg :
         {RegularizerKind::L2, RegularizerKind::NonconvexRational, RegularizerKind::None}) {
      for (int trial = 0; trial < 12; ++trial) {
        std::vector<double> x(dim), w(dim);
        for (double& v : x) v = unif(eng);
        for (double& v : w) v = unif(eng);
        const double y = loss == LossKind::Logistic ? (trial % 2 ? 1.0 : -1.0) : unif(eng);
        const double lambda = 0.1;

        double inner = 0.0;
        for (int j = 0; j < dim; ++j) inner += w[j] * x[j];
        const auto got = block_gradient(theta(loss, inner, y), x, lambda, reg, w);

        std::vector<int> coords(dim);
        for (int j = 0; j < dim; ++j) coords[j] = j;
        const auto want = oracles::fd_gradient(
            [&](const std::vector<double>& v) {
              double ip = 0.0;
              for (int j = 0; j < dim; ++j) ip += v[j] * x[j];
              return loss_value(loss, ip, y) + lambda * reg_value(reg, v);
            },
            w, coords);
        CHECK(oracles::max_rel_err(got, want) < 1e-5);
      }
    }
  }
}

TEST_CASE("full_objective anchors") {
  HyperParams hp;
  hp.lambda = 0.0;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::None;

  const auto one = tiny_dataset({{1.0, -2.0}}, {1.0}, 2);
  const std::vector<double> w0{0.0, 0.0};
  CHECK(full_objective(one, w0, hp) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  hp.loss = LossKind::Square;
  const auto fit = tiny_dataset({{1.0, 0.0}, {0.0, 1.0}}, {2.0, -3.0}, 2);
  const std::vector<double> w_star{2.0, -3.0};
  CHECK(full_objective(fit, w_star, hp) == doctest::Approx(0.0));
}

TEST_CASE("full_objective two-sample logistic with l2, hand-evaluated oracle") {
  // samples x0=(1,0) y=+1, x1=(0.5,-1) y=-1, w=(1,0), lambda=0.1
  HyperParams hp;
  hp.lambda = 0.1;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::L2;
  const auto data = tiny_dataset({{1.0, 0.0}, {0.5, -1.0}}, {1.0, -1.0}, 2);
  const std::vector<double> w{1.0, 0.0};

  // independent scalar evaluation
  const double l0 = std::log(1.0 + std::exp(-1.0 * 1.0));
  const double l1 = std::log(1.0 + std::exp(+1.0 * 0.5));
  const double reg = 0.5 * (1.0 * 1.0 + 0.0);
  const double want = 0.5 * (l0 + l1) + 0.1 * reg;

  CHECK(full_objective(data, w, hp) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("full_objective rejects empty data") {
  PartitionedDataset empty;
  HyperParams hp;
  const std::vector<double> w;
  CHECK_THROWS_AS(full_objective(empty, w, hp), EmptyDataError);
}

TEST_CASE("full_objective with the rational regularizer stays finite on random inputs") {
  auto raw = make_synthetic({.n = 60, .d = 8, .seed = 5, .classification = true});
  const auto data = PartitionedDataset::vertical_split(raw, 3, 5);
  HyperParams hp;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::NonconvexRational;
  hp.lambda = 0.5;
  std::mt19937_64 eng(23);
  std::uniform_real_distribution<double> unif(-30.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(8);
    for (double& v : w) v = unif(eng);
    const double f = full_objective(data, w, hp);
    CHECK(std::isfinite(f));
    CHECK(f >= 0.0);
  }
}

TEST_CASE("full_block_gradients: single sample reduces to block_gradient") {
  HyperParams hp;
  hp.lambda = 0.2;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::L2;
  const auto data = tiny_dataset({{1.0, -0.5, 2.0}}, {1.0}, 2, 3);
  const std::vector<double> w{0.3, -0.2, 0.1};

  const auto fg = full_block_gradients(data, w, hp);
  const double inner = data.full_inner_product(w, 0);
  const double th = theta(hp.loss, inner, 1.0);
  CHECK(fg.theta0[0] == doctest::Approx(th).epsilon(1e-15));

  for (int l = 0; l < data.q(); ++l) {
    const auto w_block = gather_block(w, data.partition(), l);
    const auto want = block_gradient(th, data.row_block(l, 0), hp.lambda, hp.regularizer, w_block);
    const auto& global = data.partition().blocks[l];
    for (std::size_t k = 0; k < global.size(); ++k)
      CHECK(fg.grad[global[k]] == doctest::Approx(want[k]).epsilon(1e-12));
  }
}

TEST_CASE("full gradient vanishes at the reference optimum") {
  auto raw = make_synthetic({.n = 80, .d = 6, .seed = 21, .classification = true});
  const auto data = PartitionedDataset::vertical_split(raw, 2, 21);
  HyperParams hp;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::L2;
  hp.lambda = 1e-2;

  const auto ref = solve_reference(data, hp, 1e-10);
  REQUIRE(ref.converged);
  const auto fg = full_block_gradients(data, ref.w, hp);
  double norm = 0.0;
  for (double g : fg.grad) norm += g * g;
  CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("full_block_gradients matches averaged finite differences") {
  auto raw = make_synthetic({.n = 25, .d = 6, .seed = 31, .classification = true});
  const auto data = PartitionedDataset::vertical_split(raw, 3, 31);
  HyperParams hp;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::NonconvexRational;
  hp.lambda = 0.05;

  std::mt19937_64 eng(37);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> w(6);
  for (double& v : w) v = unif(eng);

  const auto got = full_block_gradients(data, w, hp);
  std::vector<int> coords{0, 1, 2, 3, 4, 5};
  const auto want = oracles::fd_gradient(
      [&](const std::vector<double>& v) { return full_objective(data, v, hp); }, w, coords);
  CHECK(oracles::max_rel_err(got.grad, want) < 1e-5);
}
