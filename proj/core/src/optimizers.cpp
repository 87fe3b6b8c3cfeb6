#include "vflsim/optimizers.hpp"

#include <cmath>

#include "vflsim/errors.hpp"
#include "vflsim/partition.hpp"

namespace vflsim {

SagaTable::SagaTable(int n, int block_dim)
    : n_(n), block_dim_(block_dim), rows_(static_cast<std::size_t>(n) * block_dim, 0.0),
      mean_(block_dim, 0.0) {}

std::span<const double> SagaTable::row(int i) const {
  if (i < 0 || i >= n_) throw IndexError("saga table row out of range");
  return {rows_.data() + static_cast<std::size_t>(i) * block_dim_,
          static_cast<std::size_t>(block_dim_)};
}

void SagaTable::set_row_init(int i, std::span<const double> grad) {
  if (i < 0 || i >= n_) throw IndexError("saga table row out of range");
  if (static_cast<int>(grad.size()) != block_dim_) throw DimensionError("saga row size mismatch");
  std::copy(grad.begin(), grad.end(), rows_.begin() + static_cast<std::size_t>(i) * block_dim_);
}

void SagaTable::finalize_mean() {
  std::fill(mean_.begin(), mean_.end(), 0.0);
  for (int i = 0; i < n_; ++i) {
    const double* r = rows_.data() + static_cast<std::size_t>(i) * block_dim_;
    for (int k = 0; k < block_dim_; ++k) mean_[k] += r[k];
  }
  for (double& m : mean_) m /= n_;
}

void SagaTable::update_row(int i, std::span<const double> new_grad) {
  if (i < 0 || i >= n_) throw IndexError("saga table row out of range");
  if (static_cast<int>(new_grad.size()) != block_dim_)
    throw DimensionError("saga row size mismatch");
  double* r = rows_.data() + static_cast<std::size_t>(i) * block_dim_;
  const double inv_n = 1.0 / n_;
  for (int k = 0; k < block_dim_; ++k) {
    mean_[k] += (new_grad[k] - r[k]) * inv_n;
    r[k] = new_grad[k];
  }
}

namespace {

void check_sample(const PartyContext& ctx, int sample) {
  if (ctx.data == nullptr) throw StateError("party context has no dataset");
  if (sample < 0 || sample >= ctx.data->n()) throw IndexError("unknown sample index");
}

// v for the given fresh block gradient under the party's algorithm; SAGA
// mutates its table row afterwards.
std::vector<double> variance_reduced_direction(const PartyContext& ctx, int sample,
                                               std::vector<double> grad_now) {
  switch (ctx.algorithm) {
    case Algorithm::Sgd:
      return grad_now;
    case Algorithm::Svrg: {
      if (ctx.snapshot == nullptr) throw StateError("svrg step without a snapshot");
      const auto& snap = *ctx.snapshot;
      const auto& part = ctx.data->partition();
      const auto w_s_block = gather_block(snap.w_s, part, ctx.party_id);
      const auto grad_snap = block_gradient(snap.theta0[sample],
                                            ctx.data->row_block(ctx.party_id, sample), ctx.lambda,
                                            ctx.regularizer, w_s_block);
      const auto& global = part.blocks[ctx.party_id];
      std::vector<double> v(grad_now.size());
      for (std::size_t k = 0; k < v.size(); ++k)
        v[k] = grad_now[k] - grad_snap[k] + snap.full_grad[global[k]];
      return v;
    }
    case Algorithm::Saga: {
      if (ctx.saga == nullptr) throw StateError("saga step without a gradient table");
      const auto old_row = ctx.saga->row(sample);
      const auto mean = ctx.saga->mean();
      std::vector<double> v(grad_now.size());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = grad_now[k] - old_row[k] + mean[k];
      ctx.saga->update_row(sample, grad_now);
      return v;
    }
  }
  throw InvalidInputError("unknown algorithm");
}

UpdateDirection make_direction(const PartyContext& ctx, std::vector<double> v,
                               UpdateDirection::Source source, long logical_time) {
  UpdateDirection dir;
  dir.party_id = ctx.party_id;
  dir.source = source;
  dir.logical_time = logical_time;
  dir.delta.resize(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) dir.delta[k] = -ctx.gamma * v[k];
  return dir;
}

}  // namespace

std::pair<ThetaMessage, UpdateDirection> dominated_step(const PartyContext& ctx, int sample,
                                                        double inner_estimate,
                                                        std::span<const double> w_own_block,
                                                        long logical_time) {
  if (!ctx.active) throw RoleError("passive party cannot launch a dominated update");
  check_sample(ctx, sample);

  const double y = ctx.data->label(sample, PartyRole::active_party(ctx.party_id));
  const double theta_val = theta(ctx.loss, inner_estimate, y);

  ThetaMessage msg;
  msg.theta = theta_val;
  msg.sample = sample;
  msg.issuer = ctx.party_id;
  msg.timestamp = logical_time;
  msg.snapshot_epoch = ctx.algorithm == Algorithm::Svrg && ctx.snapshot != nullptr
                           ? ctx.snapshot->epoch_id
                           : -1;

  auto grad_now = block_gradient(theta_val, ctx.data->row_block(ctx.party_id, sample), ctx.lambda,
                                 ctx.regularizer, w_own_block);
  auto v = variance_reduced_direction(ctx, sample, std::move(grad_now));
  return {msg, make_direction(ctx, std::move(v), UpdateDirection::Source::Dominated, logical_time)};
}

UpdateDirection collaborative_step(const PartyContext& ctx, const ThetaMessage& msg,
                                   std::span<const double> w_own_block) {
  check_sample(ctx, msg.sample);
  if (ctx.algorithm == Algorithm::Svrg && ctx.snapshot != nullptr && msg.snapshot_epoch >= 0 &&
      msg.snapshot_epoch != ctx.snapshot->epoch_id) {
    // messages never cross the snapshot barrier; a mismatch means the
    // runtime failed to drain its queues
    throw StateError("theta message from a different snapshot epoch");
  }
  auto grad_now = block_gradient(msg.theta, ctx.data->row_block(ctx.party_id, msg.sample),
                                 ctx.lambda, ctx.regularizer, w_own_block);
  auto v = variance_reduced_direction(ctx, msg.sample, std::move(grad_now));
  return make_direction(ctx, std::move(v), UpdateDirection::Source::Collaborative, msg.timestamp);
}

SvrgSnapshot take_snapshot(const PartitionedDataset& data, std::span<const double> w,
                           const HyperParams& hp, int epoch_id, const InnerProductFn& inner) {
  SvrgSnapshot snap;
  snap.w_s.assign(w.begin(), w.end());
  snap.epoch_id = epoch_id;
  if (!inner) {
    auto fg = full_block_gradients(data, w, hp);
    snap.full_grad = std::move(fg.grad);
    snap.theta0 = std::move(fg.theta0);
    return snap;
  }

  // aggregated inner products (possibly masked), then the same per-block
  // assembly as the exact path
  snap.theta0.resize(data.n());
  const auto& labels = data.eval_labels();
  for (int i = 0; i < data.n(); ++i) snap.theta0[i] = theta(hp.loss, inner(i, w), labels[i]);

  snap.full_grad.assign(data.d(), 0.0);
  const double inv_n = 1.0 / data.n();
  for (int l = 0; l < data.q(); ++l) {
    const auto& global = data.partition().blocks[l];
    const auto w_block = gather_block(w, data.partition(), l);
    std::vector<double> acc(global.size(), 0.0);
    for (int i = 0; i < data.n(); ++i) {
      const SparseRow& row = data.row_block(l, i);
      for (std::size_t k = 0; k < row.idx.size(); ++k)
        acc[row.idx[k]] += snap.theta0[i] * row.val[k];
    }
    const auto rg = reg_grad(hp.regularizer, w_block);
    for (std::size_t k = 0; k < global.size(); ++k)
      snap.full_grad[global[k]] = acc[k] * inv_n + hp.lambda * rg[k];
  }
  return snap;
}

std::vector<SagaTable> init_saga_tables(const PartitionedDataset& data,
                                        std::span<const double> w, const HyperParams& hp,
                                        const InnerProductFn& inner) {
  const auto& labels = data.eval_labels();
  std::vector<double> theta_at_w(data.n());
  for (int i = 0; i < data.n(); ++i) {
    const double ip = inner ? inner(i, w) : data.full_inner_product(w, i);
    theta_at_w[i] = theta(hp.loss, ip, labels[i]);
  }

  std::vector<SagaTable> tables;
  tables.reserve(data.q());
  for (int l = 0; l < data.q(); ++l) {
    SagaTable table(data.n(), data.partition().block_size(l));
    const auto w_block = gather_block(w, data.partition(), l);
    for (int i = 0; i < data.n(); ++i) {
      const auto g = block_gradient(theta_at_w[i], data.row_block(l, i), hp.lambda,
                                    hp.regularizer, w_block);
      table.set_row_init(i, g);
    }
    table.finalize_mean();
    tables.push_back(std::move(table));
  }
  return tables;
}

}  // namespace vflsim
