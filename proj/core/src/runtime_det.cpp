#include <algorithm>
#include <chrono>
#include <deque>
#include <random>

#include "runtime_internal.hpp"
#include "vflsim/model.hpp"
#include "vflsim/objectives.hpp"
#include "vflsim/rng.hpp"

namespace vflsim {

DelayScheduler::DelayScheduler(std::uint64_t seed, int tau1, int tau2)
    : state_(derive_seed(seed, /*tag=*/0x736368656400ULL)), tau1_(tau1), tau2_(tau2) {}

int DelayScheduler::draw_read_staleness(int available) {
  const int cap = std::min(tau1_, available);
  if (cap <= 0) return 0;
  const int s = static_cast<int>(splitmix64(state_) % static_cast<std::uint64_t>(cap + 1));
  max_read_ = std::max<long>(max_read_, s);
  return s;
}

int DelayScheduler::draw_message_delay() {
  if (tau2_ <= 0) return 0;
  return static_cast<int>(splitmix64(state_) % static_cast<std::uint64_t>(tau2_ + 1));
}

void DelayScheduler::note_delivery_age(long age) { max_delay_ = std::max(max_delay_, age); }

namespace detail {

namespace {

using Clock = std::chrono::steady_clock;

struct AppliedUpdate {
  int party;
  std::vector<double> delta;
};

struct PendingMsg {
  ThetaMessage msg;
  int target;
  long issue;
  int due_age;
};

class DetEngine {
 public:
  DetEngine(const SimConfig& cfg, const PartitionedDataset& train, const PartitionedDataset* test,
            const TranscriptHook& hook)
      : cfg_(cfg),
        train_(train),
        test_(test),
        hook_(hook),
        model_(train.partition()),
        w_(model_.w),
        sched_(cfg.hp.seed, cfg.hp.tau1, cfg.hp.tau2),
        dispatch_rng_(make_engine(cfg.hp.seed, /*tag=*/0x64697370ULL)) {
    for (int a = 0; a < cfg_.m; ++a)
      sample_rngs_.push_back(make_engine(cfg_.hp.seed, 0x70617274790000ULL + a));
    if (cfg_.aggregation == AggregationMode::Masked)
      trees_ = build_tree_pair(cfg_.q, cfg_.hp.seed);
    trace_.block_update_counts.assign(cfg_.q, 0);
  }

  TrainingTrace run() {
    start_ = Clock::now();
    init_algorithm_state();
    record_row(0);

    const int n = train_.n();
    for (int epoch = 1; epoch <= cfg_.hp.epochs; ++epoch) {
      for (int step = 0; step < n; ++step) {
        dominated_update();
        deliver_due();
      }
      flush_pending();
      record_row(epoch);
      if (stop_reached_) break;
      if (cfg_.hp.algorithm == Algorithm::Svrg && epoch < cfg_.hp.epochs) refresh_snapshot(epoch);
    }
    finalize();
    if (cfg_.objective_stop && !stop_reached_)
      throw NonConvergenceError("objective stop not reached within epoch budget", trace_);
    return std::move(trace_);
  }

 private:
  // deterministic mode reports a simulated clock so traces replay
  // byte-identically; one unit per block update plus the configured
  // per-feature work, inflated for the straggler party
  double wall_ms() const { return sim_us_ / 1000.0; }

  double party_factor(int party) const {
    return cfg_.straggler.party_id == party ? cfg_.straggler.factor : 1.0;
  }

  void charge(int party, int features) {
    sim_us_ += (1.0 + cfg_.work_per_feature_us * features) * party_factor(party);
  }

  InnerProductFn snapshot_inner_fn() {
    if (cfg_.aggregation == AggregationMode::Exact) return nullptr;
    return [this](int i, std::span<const double> w) { return aggregated_inner(w, i); };
  }

  void init_algorithm_state() {
    if (cfg_.hp.algorithm == Algorithm::Svrg) {
      algo_.snapshot = take_snapshot(train_, w_, cfg_.hp, 0, snapshot_inner_fn());
      algo_.has_snapshot = true;
    } else if (cfg_.hp.algorithm == Algorithm::Saga) {
      algo_.tables = init_saga_tables(train_, w_, cfg_.hp, snapshot_inner_fn());
    }
  }

  void refresh_snapshot(int epoch) {
    algo_.snapshot = take_snapshot(train_, w_, cfg_.hp, epoch, snapshot_inner_fn());
  }

  double aggregated_inner(std::span<const double> w_read, int i) {
    for (int l = 0; l < cfg_.q; ++l) charge(l, train_.partition().block_size(l));
    if (cfg_.aggregation == AggregationMode::Exact) return train_.full_inner_product(w_read, i);
    std::vector<double> partials(cfg_.q);
    for (int l = 0; l < cfg_.q; ++l) partials[l] = train_.block_inner_product(w_read, l, i);
    MaskedAggregateOptions opts;
    opts.mask_scale = cfg_.mask_scale;
    opts.unmask_debug = cfg_.unmask_debug;
    auto [result, transcript] = masked_aggregate(
        partials, derive_seed(cfg_.hp.seed, 0xA6670000ULL + static_cast<std::uint64_t>(agg_count_)),
        trees_, opts);
    ++agg_count_;
    if (hook_) hook_(partials, transcript);
    return result;
  }

  std::vector<double> stale_read() {
    std::vector<double> w_read = w_;
    if (cfg_.mode == RunMode::Centralized) return w_read;
    const int s = sched_.draw_read_staleness(static_cast<int>(recent_.size()));
    for (int u = 0; u < s; ++u) {
      const AppliedUpdate& upd = recent_[recent_.size() - 1 - u];
      const auto& global = train_.partition().blocks[upd.party];
      for (std::size_t kk = 0; kk < upd.delta.size(); ++kk)
        w_read[global[kk]] -= upd.delta[kk];
    }
    return w_read;
  }

  void apply(int party, const std::vector<double>& delta) {
    const auto& global = train_.partition().blocks[party];
    for (std::size_t kk = 0; kk < delta.size(); ++kk) w_[global[kk]] += delta[kk];
    model_.bump_version(party);
    trace_.block_update_counts[party] = model_.block_versions[party];
    charge(party, static_cast<int>(delta.size()));
    if (cfg_.hp.tau1 > 0 && cfg_.mode != RunMode::Centralized) {
      recent_.push_back({party, delta});
      while (static_cast<int>(recent_.size()) > cfg_.hp.tau1) recent_.pop_front();
    }
  }

  void dominated_update() {
    const int a = cfg_.m == 1
                      ? 0
                      : static_cast<int>(dispatch_rng_() % static_cast<std::uint64_t>(cfg_.m));
    const int i = static_cast<int>(sample_rngs_[a]() % static_cast<std::uint64_t>(train_.n()));

    const auto w_read = stale_read();
    const double inner = aggregated_inner(w_read, i);

    if (cfg_.mode == RunMode::Centralized) {
      centralized_apply(a, i, inner);
      ++dominated_;
      return;
    }

    auto ctx = make_context(cfg_, train_, a, algo_);
    auto [msg, dir] =
        dominated_step(ctx, i, inner, gather_block(w_read, train_.partition(), a), dominated_);
    apply(a, dir.delta);
    ++dominated_;

    const bool frozen = cfg_.mode == RunMode::FrozenPassive;
    for (int p = 0; p < cfg_.q; ++p) {
      if (p == a) continue;
      if (frozen && !is_active(cfg_, p)) continue;
      pending_.push_back({msg, p, dominated_, sched_.draw_message_delay()});
    }
  }

  void deliver(const PendingMsg& pm) {
    sched_.note_delivery_age(dominated_ - pm.issue);
    auto ctx = make_context(cfg_, train_, pm.target, algo_);
    auto dir = collaborative_step(ctx, pm.msg, gather_block(w_, train_.partition(), pm.target));
    apply(pm.target, dir.delta);
  }

  void deliver_due() {
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (dominated_ - it->issue >= it->due_age) {
        deliver(*it);
        it = pending_.erase(it);
      } else {
        ++it;
      }
    }
  }

  void flush_pending() {
    for (const auto& pm : pending_) deliver(pm);
    pending_.clear();
  }

  // The non-federated reference path: one worker updates every block from the
  // same read, with the update rules spelled out inline.
  void centralized_apply(int acting_party, int i, double inner) {
    const double y = train_.eval_labels()[i];
    const double th = theta(cfg_.hp.loss, inner, y);

    std::vector<int> order;
    order.push_back(acting_party);
    for (int l = 0; l < cfg_.q; ++l) {
      if (l != acting_party) order.push_back(l);
    }

    for (int l : order) {
      const auto& global = train_.partition().blocks[l];
      const auto w_block = gather_block(w_, train_.partition(), l);
      auto grad_now =
          block_gradient(th, train_.row_block(l, i), cfg_.hp.lambda, cfg_.hp.regularizer, w_block);
      std::vector<double> v;
      switch (cfg_.hp.algorithm) {
        case Algorithm::Sgd:
          v = std::move(grad_now);
          break;
        case Algorithm::Svrg: {
          const auto& snap = algo_.snapshot;
          const auto ws_block = gather_block(snap.w_s, train_.partition(), l);
          const auto grad_snap = block_gradient(snap.theta0[i], train_.row_block(l, i),
                                                cfg_.hp.lambda, cfg_.hp.regularizer, ws_block);
          v.resize(grad_now.size());
          for (std::size_t kk = 0; kk < v.size(); ++kk)
            v[kk] = grad_now[kk] - grad_snap[kk] + snap.full_grad[global[kk]];
          break;
        }
        case Algorithm::Saga: {
          SagaTable& table = algo_.tables[l];
          const auto old_row = table.row(i);
          const auto mean = table.mean();
          v.resize(grad_now.size());
          for (std::size_t kk = 0; kk < v.size(); ++kk)
            v[kk] = grad_now[kk] - old_row[kk] + mean[kk];
          table.update_row(i, grad_now);
          break;
        }
      }
      for (std::size_t kk = 0; kk < v.size(); ++kk) w_[global[kk]] -= cfg_.hp.gamma * v[kk];
      model_.bump_version(l);
      trace_.block_update_counts[l] = model_.block_versions[l];
      charge(l, static_cast<int>(v.size()));
    }
  }

  void record_row(int epoch) {
    TraceRow row;
    row.epoch = epoch;
    row.wall_ms = wall_ms();
    row.objective = full_objective(train_, w_, cfg_.hp);
    row.test_metric = test_metric(test_ ? *test_ : train_, w_, cfg_.hp.loss);
    row.max_staleness = std::max(sched_.max_read_staleness(), sched_.max_message_delay());
    trace_.rows.push_back(row);
    if (cfg_.record_epoch_models) trace_.epoch_models.push_back(w_);
    if (cfg_.objective_stop && epoch > 0 && row.objective <= *cfg_.objective_stop)
      stop_reached_ = true;
  }

  void finalize() {
    trace_.final_w = w_;
    trace_.total_dominated_updates = dominated_;
    trace_.max_read_staleness = sched_.max_read_staleness();
    trace_.max_message_delay = sched_.max_message_delay();
    trace_.reached_stop = stop_reached_;
    trace_.wall_ms_total = wall_ms();
  }

  const SimConfig& cfg_;
  const PartitionedDataset& train_;
  const PartitionedDataset* test_;
  TranscriptHook hook_;

  ModelState model_;
  std::vector<double>& w_;
  std::deque<AppliedUpdate> recent_;
  std::deque<PendingMsg> pending_;
  DelayScheduler sched_;
  std::mt19937_64 dispatch_rng_;
  std::vector<std::mt19937_64> sample_rngs_;
  AlgoState algo_;
  TreePair trees_;
  long dominated_ = 0;
  long agg_count_ = 0;
  double sim_us_ = 0.0;
  bool stop_reached_ = false;
  TrainingTrace trace_;
  Clock::time_point start_;
};

}  // namespace

TrainingTrace run_deterministic(const SimConfig& cfg, const PartitionedDataset& train,
                                const PartitionedDataset* test, const TranscriptHook& hook) {
  DetEngine engine(cfg, train, test, hook);
  return engine.run();
}

}  // namespace detail
}  // namespace vflsim
