#include <atomic>
#include <barrier>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>

#include "runtime_internal.hpp"
#include "vflsim/objectives.hpp"
#include "vflsim/rng.hpp"

namespace vflsim::detail {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void atomic_max(std::atomic<long>& target, long value) {
  long cur = target.load(std::memory_order_relaxed);
  while (cur < value && !target.compare_exchange_weak(cur, value)) {
  }
}

double straggler_factor(const SimConfig& cfg, int party) {
  return cfg.straggler.party_id == party ? cfg.straggler.factor : 1.0;
}

// Simulated compute cost plus the straggler's slowdown of real elapsed time.
void simulate_work(const SimConfig& cfg, int party, int features, Clock::time_point t0) {
  if (cfg.work_per_feature_us > 0.0) {
    std::this_thread::sleep_for(
        std::chrono::duration<double, std::micro>(cfg.work_per_feature_us * features));
  }
  const double factor = straggler_factor(cfg, party);
  if (factor > 1.0) {
    const double elapsed_us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
    std::this_thread::sleep_for(
        std::chrono::duration<double, std::micro>(elapsed_us * (factor - 1.0)));
  }
}

// ---------------------------------------------------------------------------
// Free-running bilevel engine: one dominator thread per active party, k
// collaborative worker threads per party, element-atomic shared model. At
// each epoch boundary every thread parks at a gate; the monitor drains the
// theta queues, evaluates the trace row, and (for SVRG) refreshes the
// snapshot before releasing the gate.
// ---------------------------------------------------------------------------

class AsyncEngine {
 public:
  AsyncEngine(const SimConfig& cfg, const PartitionedDataset& train, const PartitionedDataset* test)
      : cfg_(cfg),
        train_(train),
        test_(test),
        d_(train.d()),
        w_(std::make_unique<std::atomic<double>[]>(train.d())),
        party_mutex_(cfg.q),
        queues_(cfg.q) {
    for (int j = 0; j < d_; ++j) w_[j].store(0.0, std::memory_order_relaxed);
    if (cfg_.aggregation == AggregationMode::Masked) trees_ = build_tree_pair(cfg_.q, cfg_.hp.seed);
    trace_.block_update_counts.assign(cfg_.q, 0);
  }

  TrainingTrace run() {
    start_ = Clock::now();
    init_algorithm_state();
    record_row(0);

    total_threads_ = cfg_.m + cfg_.q * cfg_.k;
    std::vector<std::thread> threads;
    threads.reserve(total_threads_);
    for (int a = 0; a < cfg_.m; ++a) threads.emplace_back([this, a] { dominator_loop(a); });
    for (int p = 0; p < cfg_.q; ++p) {
      for (int t = 0; t < cfg_.k; ++t) threads.emplace_back([this, p] { worker_loop(p); });
    }

    const long n = train_.n();
    for (int epoch = 1; epoch <= cfg_.hp.epochs && !stop_.load(); ++epoch) {
      while (dominated_.load(std::memory_order_acquire) < epoch * n && !stop_.load())
        std::this_thread::sleep_for(std::chrono::microseconds(50));
      enter_gate();
      drain_queues();
      record_row(epoch);
      if (stop_reached_) stop_.store(true);
      if (!stop_.load() && cfg_.hp.algorithm == Algorithm::Svrg && epoch < cfg_.hp.epochs)
        algo_.snapshot = take_snapshot(train_, gather_w(), cfg_.hp, epoch, snapshot_inner_fn());
      leave_gate();
    }
    stop_.store(true);
    wake_everyone();
    for (auto& t : threads) t.join();
    drain_queues();

    finalize();
    if (cfg_.objective_stop && !stop_reached_)
      throw NonConvergenceError("objective stop not reached within epoch budget", trace_);
    return std::move(trace_);
  }

 private:
  struct QueueEntry {
    ThetaMessage msg;
    long issue = 0;
  };
  struct PartyQueue {
    std::deque<QueueEntry> entries;
    std::mutex mu;
    std::condition_variable cv_push;  // producers wait for space
    std::condition_variable cv_pop;   // consumers wait for items
  };

  std::vector<double> gather_w() const {
    std::vector<double> out(d_);
    for (int j = 0; j < d_; ++j) out[j] = w_[j].load(std::memory_order_relaxed);
    return out;
  }

  InnerProductFn snapshot_inner_fn() {
    if (cfg_.aggregation == AggregationMode::Exact) return nullptr;
    return [this](int i, std::span<const double> w) { return masked_inner(w, i); };
  }

  double masked_inner(std::span<const double> w, int i) {
    std::vector<double> partials(cfg_.q);
    for (int l = 0; l < cfg_.q; ++l) partials[l] = train_.block_inner_product(w, l, i);
    MaskedAggregateOptions opts;
    opts.mask_scale = cfg_.mask_scale;
    opts.unmask_debug = cfg_.unmask_debug;
    const auto tag = agg_count_.fetch_add(1, std::memory_order_relaxed);
    return masked_aggregate(partials, derive_seed(cfg_.hp.seed, 0xA6670000ULL + tag), trees_, opts)
        .first;
  }

  void init_algorithm_state() {
    const auto w0 = gather_w();
    if (cfg_.hp.algorithm == Algorithm::Svrg) {
      algo_.snapshot = take_snapshot(train_, w0, cfg_.hp, 0, snapshot_inner_fn());
      algo_.has_snapshot = true;
    } else if (cfg_.hp.algorithm == Algorithm::Saga) {
      algo_.tables = init_saga_tables(train_, w0, cfg_.hp, snapshot_inner_fn());
    }
  }

  // --- epoch gate ---

  void enter_gate() {
    gate_requested_.store(true);
    wake_everyone();
    std::unique_lock lk(gate_mu_);
    gate_all_parked_cv_.wait(lk, [&] { return parked_ == total_threads_; });
  }

  void leave_gate() {
    {
      std::lock_guard lk(gate_mu_);
      gate_requested_.store(false);
    }
    gate_release_cv_.notify_all();
  }

  // Park the calling thread while a gate is requested. Returns once released.
  void park() {
    std::unique_lock lk(gate_mu_);
    ++parked_;
    gate_all_parked_cv_.notify_all();
    gate_release_cv_.wait(lk, [&] { return !gate_requested_.load() || stop_.load(); });
    --parked_;
  }

  void mark_exited() {
    std::lock_guard lk(gate_mu_);
    ++parked_;  // an exited thread counts as permanently parked
    gate_all_parked_cv_.notify_all();
  }

  void wake_everyone() {
    for (auto& q : queues_) {
      q.cv_pop.notify_all();
      q.cv_push.notify_all();
    }
    throttle_cv_.notify_all();
    gate_release_cv_.notify_all();
  }

  // While every thread is parked the monitor applies the pending
  // collaborative updates itself, so snapshots never see in-flight messages.
  void drain_queues() {
    for (int p = 0; p < cfg_.q; ++p) {
      while (true) {
        QueueEntry entry;
        {
          std::lock_guard lk(queues_[p].mu);
          if (queues_[p].entries.empty()) break;
          entry = std::move(queues_[p].entries.front());
          queues_[p].entries.pop_front();
        }
        process_message(p, entry);
      }
    }
  }

  // --- tau2 producer throttle: never start an update that would age some
  // pending message beyond tau2 dominated updates ---

  long oldest_pending_issue() {
    long oldest = std::numeric_limits<long>::max();
    for (auto& q : queues_) {
      std::lock_guard lk(q.mu);
      if (!q.entries.empty()) oldest = std::min(oldest, q.entries.front().issue);
    }
    return oldest;
  }

  void throttle_before_update() {
    std::unique_lock lk(throttle_mu_);
    throttle_cv_.wait(lk, [&] {
      if (stop_.load() || gate_requested_.load()) return true;
      const long oldest = oldest_pending_issue();
      if (oldest == std::numeric_limits<long>::max()) return true;
      return dominated_.load(std::memory_order_relaxed) + 1 - oldest <= cfg_.hp.tau2;
    });
  }

  // --- threads ---

  void dominator_loop(int party) {
    auto sample_rng = make_engine(cfg_.hp.seed, 0x70617274790000ULL + party);
    const int n = train_.n();
    while (!stop_.load(std::memory_order_relaxed)) {
      if (gate_requested_.load()) {
        park();
        continue;
      }
      throttle_before_update();
      if (stop_.load(std::memory_order_relaxed) || gate_requested_.load()) continue;

      const auto t0 = Clock::now();
      const int i = static_cast<int>(sample_rng() % static_cast<std::uint64_t>(n));

      // bounded-staleness read: retry when too many updates land mid-read
      std::vector<double> w_read;
      long staleness = 0;
      while (true) {
        const long c0 = update_counter_.load(std::memory_order_acquire);
        w_read = gather_w();
        const long c1 = update_counter_.load(std::memory_order_acquire);
        staleness = c1 - c0;
        if (staleness <= cfg_.hp.tau1 || stop_.load()) break;
        std::this_thread::sleep_for(std::chrono::microseconds(5));
      }
      atomic_max(max_read_staleness_, staleness);

      const double inner = cfg_.aggregation == AggregationMode::Exact
                               ? train_.full_inner_product(w_read, i)
                               : masked_inner(w_read, i);

      ThetaMessage msg_out;
      long my_count = 0;
      {
        std::lock_guard lk(party_mutex_[party]);
        auto ctx = make_context(cfg_, train_, party, algo_);
        auto [msg, dir] =
            dominated_step(ctx, i, inner, gather_block(w_read, train_.partition(), party),
                           dominated_.load(std::memory_order_relaxed));
        apply_block(party, dir.delta);
        update_counter_.fetch_add(1, std::memory_order_acq_rel);
        my_count = dominated_.fetch_add(1, std::memory_order_acq_rel) + 1;
        msg.timestamp = my_count;
        msg_out = msg;
      }
      simulate_work(cfg_, party, 2 * train_.partition().block_size(party), t0);

      const bool frozen = cfg_.mode == RunMode::FrozenPassive;
      for (int p = 0; p < cfg_.q && !stop_.load(std::memory_order_relaxed); ++p) {
        if (p == party) continue;
        if (frozen && !is_active(cfg_, p)) continue;
        push_message(p, QueueEntry{msg_out, my_count});
      }
    }
    mark_exited();
  }

  void worker_loop(int party) {
    while (true) {
      if (gate_requested_.load()) {
        park();
        continue;
      }
      QueueEntry entry;
      bool have = false;
      {
        std::unique_lock lk(queues_[party].mu);
        queues_[party].cv_pop.wait(lk, [&] {
          return !queues_[party].entries.empty() || stop_.load() || gate_requested_.load();
        });
        if (!queues_[party].entries.empty() && !gate_requested_.load()) {
          entry = std::move(queues_[party].entries.front());
          queues_[party].entries.pop_front();
          have = true;
        }
      }
      if (!have) {
        if (stop_.load()) break;
        continue;  // gate requested: park at loop top
      }
      queues_[party].cv_push.notify_one();
      throttle_cv_.notify_all();

      const auto t0 = Clock::now();
      process_message(party, entry);
      simulate_work(cfg_, party, 2 * train_.partition().block_size(party), t0);
    }
    mark_exited();
  }

  void process_message(int party, const QueueEntry& entry) {
    const long age = dominated_.load(std::memory_order_relaxed) - entry.issue;
    atomic_max(max_msg_delay_, age);
    std::lock_guard lk(party_mutex_[party]);
    auto ctx = make_context(cfg_, train_, party, algo_);
    auto own = gather_block_atomic(party);
    auto dir = collaborative_step(ctx, entry.msg, own);
    apply_block(party, dir.delta);
    update_counter_.fetch_add(1, std::memory_order_acq_rel);
  }

  std::vector<double> gather_block_atomic(int party) const {
    const auto& global = train_.partition().blocks[party];
    std::vector<double> out(global.size());
    for (std::size_t kk = 0; kk < global.size(); ++kk)
      out[kk] = w_[global[kk]].load(std::memory_order_relaxed);
    return out;
  }

  void apply_block(int party, const std::vector<double>& delta) {
    const auto& global = train_.partition().blocks[party];
    for (std::size_t kk = 0; kk < delta.size(); ++kk)
      w_[global[kk]].fetch_add(delta[kk], std::memory_order_relaxed);
    block_counts_[party].fetch_add(1, std::memory_order_relaxed);
  }

  void push_message(int target, QueueEntry entry) {
    std::unique_lock lk(queues_[target].mu);
    queues_[target].cv_push.wait(lk, [&] {
      return static_cast<int>(queues_[target].entries.size()) < cfg_.theta_queue_capacity ||
             stop_.load() || gate_requested_.load();
    });
    if (stop_.load()) return;
    queues_[target].entries.push_back(std::move(entry));
    queues_[target].cv_pop.notify_one();
  }

  void record_row(int epoch) {
    const auto w = gather_w();
    TraceRow row;
    row.epoch = epoch;
    row.wall_ms = ms_since(start_);
    row.objective = full_objective(train_, w, cfg_.hp);
    row.test_metric = test_metric(test_ ? *test_ : train_, w, cfg_.hp.loss);
    row.max_staleness = std::max(max_read_staleness_.load(), max_msg_delay_.load());
    trace_.rows.push_back(row);
    if (cfg_.record_epoch_models) trace_.epoch_models.push_back(w);
    if (cfg_.objective_stop && epoch > 0 && row.objective <= *cfg_.objective_stop)
      stop_reached_ = true;
  }

  void finalize() {
    trace_.final_w = gather_w();
    trace_.total_dominated_updates = dominated_.load();
    trace_.max_read_staleness = max_read_staleness_.load();
    trace_.max_message_delay = max_msg_delay_.load();
    trace_.reached_stop = stop_reached_;
    trace_.wall_ms_total = ms_since(start_);
    for (int p = 0; p < cfg_.q; ++p)
      trace_.block_update_counts[p] = block_counts_[p].load(std::memory_order_relaxed);
  }

  const SimConfig& cfg_;
  const PartitionedDataset& train_;
  const PartitionedDataset* test_;
  const int d_;

  std::unique_ptr<std::atomic<double>[]> w_;
  std::vector<std::mutex> party_mutex_;
  std::vector<PartyQueue> queues_;
  std::array<std::atomic<long>, 64> block_counts_{};

  std::atomic<long> dominated_{0};
  std::atomic<long> update_counter_{0};
  std::atomic<long> agg_count_{0};
  std::atomic<bool> stop_{false};
  std::atomic<bool> gate_requested_{false};
  std::atomic<long> max_read_staleness_{0};
  std::atomic<long> max_msg_delay_{0};

  std::mutex gate_mu_;
  int parked_ = 0;
  int total_threads_ = 0;
  std::condition_variable gate_all_parked_cv_;
  std::condition_variable gate_release_cv_;

  std::mutex throttle_mu_;
  std::condition_variable throttle_cv_;

  AlgoState algo_;
  TreePair trees_;
  bool stop_reached_ = false;
  TrainingTrace trace_;
  Clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Synchronous counterpart: per-round lockstep. Phase A reads and stages, the
// barrier flips, phase B applies every block update, then the main thread
// does epoch bookkeeping while the parties wait.
// ---------------------------------------------------------------------------

class SyncEngine {
 public:
  SyncEngine(const SimConfig& cfg, const PartitionedDataset& train, const PartitionedDataset* test)
      : cfg_(cfg), train_(train), test_(test), w_(train.d(), 0.0), staged_(cfg.m) {
    if (cfg_.aggregation == AggregationMode::Masked) trees_ = build_tree_pair(cfg_.q, cfg_.hp.seed);
    trace_.block_update_counts.assign(cfg_.q, 0);
  }

  TrainingTrace run() {
    start_ = Clock::now();
    init_algorithm_state();
    record_row(0);

    const long n = train_.n();
    const long rounds_per_epoch = std::max<long>(1, (n + cfg_.m - 1) / cfg_.m);
    const long total_rounds = rounds_per_epoch * cfg_.hp.epochs;
    std::barrier<> barrier(cfg_.q + 1);

    std::vector<std::thread> threads;
    for (int p = 0; p < cfg_.q; ++p) threads.emplace_back([&, p] { party_loop(p, barrier); });

    for (long round = 1; round <= total_rounds; ++round) {
      barrier.arrive_and_wait();  // phase A done
      barrier.arrive_and_wait();  // phase B done
      dominated_ += cfg_.m;
      if (round % rounds_per_epoch == 0) {
        const int epoch = static_cast<int>(round / rounds_per_epoch);
        record_row(epoch);
        if (stop_reached_) stop_ = true;
        if (!stop_ && cfg_.hp.algorithm == Algorithm::Svrg && epoch < cfg_.hp.epochs)
          algo_.snapshot = take_snapshot(train_, w_, cfg_.hp, epoch, snapshot_inner_fn());
      }
      if (round == total_rounds) stop_ = true;
      barrier.arrive_and_wait();  // bookkeeping done
      if (stop_) break;
    }
    for (auto& t : threads) t.join();

    finalize();
    if (cfg_.objective_stop && !stop_reached_)
      throw NonConvergenceError("objective stop not reached within epoch budget", trace_);
    return std::move(trace_);
  }

 private:
  struct Staged {
    ThetaMessage msg;
    std::vector<double> dominated_delta;
    bool valid = false;
  };

  InnerProductFn snapshot_inner_fn() {
    if (cfg_.aggregation == AggregationMode::Exact) return nullptr;
    return [this](int i, std::span<const double> w) { return masked_inner(w, i); };
  }

  double masked_inner(std::span<const double> w, int i) {
    std::vector<double> partials(cfg_.q);
    for (int l = 0; l < cfg_.q; ++l) partials[l] = train_.block_inner_product(w, l, i);
    MaskedAggregateOptions opts;
    opts.mask_scale = cfg_.mask_scale;
    opts.unmask_debug = cfg_.unmask_debug;
    const auto tag = agg_count_.fetch_add(1, std::memory_order_relaxed);
    return masked_aggregate(partials, derive_seed(cfg_.hp.seed, 0xA6670000ULL + tag), trees_, opts)
        .first;
  }

  void init_algorithm_state() {
    if (cfg_.hp.algorithm == Algorithm::Svrg) {
      algo_.snapshot = take_snapshot(train_, w_, cfg_.hp, 0, snapshot_inner_fn());
      algo_.has_snapshot = true;
    } else if (cfg_.hp.algorithm == Algorithm::Saga) {
      algo_.tables = init_saga_tables(train_, w_, cfg_.hp, snapshot_inner_fn());
    }
  }

  void party_loop(int party, std::barrier<>& barrier) {
    auto sample_rng = make_engine(cfg_.hp.seed, 0x70617274790000ULL + party);
    const int n = train_.n();
    while (true) {
      // phase A: reads only; every party serves the round's partial requests
      {
        const auto t0 = Clock::now();
        if (is_active(cfg_, party)) {
          const int i = static_cast<int>(sample_rng() % static_cast<std::uint64_t>(n));
          const double inner = cfg_.aggregation == AggregationMode::Exact
                                   ? train_.full_inner_product(w_, i)
                                   : masked_inner(w_, i);
          auto ctx = make_context(cfg_, train_, party, algo_);
          auto [msg, dir] = dominated_step(
              ctx, i, inner, gather_block(w_, train_.partition(), party), dominated_);
          staged_[party] = {msg, std::move(dir.delta), true};
        }
        const int service = cfg_.m * train_.partition().block_size(party);
        const int own = is_active(cfg_, party) ? train_.partition().block_size(party) : 0;
        simulate_work(cfg_, party, service + own, t0);
      }
      barrier.arrive_and_wait();

      // phase B: each party touches only its own block
      const auto t0 = Clock::now();
      const bool may_update = cfg_.mode != RunMode::FrozenPassive || is_active(cfg_, party);
      if (may_update) {
        if (is_active(cfg_, party) && staged_[party].valid)
          apply_block(party, staged_[party].dominated_delta);
        for (int issuer = 0; issuer < cfg_.m; ++issuer) {
          if (issuer == party || !staged_[issuer].valid) continue;
          auto ctx = make_context(cfg_, train_, party, algo_);
          auto dir = collaborative_step(ctx, staged_[issuer].msg,
                                        gather_block(w_, train_.partition(), party));
          apply_block(party, dir.delta);
        }
      }
      simulate_work(cfg_, party, train_.partition().block_size(party) * cfg_.m, t0);
      barrier.arrive_and_wait();

      barrier.arrive_and_wait();  // main bookkeeping in between
      if (stop_) break;
    }
  }

  void apply_block(int party, const std::vector<double>& delta) {
    const auto& global = train_.partition().blocks[party];
    for (std::size_t kk = 0; kk < delta.size(); ++kk) w_[global[kk]] += delta[kk];
    std::lock_guard lk(counts_mu_);
    ++trace_.block_update_counts[party];
  }

  void record_row(int epoch) {
    TraceRow row;
    row.epoch = epoch;
    row.wall_ms = ms_since(start_);
    row.objective = full_objective(train_, w_, cfg_.hp);
    row.test_metric = test_metric(test_ ? *test_ : train_, w_, cfg_.hp.loss);
    row.max_staleness = 0;
    trace_.rows.push_back(row);
    if (cfg_.record_epoch_models) trace_.epoch_models.push_back(w_);
    if (cfg_.objective_stop && epoch > 0 && row.objective <= *cfg_.objective_stop)
      stop_reached_ = true;
  }

  void finalize() {
    trace_.final_w = w_;
    trace_.total_dominated_updates = dominated_;
    trace_.reached_stop = stop_reached_;
    trace_.wall_ms_total = ms_since(start_);
  }

  const SimConfig& cfg_;
  const PartitionedDataset& train_;
  const PartitionedDataset* test_;
  std::vector<double> w_;
  std::vector<Staged> staged_;
  std::mutex counts_mu_;
  std::atomic<long> agg_count_{0};
  AlgoState algo_;
  TreePair trees_;
  long dominated_ = 0;
  bool stop_ = false;
  bool stop_reached_ = false;
  TrainingTrace trace_;
  Clock::time_point start_;
};

}  // namespace

TrainingTrace run_threaded_async(const SimConfig& cfg, const PartitionedDataset& train,
                                 const PartitionedDataset* test) {
  AsyncEngine engine(cfg, train, test);
  return engine.run();
}

TrainingTrace run_threaded_sync(const SimConfig& cfg, const PartitionedDataset& train,
                                const PartitionedDataset* test) {
  SyncEngine engine(cfg, train, test);
  return engine.run();
}

}  // namespace vflsim::detail
