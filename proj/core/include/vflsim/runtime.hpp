#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vflsim/dataset.hpp"
#include "vflsim/secure_agg.hpp"
#include "vflsim/types.hpp"

namespace vflsim {

enum class RunMode { Async, Sync, Centralized, FrozenPassive };
enum class AggregationMode { Exact, Masked };

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);
std::string to_string(AggregationMode m);
AggregationMode aggregation_from_string(const std::string& s);

struct StragglerSpec {
  int party_id = -1;  // <0: no straggler
  double factor = 1.4;
};

struct SimConfig {
  int q = 2;
  int m = 1;
  int k = 1;
  RunMode mode = RunMode::Async;
  // Seeded single-thread interleaver (replayable, enforces the staleness
  // bounds exactly) versus free-running threads (real wall time).
  bool deterministic = true;
  AggregationMode aggregation = AggregationMode::Exact;
  double mask_scale = 1e3;
  bool unmask_debug = false;  // draw zero masks (audit demonstrations only)
  StragglerSpec straggler;
  HyperParams hp;
  int theta_queue_capacity = 256;
  // simulated per-feature compute cost, for wall-time experiments
  double work_per_feature_us = 0.0;
  std::optional<double> objective_stop;  // stop when train objective <= value
  bool record_epoch_models = false;

  void validate() const;
};

struct TraceRow {
  double epoch = 0.0;
  double wall_ms = 0.0;
  double objective = 0.0;
  double test_metric = 0.0;
  long max_staleness = 0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  std::vector<double> final_w;
  std::vector<std::vector<double>> epoch_models;  // filled when record_epoch_models
  std::vector<long> block_update_counts;          // per party
  long total_dominated_updates = 0;
  long max_read_staleness = 0;
  long max_message_delay = 0;
  bool reached_stop = false;
  double wall_ms_total = 0.0;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, TrainingTrace partial)
      : Error(what), partial_(std::move(partial)) {}
  const TrainingTrace& partial_trace() const { return partial_; }

 private:
  TrainingTrace partial_;
};

// Train under the configured mode. `test` supplies the held-out metric; when
// absent the training metric is reported. Throws NonConvergenceError when an
// objective_stop is set and not reached within the epoch budget.
TrainingTrace run(const SimConfig& config, const PartitionedDataset& train,
                  const PartitionedDataset* test = nullptr);

// Seeded interleaver for the deterministic engine: draws read staleness and
// per-message delivery ages, enforces the configured bounds, and records the
// realized maxima.
class DelayScheduler {
 public:
  DelayScheduler(std::uint64_t seed, int tau1, int tau2);

  int draw_read_staleness(int available);  // <= min(tau1, available)
  int draw_message_delay();                // target delivery age <= tau2
  void note_delivery_age(long age);

  long max_read_staleness() const { return max_read_; }
  long max_message_delay() const { return max_delay_; }
  int tau1() const { return tau1_; }
  int tau2() const { return tau2_; }

 private:
  std::uint64_t state_;
  int tau1_;
  int tau2_;
  long max_read_ = 0;
  long max_delay_ = 0;
};

struct SpeedupRow {
  int q = 0;
  double wall_ms = 0.0;
  std::optional<double> speedup;  // empty when this q failed to converge
};

// Paper-style scalability sweep: run to the configured objective_stop for
// each party count; speedup(q) = wall(1 party) / wall(q parties).
std::vector<SpeedupRow> run_speedup_suite(const SimConfig& base, const RawDataset& train_raw,
                                          const RawDataset* test_raw,
                                          const std::vector<int>& q_list);

struct AuditRunSummary {
  int aggregations = 0;
  long violations = 0;
  std::vector<std::string> reports;  // one text block per violating aggregation
};

// Drive masked aggregations exactly as training does and audit every
// transcript; optionally simulate a colluding pair or zeroed masks.
AuditRunSummary run_audit(const SimConfig& config, const PartitionedDataset& train,
                          int n_aggregations, bool simulate_collusion, bool unmask_debug);

}  // namespace vflsim
