#include "vflsim/runtime.hpp"

#include <algorithm>

#include "runtime_internal.hpp"
#include "vflsim/objectives.hpp"
#include "vflsim/rng.hpp"

namespace vflsim {

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::Async: return "async";
    case RunMode::Sync: return "sync";
    case RunMode::Centralized: return "centralized";
    case RunMode::FrozenPassive: return "frozen_passive";
  }
  return "?";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "async") return RunMode::Async;
  if (s == "sync") return RunMode::Sync;
  if (s == "centralized") return RunMode::Centralized;
  if (s == "frozen_passive" || s == "frozen") return RunMode::FrozenPassive;
  throw ConfigError("unknown run mode: " + s);
}

std::string to_string(AggregationMode m) {
  return m == AggregationMode::Exact ? "exact" : "masked";
}

AggregationMode aggregation_from_string(const std::string& s) {
  if (s == "exact") return AggregationMode::Exact;
  if (s == "masked") return AggregationMode::Masked;
  throw ConfigError("unknown aggregation mode: " + s);
}

void SimConfig::validate() const {
  if (q < 1 || q > 64) throw ConfigError("party count must be in [1,64]");
  if (m < 1 || m > q) throw ConfigError("active party count must satisfy 1 <= m <= q");
  if (k < 1) throw ConfigError("threads per party must be >= 1");
  if (theta_queue_capacity < 1) throw ConfigError("theta queue capacity must be >= 1");
  if (mask_scale <= 0.0) throw ConfigError("mask scale must be > 0");
  if (work_per_feature_us < 0.0) throw ConfigError("work per feature must be >= 0");
  if (straggler.party_id >= 0) {
    if (straggler.party_id >= q) throw ConfigError("straggler party out of range");
    if (straggler.factor < 1.3 || straggler.factor > 1.5)
      throw ConfigError("straggler slowdown factor must be in [1.3, 1.5]");
  }
  hp.validate();
}

TrainingTrace run(const SimConfig& config_in, const PartitionedDataset& train,
                  const PartitionedDataset* test) {
  SimConfig config = config_in;
  config.validate();
  if (train.q() != config.q)
    throw ConfigError("dataset partition has a different party count than the config");
  if (train.n() == 0) throw EmptyDataError("empty training set");
  // a lone party has nothing to mask; its inner products are local
  if (config.q == 1) config.aggregation = AggregationMode::Exact;

  switch (config.mode) {
    case RunMode::Centralized:
      // single exact-read worker; always the deterministic single-thread path
      return detail::run_deterministic(config, train, test);
    case RunMode::Sync:
      return detail::run_threaded_sync(config, train, test);
    case RunMode::Async:
    case RunMode::FrozenPassive:
      return config.deterministic ? detail::run_deterministic(config, train, test)
                                  : detail::run_threaded_async(config, train, test);
  }
  throw ConfigError("unknown run mode");
}

std::vector<SpeedupRow> run_speedup_suite(const SimConfig& base, const RawDataset& train_raw,
                                          const RawDataset* test_raw,
                                          const std::vector<int>& q_list) {
  if (q_list.empty()) throw InvalidInputError("q_list must be nonempty");
  if (!base.objective_stop)
    throw ConfigError("speedup suite needs an objective stop target");

  auto wall_for_q = [&](int q) -> std::optional<double> {
    SimConfig cfg = base;
    cfg.q = q;
    cfg.m = std::min(base.m, q);
    if (cfg.straggler.party_id >= q) cfg.straggler.party_id = q - 1;
    const auto part = make_partition(train_raw.d, q, cfg.hp.seed);
    const auto train = PartitionedDataset::vertical_split(train_raw, part);
    PartitionedDataset test;
    if (test_raw) test = PartitionedDataset::vertical_split(*test_raw, part);
    try {
      const auto trace = run(cfg, train, test_raw ? &test : nullptr);
      // wall time at the epoch where the target was first met
      for (const auto& row : trace.rows) {
        if (row.epoch > 0 && row.objective <= *cfg.objective_stop) return row.wall_ms;
      }
      return trace.wall_ms_total;
    } catch (const NonConvergenceError&) {
      return std::nullopt;
    }
  };

  const std::optional<double> base_wall = wall_for_q(1);

  std::vector<SpeedupRow> rows;
  rows.reserve(q_list.size());
  for (int q : q_list) {
    SpeedupRow row;
    row.q = q;
    const auto wall = (q == 1) ? base_wall : wall_for_q(q);
    if (wall) {
      row.wall_ms = *wall;
      if (base_wall) row.speedup = *base_wall / *wall;
    }
    rows.push_back(row);
  }
  return rows;
}

AuditRunSummary run_audit(const SimConfig& config, const PartitionedDataset& train,
                          int n_aggregations, bool simulate_collusion, bool unmask_debug) {
  SimConfig cfg = config;
  cfg.validate();
  cfg.aggregation = AggregationMode::Masked;
  cfg.deterministic = true;
  cfg.mode = RunMode::Async;
  cfg.objective_stop.reset();
  // enough passes to produce the requested number of aggregations
  cfg.hp.epochs = std::max(1, (n_aggregations + train.n() - 1) / train.n() + 1);

  std::vector<std::pair<int, int>> collusion;
  if (simulate_collusion) {
    // probe the tree pair the run will use and collude the first pair of
    // receivers whose joint transcripts break some third party's mask
    const auto trees = build_tree_pair(cfg.q, cfg.hp.seed);
    std::vector<double> probe(cfg.q);
    for (int p = 0; p < cfg.q; ++p) probe[p] = 0.5 + p;
    const auto [sum, transcript] = masked_aggregate(probe, derive_seed(cfg.hp.seed, 0xBEEF), trees);
    (void)sum;
    for (int x = 0; x < cfg.q && collusion.empty(); ++x) {
      for (int y = x + 1; y < cfg.q && collusion.empty(); ++y) {
        if (!audit_transcript(transcript, probe, {{x, y}}).pass()) collusion.emplace_back(x, y);
      }
    }
  }

  cfg.unmask_debug = unmask_debug;

  AuditRunSummary summary;
  detail::TranscriptHook hook = [&](std::span<const double> partials,
                                    const AggregationTranscript& transcript) {
    if (summary.aggregations >= n_aggregations) return;
    ++summary.aggregations;
    const auto report = audit_transcript(transcript, partials, collusion);
    if (!report.pass()) {
      summary.violations += static_cast<long>(report.violations.size());
      if (summary.reports.size() < 32) summary.reports.push_back(report.to_text());
    }
  };

  try {
    (void)detail::run_deterministic(cfg, train, nullptr, hook);
  } catch (const NonConvergenceError&) {
  }
  return summary;
}

}  // namespace vflsim
