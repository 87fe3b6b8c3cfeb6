#pragma once

#include <functional>
#include <span>

#include "vflsim/optimizers.hpp"
#include "vflsim/runtime.hpp"

namespace vflsim::detail {

// Parties 0..m-1 are the active ones.
inline bool is_active(const SimConfig& cfg, int party) { return party < cfg.m; }

struct AlgoState {
  SvrgSnapshot snapshot;
  std::vector<SagaTable> tables;
  bool has_snapshot = false;
};

inline PartyContext make_context(const SimConfig& cfg, const PartitionedDataset& train, int party,
                                 AlgoState& state) {
  PartyContext ctx;
  ctx.party_id = party;
  ctx.active = is_active(cfg, party);
  ctx.algorithm = cfg.hp.algorithm;
  ctx.loss = cfg.hp.loss;
  ctx.regularizer = cfg.hp.regularizer;
  ctx.lambda = cfg.hp.lambda;
  ctx.gamma = cfg.hp.gamma;
  ctx.data = &train;
  ctx.snapshot = state.has_snapshot ? &state.snapshot : nullptr;
  ctx.saga = cfg.hp.algorithm == Algorithm::Saga && !state.tables.empty() ? &state.tables[party]
                                                                          : nullptr;
  return ctx;
}

using TranscriptHook =
    std::function<void(std::span<const double> partials, const AggregationTranscript&)>;

TrainingTrace run_deterministic(const SimConfig& cfg, const PartitionedDataset& train,
                                const PartitionedDataset* test,
                                const TranscriptHook& hook = nullptr);

TrainingTrace run_threaded_async(const SimConfig& cfg, const PartitionedDataset& train,
                                 const PartitionedDataset* test);

TrainingTrace run_threaded_sync(const SimConfig& cfg, const PartitionedDataset& train,
                                const PartitionedDataset* test);

}  // namespace vflsim::detail
