#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "vflsim/dataset.hpp"
#include "vflsim/objectives.hpp"
#include "vflsim/types.hpp"

namespace vflsim {

// Broadcast payload of a dominated update. Carries the loss derivative and
// the sample index only; labels and feature values never ride along.
struct ThetaMessage {
  double theta = 0.0;
  int sample = -1;
  int issuer = -1;
  long timestamp = 0;
  int snapshot_epoch = -1;  // SVRG: which snapshot the issuing read belongs to
};

struct UpdateDirection {
  enum class Source { Dominated, Collaborative };
  int party_id = -1;
  std::vector<double> delta;  // -gamma * v, block-local
  Source source = Source::Dominated;
  long logical_time = 0;
};

// Reference point of an SVRG outer loop.
struct SvrgSnapshot {
  std::vector<double> w_s;        // full model copy
  std::vector<double> full_grad;  // length-d full gradient at w_s
  std::vector<double> theta0;     // per-sample theta at w_s
  int epoch_id = 0;
};

// Per-party SAGA history: one stored block gradient per sample plus the
// incrementally maintained mean.
class SagaTable {
 public:
  SagaTable() = default;
  SagaTable(int n, int block_dim);

  int n() const { return n_; }
  int block_dim() const { return block_dim_; }
  std::span<const double> row(int i) const;
  std::span<const double> mean() const { return mean_; }

  void set_row_init(int i, std::span<const double> grad);  // bulk init, no mean update
  void finalize_mean();
  void update_row(int i, std::span<const double> new_grad);  // mean += (new-old)/n

 private:
  int n_ = 0;
  int block_dim_ = 0;
  std::vector<double> rows_;  // n x block_dim
  std::vector<double> mean_;
};

// What a party needs to evaluate its update rule.
struct PartyContext {
  int party_id = -1;
  bool active = false;
  Algorithm algorithm = Algorithm::Sgd;
  LossKind loss = LossKind::Logistic;
  RegularizerKind regularizer = RegularizerKind::L2;
  double lambda = 0.0;
  double gamma = 0.1;
  const PartitionedDataset* data = nullptr;
  const SvrgSnapshot* snapshot = nullptr;  // SVRG
  SagaTable* saga = nullptr;               // SAGA
};

// Active-party step: computes theta from the aggregated inner product and the
// label, returns the broadcast message plus the dominator's own block
// direction. SAGA also replaces the sample's table row.
std::pair<ThetaMessage, UpdateDirection> dominated_step(const PartyContext& ctx, int sample,
                                                        double inner_estimate,
                                                        std::span<const double> w_own_block,
                                                        long logical_time);

// Any-party step driven by a received theta. No label parameter by
// construction: the gradient is assembled from theta and local state alone.
UpdateDirection collaborative_step(const PartyContext& ctx, const ThetaMessage& msg,
                                   std::span<const double> w_own_block);

// Aggregated w' x_i provider; lets callers route through masked aggregation
// or the exact block-sum path.
using InnerProductFn = std::function<double(int sample, std::span<const double> w)>;

SvrgSnapshot take_snapshot(const PartitionedDataset& data, std::span<const double> w,
                           const HyperParams& hp, int epoch_id,
                           const InnerProductFn& inner = nullptr);

std::vector<SagaTable> init_saga_tables(const PartitionedDataset& data,
                                        std::span<const double> w, const HyperParams& hp,
                                        const InnerProductFn& inner = nullptr);

}  // namespace vflsim
