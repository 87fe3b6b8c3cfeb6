#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vflsim/partition.hpp"
#include "vflsim/types.hpp"

namespace vflsim {

// Sparse feature row; indices ascending. Missing indices are implicit zeros.
struct SparseRow {
  std::vector<int> idx;
  std::vector<double> val;

  std::size_t nnz() const { return idx.size(); }
};

struct RawDataset {
  int n = 0;
  int d = 0;
  std::vector<SparseRow> rows;
  std::vector<double> labels;
};

// LIBSVM sparse text format: `label idx:val idx:val ...`, 1-based indices.
RawDataset parse_libsvm(const std::string& path);
RawDataset parse_libsvm_stream(std::istream& in);
void write_libsvm(std::ostream& out, const RawDataset& data);

// Numeric CSV with a header row; classification labels {0,1} map to {-1,+1}.
RawDataset parse_csv(const std::string& path, int label_column);
RawDataset parse_csv_stream(std::istream& in, int label_column);

struct LabelScaling {
  double min = 0.0;
  double max = 0.0;
  double apply(double y) const { return max > min ? (y - min) / (max - min) : 0.0; }
  double invert(double t) const { return max > min ? min + t * (max - min) : min; }
};
// Min-max normalization of regression targets into [0,1]; constant labels map to 0.
LabelScaling minmax_normalize_labels(RawDataset& data);

// Optional per-feature min-max scaling into [0,1]; off by default in configs.
void minmax_normalize_features(RawDataset& data);

std::pair<RawDataset, RawDataset> train_test_split(const RawDataset& data, double test_fraction,
                                                   std::uint64_t seed);

// Vertically partitioned view of a dataset: per-party column blocks plus
// labels guarded by an access list of active party ids.
class PartitionedDataset {
 public:
  PartitionedDataset() = default;
  static PartitionedDataset vertical_split(const RawDataset& data, int q, std::uint64_t seed);
  static PartitionedDataset vertical_split(const RawDataset& data, FeaturePartition partition);

  int n() const { return n_; }
  int d() const { return partition_.d; }
  int q() const { return partition_.q; }
  const FeaturePartition& partition() const { return partition_; }

  // Row i restricted to party's block, with block-local indices.
  const SparseRow& row_block(int party, int i) const;

  void grant_label_access(std::span<const int> active_party_ids);
  bool has_label_access(int party_id) const;

  // Label read on behalf of a party; passive parties are refused.
  double label(int i, const PartyRole& as) const;
  // Labels for evaluation/metrics outside the federation protocol.
  const std::vector<double>& eval_labels() const { return labels_; }

  // w' x_i accumulated block by block in party order (the exact-aggregation
  // arithmetic order shared by the centralized oracle).
  double full_inner_product(std::span<const double> w, int i) const;
  // Party-local partial w_block' (x_i)_block.
  double block_inner_product(std::span<const double> w, int party, int i) const;

 private:
  int n_ = 0;
  FeaturePartition partition_;
  std::vector<std::vector<SparseRow>> blocks_;  // [party][sample]
  std::vector<double> labels_;
  std::vector<int> label_access_;
};

PartitionedDataset vertical_partition_dataset(const RawDataset& data, int q, std::uint64_t seed);

}  // namespace vflsim
