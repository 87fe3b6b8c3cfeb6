#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vflsim/errors.hpp"

namespace vflsim {

// Disjoint split of feature indices {0..d-1} into q blocks, one per party.
struct FeaturePartition {
  int q = 0;
  int d = 0;
  std::vector<std::vector<int>> blocks;  // sorted ascending inside each block

  int block_size(int party) const { return static_cast<int>(blocks.at(party).size()); }
  void check_party(int party) const {
    if (party < 0 || party >= q) throw IndexError("party id out of range");
  }
};

// Seeded random partition with near-equal block sizes. The first (d mod q)
// blocks get the extra feature. Deterministic in (d, q, seed).
FeaturePartition make_partition(int d, int q, std::uint64_t seed);

// Mutable view of the block-ℓ entries of a length-d vector.
class BlockView {
 public:
  BlockView(std::vector<double>& vec, const std::vector<int>& idx) : vec_(&vec), idx_(&idx) {}

  std::size_t size() const { return idx_->size(); }
  double& operator[](std::size_t k) { return (*vec_)[(*idx_)[k]]; }
  double operator[](std::size_t k) const { return (*vec_)[(*idx_)[k]]; }

  std::vector<double> to_vector() const {
    std::vector<double> out(idx_->size());
    for (std::size_t k = 0; k < idx_->size(); ++k) out[k] = (*vec_)[(*idx_)[k]];
    return out;
  }
  void assign(std::span<const double> values) {
    if (values.size() != idx_->size()) throw DimensionError("block view assign size mismatch");
    for (std::size_t k = 0; k < idx_->size(); ++k) (*vec_)[(*idx_)[k]] = values[k];
  }

 private:
  std::vector<double>* vec_;
  const std::vector<int>* idx_;
};

BlockView block_view(std::vector<double>& vec, const FeaturePartition& partition, int party);
std::vector<double> gather_block(std::span<const double> vec, const FeaturePartition& partition,
                                 int party);
void scatter_block(std::vector<double>& vec, const FeaturePartition& partition, int party,
                   std::span<const double> values);

}  // namespace vflsim
