#include "vflsim/partition.hpp"

#include <algorithm>
#include <numeric>

#include "vflsim/rng.hpp"

namespace vflsim {

FeaturePartition make_partition(int d, int q, std::uint64_t seed) {
  if (q < 1) throw InvalidPartitionError("party count must be >= 1");
  if (d < q) throw InvalidPartitionError("feature count must be >= party count");

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  auto eng = make_engine(seed, /*tag=*/0x7061727469ULL);
  std::shuffle(order.begin(), order.end(), eng);

  FeaturePartition p;
  p.q = q;
  p.d = d;
  p.blocks.resize(q);
  const int base = d / q;
  const int extra = d % q;
  int pos = 0;
  for (int l = 0; l < q; ++l) {
    const int size = base + (l < extra ? 1 : 0);
    p.blocks[l].assign(order.begin() + pos, order.begin() + pos + size);
    std::sort(p.blocks[l].begin(), p.blocks[l].end());
    pos += size;
  }
  return p;
}

BlockView block_view(std::vector<double>& vec, const FeaturePartition& partition, int party) {
  partition.check_party(party);
  if (static_cast<int>(vec.size()) != partition.d)
    throw DimensionError("vector length does not match partition dimension");
  return BlockView(vec, partition.blocks[party]);
}

std::vector<double> gather_block(std::span<const double> vec, const FeaturePartition& partition,
                                 int party) {
  partition.check_party(party);
  if (static_cast<int>(vec.size()) != partition.d)
    throw DimensionError("vector length does not match partition dimension");
  const auto& idx = partition.blocks[party];
  std::vector<double> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = vec[idx[k]];
  return out;
}

void scatter_block(std::vector<double>& vec, const FeaturePartition& partition, int party,
                   std::span<const double> values) {
  partition.check_party(party);
  if (static_cast<int>(vec.size()) != partition.d)
    throw DimensionError("vector length does not match partition dimension");
  const auto& idx = partition.blocks[party];
  if (values.size() != idx.size()) throw DimensionError("block value count mismatch");
  for (std::size_t k = 0; k < idx.size(); ++k) vec[idx[k]] = values[k];
}

}  // namespace vflsim
