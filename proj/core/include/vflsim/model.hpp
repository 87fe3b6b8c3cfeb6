#pragma once

#include <vector>

#include "vflsim/partition.hpp"

namespace vflsim {

// Global parameter vector stored contiguously; each party owns one block.
struct ModelState {
  std::vector<double> w;
  FeaturePartition partition;
  std::vector<long> block_versions;

  explicit ModelState(FeaturePartition p)
      : w(p.d, 0.0), partition(std::move(p)), block_versions(partition.q, 0) {}

  BlockView block(int party) { return block_view(w, partition, party); }
  std::vector<double> block_copy(int party) const {
    return gather_block(w, partition, party);
  }
  void bump_version(int party) {
    partition.check_party(party);
    ++block_versions[party];
  }
};

}  // namespace vflsim
