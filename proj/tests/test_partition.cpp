#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "vflsim/partition.hpp"
#include "vflsim/rng.hpp"

using namespace vflsim;

namespace {

std::set<int> all_indices(const FeaturePartition& p) {
  std::set<int> seen;
  for (const auto& block : p.blocks) seen.insert(block.begin(), block.end());
  return seen;
}

}  // namespace

TEST_CASE("make_partition d=4 q=2 covers all features with equal blocks") {
  const auto p = make_partition(4, 2, 0);
  REQUIRE(p.blocks.size() == 2);
  CHECK(p.blocks[0].size() == 2);
  CHECK(p.blocks[1].size() == 2);
  CHECK(all_indices(p) == std::set<int>{0, 1, 2, 3});
}

TEST_CASE("make_partition d=5 q=2 splits 3/2") {
  const auto p = make_partition(5, 2, 7);
  CHECK(p.blocks[0].size() == 3);
  CHECK(p.blocks[1].size() == 2);
  CHECK(all_indices(p).size() == 5);
}

TEST_CASE("make_partition d=90 q=8 gives two blocks of 12 and six of 11") {
  const auto p = make_partition(90, 8, 1);
  int twelves = 0, elevens = 0, total = 0;
  for (const auto& block : p.blocks) {
    total += static_cast<int>(block.size());
    if (block.size() == 12) ++twelves;
    if (block.size() == 11) ++elevens;
  }
  CHECK(twelves == 2);
  CHECK(elevens == 6);
  CHECK(total == 90);
  CHECK(all_indices(p).size() == 90);  // exhaustive disjoint-cover count
  CHECK(*all_indices(p).rbegin() == 89);
}

TEST_CASE("make_partition is deterministic in its arguments") {
  const auto a = make_partition(33, 5, 42);
  const auto b = make_partition(33, 5, 42);
  CHECK(a.blocks == b.blocks);
  const auto c = make_partition(33, 5, 43);
  CHECK(a.blocks != c.blocks);
}

TEST_CASE("make_partition rejects d < q") {
  CHECK_THROWS_AS(make_partition(3, 4, 0), InvalidPartitionError);
  CHECK_THROWS_AS(make_partition(5, 0, 0), InvalidPartitionError);
}

TEST_CASE("partition invariants hold over random shapes") {
  std::uint64_t s = 99;
  for (int trial = 0; trial < 50; ++trial) {
    const int q = 1 + static_cast<int>(splitmix64(s) % 12);
    const int d = q + static_cast<int>(splitmix64(s) % 200);
    const auto p = make_partition(d, q, splitmix64(s));
    std::size_t min_sz = d, max_sz = 0, total = 0;
    for (const auto& block : p.blocks) {
      min_sz = std::min(min_sz, block.size());
      max_sz = std::max(max_sz, block.size());
      total += block.size();
    }
    CHECK(total == static_cast<std::size_t>(d));
    CHECK(max_sz - min_sz <= 1);
    CHECK(all_indices(p).size() == static_cast<std::size_t>(d));
  }
}

TEST_CASE("block_view gathers and writes through") {
  FeaturePartition p;
  p.q = 2;
  p.d = 4;
  p.blocks = {{0, 2}, {1, 3}};

  std::vector<double> v{1, 2, 3, 4};
  auto view0 = block_view(v, p, 0);
  auto view1 = block_view(v, p, 1);
  CHECK(view0.to_vector() == std::vector<double>{1, 3});
  CHECK(view1.to_vector() == std::vector<double>{2, 4});

  const std::vector<double> nines{9, 9};
  view0.assign(nines);
  CHECK(v == std::vector<double>{9, 2, 9, 4});
}

TEST_CASE("block_view rejects out-of-range parties") {
  FeaturePartition p;
  p.q = 2;
  p.d = 2;
  p.blocks = {{0}, {1}};
  std::vector<double> v{1, 2};
  CHECK_THROWS_AS(block_view(v, p, 2), IndexError);
  CHECK_THROWS_AS(block_view(v, p, -1), IndexError);
}

TEST_CASE("scattering all block views reconstructs the vector") {
  const auto p = make_partition(23, 4, 3);
  std::vector<double> original(23);
  std::iota(original.begin(), original.end(), 1.0);

  std::vector<double> rebuilt(23, 0.0);
  for (int l = 0; l < p.q; ++l) {
    scatter_block(rebuilt, p, l, gather_block(original, p, l));
  }
  CHECK(rebuilt == original);
}
