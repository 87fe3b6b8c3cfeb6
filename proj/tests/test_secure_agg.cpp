#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vflsim/rng.hpp"
#include "vflsim/secure_agg.hpp"

using namespace vflsim;

namespace {

// the appendix-style example pair on four parties:
// T1 pairs {0,1} and {2,3}; T2 pairs {0,2} and {1,3}
TreePair example_pair() {
  TreePair pair;
  pair.t1 = balanced_binary_tree({0, 1, 2, 3});
  pair.t2 = balanced_binary_tree({0, 2, 1, 3});
  pair.degraded = false;
  return pair;
}

}  // namespace

TEST_CASE("checker accepts the example pair and rejects identical trees") {
  const auto pair = example_pair();
  CHECK(significantly_different(pair.t1, pair.t2));
  CHECK(significantly_different(pair.t2, pair.t1));  // symmetric
  CHECK_FALSE(significantly_different(pair.t1, pair.t1));
}

TEST_CASE("checker rejects five-party trees sharing the internal pair {2,3}") {
  const auto a = balanced_binary_tree({2, 3, 0, 1, 4});
  const auto b = balanced_binary_tree({2, 3, 4, 1, 0});
  // oracle: enumerate every proper subtree leaf set of both and intersect
  std::set<std::vector<int>> sets_a, sets_b;
  for (const auto& s : a.proper_leaf_sets()) sets_a.insert(s);
  for (const auto& s : b.proper_leaf_sets()) sets_b.insert(s);
  bool shared = false;
  for (const auto& s : sets_a) shared = shared || sets_b.count(s) > 0;
  REQUIRE(shared);
  CHECK_FALSE(significantly_different(a, b));
}

TEST_CASE("checker requires matching party sets") {
  const auto a = balanced_binary_tree({0, 1, 2});
  const auto b = balanced_binary_tree({0, 1, 2, 3});
  CHECK_THROWS_AS(significantly_different(a, b), InvalidInputError);
}

TEST_CASE("build_tree_pair flags degraded pairs for q in {2,3}") {
  const auto p2 = build_tree_pair(2, 0);
  CHECK(p2.degraded);
  CHECK_FALSE(significantly_different(p2.t1, p2.t2));  // impossible at q=2

  const auto p3 = build_tree_pair(3, 0);
  CHECK(p3.degraded);

  CHECK_THROWS_AS(build_tree_pair(1, 0), InvalidPartyCountError);
}

TEST_CASE("build_tree_pair passes the checker for q=8 over 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto pair = build_tree_pair(8, seed);
    CHECK_FALSE(pair.degraded);
    CHECK(significantly_different(pair.t1, pair.t2));
  }
}

TEST_CASE("masked aggregation recovers the plain sum") {
  const auto pair = build_tree_pair(2, 5);
  const std::vector<double> partials{1.5, 2.5};
  auto [result, transcript] = masked_aggregate(partials, 7, pair);
  CHECK(std::abs(result - 4.0) <= 1e-9 * 5.0);
  CHECK(transcript.result == result);
}

TEST_CASE("zero partials aggregate to zero through nonzero payloads") {
  const auto pair = build_tree_pair(4, 9);
  const std::vector<double> partials{0.0, 0.0, 0.0, 0.0};
  auto [result, transcript] = masked_aggregate(partials, 11, pair);
  CHECK(std::abs(result) <= 1e-9);
  for (const auto& msg : transcript.messages) {
    if (msg.phase == MessagePhase::Masked) CHECK(msg.payload != 0.0);
  }
}

TEST_CASE("aggregation exactness: 1000 random trials at q=8") {
  const auto pair = build_tree_pair(8, 1);
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> partials(8);
    for (double& p : partials) p = unif(eng);
    const double want = oracles::direct_sum(partials);
    auto [result, transcript] = masked_aggregate(partials, 1000 + trial, pair);
    worst = std::max(worst, std::abs(result - want) / (1.0 + std::abs(want)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("aggregation exactness holds for q in 2..16 with masks up to 1e6") {
  std::mt19937_64 eng(29);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  MaskedAggregateOptions opts;
  opts.mask_scale = 1e6;
  for (int q = 2; q <= 16; ++q) {
    const auto pair = build_tree_pair(q, 40 + q);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> partials(q);
      for (double& p : partials) p = unif(eng);
      const double want = oracles::direct_sum(partials);
      auto [result, transcript] = masked_aggregate(partials, trial, pair, opts);
      CHECK(std::abs(result - want) <= 1e-9 * (1.0 + std::abs(want)));
    }
  }
}

TEST_CASE("no transmitted payload matches a bare partial") {
  std::mt19937_64 eng(31);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int q : {2, 4, 8, 13}) {
    const auto pair = build_tree_pair(q, 60 + q);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> partials(q);
      for (double& p : partials) p = unif(eng);
      auto [result, transcript] = masked_aggregate(partials, trial, pair);
      (void)result;
      for (const auto& msg : transcript.messages) {
        for (double p : partials) CHECK(std::abs(msg.payload - p) > 1e-12);
      }
    }
  }
}

TEST_CASE("masked_aggregate rejects mismatched partial counts") {
  const auto pair = build_tree_pair(4, 0);
  const std::vector<double> partials{1.0, 2.0};
  CHECK_THROWS_AS(masked_aggregate(partials, 0, pair), InvalidInputError);
}

TEST_CASE("honest transcripts audit clean") {
  std::mt19937_64 eng(37);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int q : {2, 3, 4, 8, 16}) {
    const auto pair = build_tree_pair(q, 80 + q);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> partials(q);
      for (double& p : partials) p = unif(eng);
      auto [result, transcript] = masked_aggregate(partials, trial, pair);
      (void)result;
      const auto report = audit_transcript(transcript, partials);
      CHECK(report.pass());
    }
  }
}

TEST_CASE("zero masks expose every contribution, q violations") {
  const auto pair = build_tree_pair(6, 91);
  std::vector<double> partials{0.4, -1.2, 3.3, 0.7, -0.2, 2.1};
  MaskedAggregateOptions opts;
  opts.unmask_debug = true;
  auto [result, transcript] = masked_aggregate(partials, 5, pair, opts);
  CHECK(result == doctest::Approx(oracles::direct_sum(partials)));
  const auto report = audit_transcript(transcript, partials);
  CHECK(report.violations.size() == 6);
}

TEST_CASE("collusion between the two receivers of one party's leaf messages") {
  // paper's example: T1 sends party 3's masked value to party 2; T2 sends its
  // mask to party 1; parties 1 and 2 jointly recover party 3's partial
  const auto pair = example_pair();
  const std::vector<double> partials{0.25, -0.75, 1.5, 2.25};
  auto [result, transcript] = masked_aggregate(partials, 17, pair);
  (void)result;

  CHECK(audit_transcript(transcript, partials).pass());

  const auto report = audit_transcript(transcript, partials, {{1, 2}});
  REQUIRE_FALSE(report.pass());
  bool party3_exposed = false;
  for (const auto& v : report.violations) party3_exposed |= v.exposed_party == 3;
  CHECK(party3_exposed);
}

TEST_CASE("audit report renders as line-oriented text") {
  const auto pair = example_pair();
  const std::vector<double> partials{1.0, 2.0, 3.0, 4.0};
  MaskedAggregateOptions opts;
  opts.unmask_debug = true;
  auto [result, transcript] = masked_aggregate(partials, 0, pair, opts);
  (void)result;
  const auto report = audit_transcript(transcript, partials);
  const auto text = report.to_text();
  CHECK(text.find("violation") != std::string::npos);
  CHECK(text.find("VIOLATION") != std::string::npos);
}
