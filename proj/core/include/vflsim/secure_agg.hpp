#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vflsim/errors.hpp"

namespace vflsim {

// Rooted binary aggregation tree over parties 0..q-1. Leaves are party ids;
// each internal node is hosted by the party hosting its first child, so the
// second child's host sends its subtree sum to the node host.
struct AggTree {
  struct Node {
    int parent = -1;
    int left = -1;
    int right = -1;  // -1 on leaves
    int host = -1;   // party that holds this node's running sum
  };
  int q = 0;
  std::vector<Node> nodes;  // nodes[0..q-1] are the leaves for parties 0..q-1
  int root = -1;

  bool is_leaf(int node) const { return nodes[node].left < 0; }
  // Sorted leaf sets of internal nodes with 2 <= size < q ("proper" subtrees).
  std::vector<std::vector<int>> proper_leaf_sets() const;
  std::vector<int> leaf_set(int node) const;
};

// Balanced binary tree whose leaves appear in the given party order.
AggTree balanced_binary_tree(const std::vector<int>& leaf_order);

struct TreePair {
  AggTree t1;
  AggTree t2;
  // q < 4: the returned pair is best-effort only; no pair of trees on so few
  // parties meets the full tree-difference requirement.
  bool degraded = false;
};

// Seeded pair (T1, T2) with significantly_different(T1,T2) for q >= 4.
TreePair build_tree_pair(int q, std::uint64_t seed);

// True iff no proper multi-leaf subtree of t1 shares its leaf set with a
// proper multi-leaf subtree of t2. Degenerate trees without any proper
// multi-leaf subtree (q <= 2) are never significantly different.
bool significantly_different(const AggTree& t1, const AggTree& t2);

enum class MessagePhase { Masked, MaskOnly };

struct AggMessage {
  int sender = -1;
  int receiver = -1;
  double payload = 0.0;
  double residual = 0.0;  // compensated-summation low word carried with the payload
  MessagePhase phase = MessagePhase::Masked;
  std::vector<int> leaf_set;  // parties whose terms the payload sums
};

struct AggregationTranscript {
  std::vector<AggMessage> messages;
  std::vector<double> leaf_masked;  // per party: partial + mask entering T1
  std::vector<double> leaf_mask;    // per party: mask entering T2
  double result = 0.0;
};

struct MaskedAggregateOptions {
  double mask_scale = 1e3;   // mask magnitude = scale * (1 + |local partial|)
  bool unmask_debug = false; // draw all masks as zero
};

// Algorithm: each party adds a random mask to its partial; masked values are
// summed over t1, masks over t2, and the result is the difference of the two
// roots. Subtree sums are carried as compensated double-doubles so mask
// cancellation stays exact to ~1 ulp of the true sum.
std::pair<double, AggregationTranscript> masked_aggregate(std::span<const double> partials,
                                                          std::uint64_t seed,
                                                          const TreePair& trees,
                                                          const MaskedAggregateOptions& opts = {});

struct AuditViolation {
  std::string description;
  std::vector<int> parties;  // who can perform the reconstruction
  int exposed_party = -1;    // whose partial is exposed, if any
};

struct AuditReport {
  std::vector<AuditViolation> violations;
  bool pass() const { return violations.empty(); }
  std::string to_text() const;
};

// Honest-but-curious audit of one transcript: flags unmasked contributions,
// payloads matching bare partials, and subtree sums a single receiver (or a
// colluding pair) can strip of their masks.
AuditReport audit_transcript(const AggregationTranscript& transcript,
                             std::span<const double> partials,
                             const std::vector<std::pair<int, int>>& collusion_pairs = {});

}  // namespace vflsim
