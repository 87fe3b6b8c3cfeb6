#include "vflsim/secure_agg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vflsim/rng.hpp"

namespace vflsim {

namespace {

// Error-free transform: a + b = s + err exactly.
struct Dd {
  double hi = 0.0;
  double lo = 0.0;
};

Dd two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

Dd dd_add(const Dd& a, const Dd& b) {
  Dd s = two_sum(a.hi, b.hi);
  const double lo = a.lo + b.lo + s.lo;
  return two_sum(s.hi, lo);
}

Dd dd_sub(const Dd& a, const Dd& b) { return dd_add(a, Dd{-b.hi, -b.lo}); }

int build_balanced(AggTree& tree, const std::vector<int>& order, int lo, int hi) {
  if (hi - lo == 1) return order[lo];
  const int mid = lo + (hi - lo + 1) / 2;
  const int left = build_balanced(tree, order, lo, mid);
  const int right = build_balanced(tree, order, mid, hi);
  AggTree::Node node;
  node.left = left;
  node.right = right;
  node.host = tree.nodes[left].host;
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  tree.nodes[left].parent = id;
  tree.nodes[right].parent = id;
  return id;
}

void collect_leaves(const AggTree& tree, int node, std::vector<int>& out) {
  if (tree.is_leaf(node)) {
    out.push_back(node);
    return;
  }
  collect_leaves(tree, tree.nodes[node].left, out);
  collect_leaves(tree, tree.nodes[node].right, out);
}

// Receiver of party l's own leaf message, or -1 when l hosts its parent.
int leaf_receiver(const AggTree& tree, int party) {
  const int parent = tree.nodes[party].parent;
  if (parent < 0) return -1;
  const int host = tree.nodes[parent].host;
  return host == party ? -1 : host;
}

Dd eval_tree(const AggTree& tree, int node, MessagePhase phase,
             const std::vector<Dd>& leaf_values, AggregationTranscript& transcript) {
  if (tree.is_leaf(node)) return leaf_values[node];
  const auto& n = tree.nodes[node];
  const Dd left = eval_tree(tree, n.left, phase, leaf_values, transcript);
  const Dd right = eval_tree(tree, n.right, phase, leaf_values, transcript);
  for (const auto& [child, value] : {std::pair{n.left, left}, std::pair{n.right, right}}) {
    if (tree.nodes[child].host != n.host) {
      AggMessage msg;
      msg.sender = tree.nodes[child].host;
      msg.receiver = n.host;
      msg.payload = value.hi;
      msg.residual = value.lo;
      msg.phase = phase;
      msg.leaf_set = tree.leaf_set(child);
      transcript.messages.push_back(std::move(msg));
    }
  }
  return dd_add(left, right);
}

using PartySet = std::uint64_t;

PartySet to_mask(const std::vector<int>& parties) {
  PartySet s = 0;
  for (int p : parties) s |= (PartySet{1} << p);
  return s;
}

// Close a family of known subset sums under disjoint union and nested
// difference; these are the linear combinations a curious party can form.
std::set<PartySet> close_knowledge(std::set<PartySet> known) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<PartySet> items(known.begin(), known.end());
    for (std::size_t a = 0; a < items.size(); ++a) {
      for (std::size_t b = 0; b < items.size(); ++b) {
        if (a == b) continue;
        PartySet u = 0;
        if ((items[a] & items[b]) == 0) {
          u = items[a] | items[b];
        } else if ((items[b] & items[a]) == items[b]) {
          u = items[a] & ~items[b];
        } else {
          continue;
        }
        if (u != 0 && known.insert(u).second) changed = true;
      }
    }
  }
  return known;
}

std::string set_to_string(PartySet s) {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (int p = 0; p < 64; ++p) {
    if (s & (PartySet{1} << p)) {
      if (!first) os << ',';
      os << p;
      first = false;
    }
  }
  os << '}';
  return os.str();
}

}  // namespace

std::vector<int> AggTree::leaf_set(int node) const {
  std::vector<int> out;
  collect_leaves(*this, node, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> AggTree::proper_leaf_sets() const {
  std::vector<std::vector<int>> out;
  for (int id = q; id < static_cast<int>(nodes.size()); ++id) {
    auto leaves = leaf_set(id);
    if (leaves.size() >= 2 && static_cast<int>(leaves.size()) < q) out.push_back(std::move(leaves));
  }
  return out;
}

AggTree balanced_binary_tree(const std::vector<int>& leaf_order) {
  const int q = static_cast<int>(leaf_order.size());
  if (q < 1) throw InvalidInputError("leaf order must be nonempty");
  std::vector<int> sorted = leaf_order;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < q; ++i) {
    if (sorted[i] != i) throw InvalidInputError("leaf order must be a permutation of 0..q-1");
  }
  AggTree tree;
  tree.q = q;
  tree.nodes.resize(q);
  for (int p = 0; p < q; ++p) tree.nodes[p].host = p;
  tree.root = build_balanced(tree, leaf_order, 0, q);
  return tree;
}

bool significantly_different(const AggTree& t1, const AggTree& t2) {
  if (t1.q != t2.q) throw InvalidInputError("trees span different party sets");
  const auto sets1 = t1.proper_leaf_sets();
  const auto sets2 = t2.proper_leaf_sets();
  if (sets1.empty() && sets2.empty()) return false;  // q <= 2: no protection possible
  for (const auto& a : sets1) {
    for (const auto& b : sets2) {
      if (a == b) return false;
    }
  }
  return true;
}

namespace {

bool leaf_receivers_disjoint(const AggTree& t1, const AggTree& t2) {
  for (int p = 0; p < t1.q; ++p) {
    const int r1 = leaf_receiver(t1, p);
    const int r2 = leaf_receiver(t2, p);
    if (r1 >= 0 && r1 == r2) return false;
  }
  return true;
}

bool trees_structurally_equal(const AggTree& a, const AggTree& b) {
  auto sig = [](const AggTree& t) {
    std::vector<std::vector<int>> sets;
    for (int id = t.q; id < static_cast<int>(t.nodes.size()); ++id)
      sets.push_back(t.leaf_set(id));
    std::sort(sets.begin(), sets.end());
    std::vector<int> hosts;
    for (const auto& n : t.nodes) hosts.push_back(n.host);
    return std::pair{sets, hosts};
  };
  return sig(a) == sig(b);
}

}  // namespace

TreePair build_tree_pair(int q, std::uint64_t seed) {
  if (q < 2) throw InvalidPartyCountError("need at least 2 parties");

  auto eng = make_engine(seed, /*tag=*/0x74726565ULL);
  std::vector<int> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), eng);

  TreePair pair;
  pair.t1 = balanced_binary_tree(order);
  pair.degraded = q < 4;

  std::vector<double> probe(q);
  for (int p = 0; p < q; ++p) probe[p] = 0.25 + p;

  for (int attempt = 0; attempt < 500; ++attempt) {
    std::shuffle(order.begin(), order.end(), eng);
    AggTree candidate = balanced_binary_tree(order);
    if (trees_structurally_equal(pair.t1, candidate)) continue;
    if (!leaf_receivers_disjoint(pair.t1, candidate)) continue;
    if (q >= 3 && !significantly_different(pair.t1, candidate)) continue;
    pair.t2 = std::move(candidate);
    // run one honest aggregation and require a clean audit, which also rules
    // out union/difference reconstructions the pairwise leaf-set check misses
    TreePair trial{pair.t1, pair.t2, pair.degraded};
    auto [sum, transcript] = masked_aggregate(probe, derive_seed(seed, attempt + 1), trial);
    (void)sum;
    if (!audit_transcript(transcript, probe).pass()) continue;
    return pair;
  }
  throw StateError("could not construct a usable aggregation tree pair");
}

std::pair<double, AggregationTranscript> masked_aggregate(std::span<const double> partials,
                                                          std::uint64_t seed,
                                                          const TreePair& trees,
                                                          const MaskedAggregateOptions& opts) {
  const int q = static_cast<int>(partials.size());
  if (q != trees.t1.q || q != trees.t2.q)
    throw InvalidInputError("partial count does not match tree party count");
  for (double p : partials) {
    if (!std::isfinite(p)) throw NumericalError("non-finite partial");
  }

  AggregationTranscript transcript;
  transcript.leaf_masked.resize(q);
  transcript.leaf_mask.resize(q);

  std::vector<Dd> masked_leaves(q), mask_leaves(q);
  for (int p = 0; p < q; ++p) {
    double delta = 0.0;
    if (!opts.unmask_debug) {
      // each party draws from its own stream derived from the call seed
      std::uint64_t state = derive_seed(seed, 0x6d61736b0000ULL + static_cast<std::uint64_t>(p));
      const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;  // [0,1)
      delta = (2.0 * u - 1.0) * opts.mask_scale * (1.0 + std::abs(partials[p]));
    }
    masked_leaves[p] = two_sum(partials[p], delta);
    mask_leaves[p] = Dd{delta, 0.0};
    transcript.leaf_masked[p] = masked_leaves[p].hi;
    transcript.leaf_mask[p] = delta;
  }

  const Dd xi1 = eval_tree(trees.t1, trees.t1.root, MessagePhase::Masked, masked_leaves, transcript);
  const Dd xi2 = eval_tree(trees.t2, trees.t2.root, MessagePhase::MaskOnly, mask_leaves, transcript);

  // the mask total travels to the masked-sum aggregator when the roots differ
  const int root1 = trees.t1.nodes[trees.t1.root].host;
  const int root2 = trees.t2.nodes[trees.t2.root].host;
  if (root1 != root2) {
    AggMessage msg;
    msg.sender = root2;
    msg.receiver = root1;
    msg.payload = xi2.hi;
    msg.residual = xi2.lo;
    msg.phase = MessagePhase::MaskOnly;
    msg.leaf_set = trees.t2.leaf_set(trees.t2.root);
    transcript.messages.push_back(std::move(msg));
  }

  const Dd result = dd_sub(xi1, xi2);
  transcript.result = result.hi + result.lo;
  return {transcript.result, transcript};
}

AuditReport audit_transcript(const AggregationTranscript& transcript,
                             std::span<const double> partials,
                             const std::vector<std::pair<int, int>>& collusion_pairs) {
  constexpr double kTol = 1e-12;
  const int q = static_cast<int>(partials.size());
  if (static_cast<int>(transcript.leaf_masked.size()) != q)
    throw InvalidInputError("transcript party count does not match partials");

  AuditReport report;
  const PartySet full = q >= 64 ? ~PartySet{0} : ((PartySet{1} << q) - 1);

  // one violation per exposed party (or exposed set), whatever the number of
  // distinct reconstructions behind it
  std::set<int> exposed_seen;
  std::set<PartySet> exposed_sets_seen;
  auto add_party_violation = [&](AuditViolation v) {
    if (!exposed_seen.insert(v.exposed_party).second) return;
    report.violations.push_back(std::move(v));
  };

  // 1. contributions that entered the masked tree effectively unmasked
  for (int p = 0; p < q; ++p) {
    if (std::abs(transcript.leaf_masked[p] - partials[p]) <= kTol) {
      AuditViolation v;
      v.description = "party " + std::to_string(p) + " contribution entered T1 unmasked";
      v.parties = {p};
      v.exposed_party = p;
      add_party_violation(std::move(v));
    }
  }

  // 2. a transmitted payload equals some bare partial
  for (const auto& msg : transcript.messages) {
    for (int p = 0; p < q; ++p) {
      if (std::abs(msg.payload - partials[p]) <= kTol) {
        AuditViolation v;
        v.description = "payload " + std::to_string(msg.sender) + "->" +
                        std::to_string(msg.receiver) + " matches bare partial of party " +
                        std::to_string(p);
        v.parties = {msg.receiver};
        v.exposed_party = p;
        add_party_violation(std::move(v));
      }
    }
  }

  // 3. subtree sums whose masks a receiver set can strip: a leaf set known in
  // both phases yields the bare sum of partials over it
  auto received = [&](const std::vector<int>& parties, MessagePhase phase) {
    std::set<PartySet> known;
    for (int member : parties) known.insert(PartySet{1} << member);  // own contribution
    for (const auto& msg : transcript.messages) {
      if (msg.phase != phase) continue;
      if (std::find(parties.begin(), parties.end(), msg.receiver) != parties.end())
        known.insert(to_mask(msg.leaf_set));
    }
    return close_knowledge(std::move(known));
  };

  std::vector<std::vector<int>> receiver_groups;
  for (int p = 0; p < q; ++p) receiver_groups.push_back({p});
  for (const auto& [a, b] : collusion_pairs) {
    if (a < 0 || a >= q || b < 0 || b >= q) throw InvalidInputError("collusion party out of range");
    receiver_groups.push_back({a, b});
  }

  for (const auto& group : receiver_groups) {
    PartySet own = 0;
    for (int member : group) own |= PartySet{1} << member;
    const auto k1 = received(group, MessagePhase::Masked);
    const auto k2 = received(group, MessagePhase::MaskOnly);
    for (PartySet s : k1) {
      if (s == full) continue;  // the aggregate output itself is the protocol's result
      // the complement of a group's own terms follows from the output and is
      // not a transcript leak
      if ((s | own) == full) continue;
      if (!k2.count(s)) continue;
      const PartySet exposed = s & ~own;
      if (exposed == 0) continue;
      AuditViolation v;
      v.parties = group;
      const bool single = (exposed & (exposed - 1)) == 0;
      if (single) {
        int p = 0;
        while (!(exposed & (PartySet{1} << p))) ++p;
        v.exposed_party = p;
        v.description = "receiver(s) " + set_to_string(own) +
                        " can reconstruct bare partial of party " + std::to_string(p);
        add_party_violation(std::move(v));
      } else {
        if (!exposed_sets_seen.insert(exposed).second) continue;
        v.description = "receiver(s) " + set_to_string(own) +
                        " can reconstruct sum of partials over " + set_to_string(exposed);
        report.violations.push_back(std::move(v));
      }
    }
  }
  return report;
}

std::string AuditReport::to_text() const {
  std::ostringstream os;
  if (violations.empty()) {
    os << "0 violations\n";
    return os.str();
  }
  os << violations.size() << " violation(s)\n";
  for (const auto& v : violations) os << "VIOLATION " << v.description << '\n';
  return os.str();
}

}  // namespace vflsim
