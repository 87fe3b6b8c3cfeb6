#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vflsim/dataset.hpp"

namespace vflsim {

// Dense gaussian features, labels from a ground-truth linear model.
// Classification: y = sign(w' x + noise), then a seeded fraction of labels is
// flipped. Regression: y = w' x + noise.
struct SyntheticSpec {
  int n = 500;
  int d = 20;
  std::uint64_t seed = 0;
  bool classification = true;
  double label_flip = 0.05;       // classification only
  double noise = 0.1;             // gaussian noise on the linear score
  double feature_scale = -1.0;    // <=0 means 1/sqrt(d)
  std::optional<std::vector<double>> w_true;  // default: seeded unit-ish weights
};

RawDataset make_synthetic(const SyntheticSpec& spec);

// Ground-truth weights with prescribed energy on a set of coordinates:
// `share` of the squared norm lands on `emphasized`, the rest is spread
// uniformly over the remaining coordinates.
std::vector<double> weights_with_energy_share(int d, const std::vector<int>& emphasized,
                                              double share, std::uint64_t seed);

}  // namespace vflsim
