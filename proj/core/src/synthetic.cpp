#include "vflsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vflsim/errors.hpp"
#include "vflsim/rng.hpp"

namespace vflsim {

RawDataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw InvalidInputError("synthetic dataset needs n,d >= 1");

  auto eng = make_engine(spec.seed, /*tag=*/0x73796e7468ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double scale =
      spec.feature_scale > 0.0 ? spec.feature_scale : 1.0 / std::sqrt(static_cast<double>(spec.d));

  std::vector<double> w_true;
  if (spec.w_true) {
    if (static_cast<int>(spec.w_true->size()) != spec.d)
      throw DimensionError("w_true length does not match d");
    w_true = *spec.w_true;
  } else {
    w_true.resize(spec.d);
    for (double& v : w_true) v = gauss(eng);
  }

  RawDataset data;
  data.n = spec.n;
  data.d = spec.d;
  data.rows.resize(spec.n);
  data.labels.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    SparseRow& row = data.rows[i];
    row.idx.resize(spec.d);
    row.val.resize(spec.d);
    double score = 0.0;
    for (int f = 0; f < spec.d; ++f) {
      const double x = gauss(eng) * scale;
      row.idx[f] = f;
      row.val[f] = x;
      score += x * w_true[f];
    }
    score += spec.noise * gauss(eng);
    if (spec.classification) {
      double y = score >= 0.0 ? 1.0 : -1.0;
      if (spec.label_flip > 0.0 && unif(eng) < spec.label_flip) y = -y;
      data.labels[i] = y;
    } else {
      data.labels[i] = score;
    }
  }
  return data;
}

std::vector<double> weights_with_energy_share(int d, const std::vector<int>& emphasized,
                                              double share, std::uint64_t seed) {
  if (d < 1) throw InvalidInputError("d must be >= 1");
  if (!(share >= 0.0 && share <= 1.0)) throw InvalidInputError("share must be in [0,1]");
  std::vector<bool> mark(d, false);
  for (int f : emphasized) {
    if (f < 0 || f >= d) throw IndexError("emphasized coordinate out of range");
    mark[f] = true;
  }
  const int n_emph = static_cast<int>(emphasized.size());
  const int n_rest = d - n_emph;

  auto eng = make_engine(seed, /*tag=*/0x656e65726779ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> w(d);
  double e_emph = 0.0, e_rest = 0.0;
  for (int f = 0; f < d; ++f) {
    w[f] = gauss(eng);
    (mark[f] ? e_emph : e_rest) += w[f] * w[f];
  }
  // rescale the two groups so energies are exactly (share, 1-share)
  const double a = (n_emph > 0 && e_emph > 0.0) ? std::sqrt(share / e_emph) : 0.0;
  const double b = (n_rest > 0 && e_rest > 0.0) ? std::sqrt((1.0 - share) / e_rest) : 0.0;
  for (int f = 0; f < d; ++f) w[f] *= mark[f] ? a : b;
  return w;
}

}  // namespace vflsim
