#include "vflsim/types.hpp"

#include <algorithm>
#include <cctype>

namespace vflsim {

namespace {
std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}
}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Sgd: return "sgd";
    case Algorithm::Svrg: return "svrg";
    case Algorithm::Saga: return "saga";
  }
  return "?";
}

std::string to_string(LossKind l) {
  switch (l) {
    case LossKind::Logistic: return "logistic";
    case LossKind::Square: return "square";
    case LossKind::RobustLinear: return "robust_linear";
  }
  return "?";
}

std::string to_string(RegularizerKind r) {
  switch (r) {
    case RegularizerKind::L2: return "l2";
    case RegularizerKind::NonconvexRational: return "nonconvex_rational";
    case RegularizerKind::None: return "none";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  const std::string v = lower(s);
  if (v == "sgd") return Algorithm::Sgd;
  if (v == "svrg") return Algorithm::Svrg;
  if (v == "saga") return Algorithm::Saga;
  throw ConfigError("unknown algorithm: " + s);
}

LossKind loss_from_string(const std::string& s) {
  const std::string v = lower(s);
  if (v == "logistic") return LossKind::Logistic;
  if (v == "square") return LossKind::Square;
  if (v == "robust_linear" || v == "robust") return LossKind::RobustLinear;
  throw ConfigError("unknown loss: " + s);
}

RegularizerKind regularizer_from_string(const std::string& s) {
  const std::string v = lower(s);
  if (v == "l2") return RegularizerKind::L2;
  if (v == "nonconvex_rational" || v == "nonconvex") return RegularizerKind::NonconvexRational;
  if (v == "none") return RegularizerKind::None;
  throw ConfigError("unknown regularizer: " + s);
}

}  // namespace vflsim
