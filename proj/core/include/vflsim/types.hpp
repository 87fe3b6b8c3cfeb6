#pragma once

#include <cstdint>
#include <string>

#include "vflsim/errors.hpp"

namespace vflsim {

enum class Algorithm { Sgd, Svrg, Saga };
enum class LossKind { Logistic, Square, RobustLinear };
enum class RegularizerKind { L2, NonconvexRational, None };

struct PartyRole {
  enum class Kind { Active, Passive };
  Kind kind = Kind::Passive;
  int party_id = -1;

  bool active() const { return kind == Kind::Active; }
  static PartyRole active_party(int id) { return {Kind::Active, id}; }
  static PartyRole passive_party(int id) { return {Kind::Passive, id}; }
};

struct HyperParams {
  double gamma = 0.1;
  double lambda = 1e-4;
  Algorithm algorithm = Algorithm::Svrg;
  LossKind loss = LossKind::Logistic;
  RegularizerKind regularizer = RegularizerKind::L2;
  int epochs = 10;
  int tau1 = 0;
  int tau2 = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (tau1 < 0 || tau2 < 0) throw ConfigError("staleness bounds must be >= 0");
  }
};

std::string to_string(Algorithm a);
std::string to_string(LossKind l);
std::string to_string(RegularizerKind r);
Algorithm algorithm_from_string(const std::string& s);
LossKind loss_from_string(const std::string& s);
RegularizerKind regularizer_from_string(const std::string& s);

}  // namespace vflsim
