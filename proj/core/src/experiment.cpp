#include "vflsim/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vflsim/objectives.hpp"
#include "vflsim/reference.hpp"
#include "vflsim/synthetic.hpp"

namespace vflsim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

double parse_double_cfg(const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("trailing characters in number '" + v + "'");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
}

long parse_long_cfg(const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw ConfigError("trailing characters in integer '" + v + "'");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + v + "'");
  }
}

}  // namespace

void ExperimentConfig::apply_override(const std::string& key, const std::string& value) {
  if (key == "dataset") dataset = value;
  else if (key == "format") format = value;
  else if (key == "csv_label_column") csv_label_column = static_cast<int>(parse_long_cfg(value));
  else if (key == "libsvm_dim") libsvm_dim = static_cast<int>(parse_long_cfg(value));
  else if (key == "synth_n") synth_n = static_cast<int>(parse_long_cfg(value));
  else if (key == "synth_d") synth_d = static_cast<int>(parse_long_cfg(value));
  else if (key == "synth_flip") synth_flip = parse_double_cfg(value);
  else if (key == "synth_noise") synth_noise = parse_double_cfg(value);
  else if (key == "synth_regression") synth_regression = parse_bool(value);
  else if (key == "test_fraction") test_fraction = parse_double_cfg(value);
  else if (key == "normalize_labels") normalize_labels = parse_bool(value);
  else if (key == "normalize_features") normalize_features = parse_bool(value);
  else if (key == "loss") sim.hp.loss = loss_from_string(value);
  else if (key == "regularizer") sim.hp.regularizer = regularizer_from_string(value);
  else if (key == "lambda") sim.hp.lambda = parse_double_cfg(value);
  else if (key == "gamma") sim.hp.gamma = parse_double_cfg(value);
  else if (key == "algorithm") sim.hp.algorithm = algorithm_from_string(value);
  else if (key == "epochs") sim.hp.epochs = static_cast<int>(parse_long_cfg(value));
  else if (key == "tau1") sim.hp.tau1 = static_cast<int>(parse_long_cfg(value));
  else if (key == "tau2") sim.hp.tau2 = static_cast<int>(parse_long_cfg(value));
  else if (key == "seed") sim.hp.seed = static_cast<std::uint64_t>(parse_long_cfg(value));
  else if (key == "q") sim.q = static_cast<int>(parse_long_cfg(value));
  else if (key == "m") sim.m = static_cast<int>(parse_long_cfg(value));
  else if (key == "k") sim.k = static_cast<int>(parse_long_cfg(value));
  else if (key == "mode") sim.mode = run_mode_from_string(value);
  else if (key == "deterministic") sim.deterministic = parse_bool(value);
  else if (key == "aggregation") sim.aggregation = aggregation_from_string(value);
  else if (key == "mask_scale") sim.mask_scale = parse_double_cfg(value);
  else if (key == "straggler_party") sim.straggler.party_id = static_cast<int>(parse_long_cfg(value));
  else if (key == "straggler_factor") sim.straggler.factor = parse_double_cfg(value);
  else if (key == "queue_capacity") sim.theta_queue_capacity = static_cast<int>(parse_long_cfg(value));
  else if (key == "work_per_feature_us") sim.work_per_feature_us = parse_double_cfg(value);
  else if (key == "objective_stop") sim.objective_stop = parse_double_cfg(value);
  else if (key == "suboptimality_stop") suboptimality_stop = parse_double_cfg(value);
  else if (key == "out") out_path = value;
  else throw ConfigError("unknown config key: " + key);
}

ExperimentConfig ExperimentConfig::from_stream(std::istream& in, const std::string& name) {
  ExperimentConfig cfg;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      cfg.apply_override(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return from_stream(in, path);
}

namespace {

struct RawSplit {
  RawDataset train;
  RawDataset test;
  bool has_test = false;
};

RawSplit load_raw(const ExperimentConfig& cfg) {
  RawDataset raw;
  if (cfg.format == "synthetic") {
    SyntheticSpec spec;
    spec.n = cfg.synth_n;
    spec.d = cfg.synth_d;
    spec.seed = cfg.sim.hp.seed;
    spec.classification = !cfg.synth_regression && cfg.sim.hp.loss == LossKind::Logistic;
    spec.label_flip = cfg.synth_flip;
    spec.noise = cfg.synth_noise;
    raw = make_synthetic(spec);
  } else if (cfg.format == "libsvm") {
    raw = parse_libsvm(cfg.dataset);
    if (cfg.libsvm_dim > raw.d) raw.d = cfg.libsvm_dim;
  } else if (cfg.format == "csv") {
    raw = parse_csv(cfg.dataset, cfg.csv_label_column);
  } else {
    throw ConfigError("unknown dataset format: " + cfg.format);
  }
  if (cfg.normalize_features) minmax_normalize_features(raw);
  if (cfg.normalize_labels) minmax_normalize_labels(raw);

  RawSplit out;
  if (cfg.test_fraction > 0.0 && raw.n >= 2) {
    auto [train, test] = train_test_split(raw, cfg.test_fraction, cfg.sim.hp.seed);
    out.train = std::move(train);
    out.test = std::move(test);
    out.has_test = true;
  } else {
    out.train = std::move(raw);
  }
  return out;
}

ExitCode map_exception(std::ostream& log, const std::function<ExitCode()>& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    log << "data error: " << e.what() << '\n';
    return ExitCode::DataError;
  } catch (const EmptyDataError& e) {
    log << "data error: " << e.what() << '\n';
    return ExitCode::DataError;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return ExitCode::Usage;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return ExitCode::Usage;
  }
}

void write_csv_to(const std::string& path, const TrainingTrace& trace, std::ostream& log) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) {
    log << "cannot write " << path << '\n';
    return;
  }
  write_trace_csv(out, trace);
}

double resolve_objective_stop(const ExperimentConfig& cfg, const PartitionedDataset& train,
                              std::ostream& log, SimConfig& sim) {
  if (!cfg.suboptimality_stop) return 0.0;
  const auto ref = solve_reference(train, sim.hp);
  sim.objective_stop = ref.objective + *cfg.suboptimality_stop;
  log << "reference objective " << std::setprecision(12) << ref.objective << " (grad norm "
      << ref.grad_norm << ")\n";
  return ref.objective;
}

}  // namespace

LoadedData load_experiment_data(const ExperimentConfig& cfg) {
  auto raw = load_raw(cfg);
  const auto part = make_partition(raw.train.d, cfg.sim.q, cfg.sim.hp.seed);
  LoadedData out;
  out.train = PartitionedDataset::vertical_split(raw.train, part);
  if (raw.has_test) {
    out.test = PartitionedDataset::vertical_split(raw.test, part);
    out.has_test = true;
  }
  std::vector<int> active(cfg.sim.m);
  for (int a = 0; a < cfg.sim.m; ++a) active[a] = a;
  out.train.grant_label_access(active);
  if (out.has_test) out.test.grant_label_access(active);
  return out;
}

void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
  out << "epoch,wall_ms,objective,test_metric,max_staleness\n";
  out << std::setprecision(17);
  for (const auto& row : trace.rows) {
    out << row.epoch << ',' << row.wall_ms << ',' << row.objective << ',' << row.test_metric
        << ',' << row.max_staleness << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::vector<TraceRow> rows;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trace CSV", 0);
  if (trim(line) != "epoch,wall_ms,objective,test_metric,max_staleness")
    throw ParseError("unexpected trace CSV header", 1);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    TraceRow row;
    double* fields[4] = {&row.epoch, &row.wall_ms, &row.objective, &row.test_metric};
    for (int f = 0; f < 4; ++f) {
      if (!std::getline(ls, cell, ',')) throw ParseError("missing trace CSV field", lineno);
      *fields[f] = parse_double_cfg(cell);
    }
    if (!std::getline(ls, cell, ',')) throw ParseError("missing staleness field", lineno);
    row.max_staleness = parse_long_cfg(cell);
    rows.push_back(row);
  }
  return rows;
}

ExitCode cmd_run(const ExperimentConfig& cfg, std::ostream& log) {
  return map_exception(log, [&]() -> ExitCode {
    auto data = load_experiment_data(cfg);
    SimConfig sim = cfg.sim;
    resolve_objective_stop(cfg, data.train, log, sim);

    TrainingTrace trace;
    try {
      trace = run(sim, data.train, data.has_test ? &data.test : nullptr);
    } catch (const NonConvergenceError& e) {
      write_csv_to(cfg.out_path, e.partial_trace(), log);
      log << "non-convergence: " << e.what() << '\n';
      return ExitCode::NonConvergence;
    }
    write_csv_to(cfg.out_path, trace, log);
    const auto& last = trace.rows.back();
    log << "done mode=" << to_string(sim.mode) << " algorithm=" << to_string(sim.hp.algorithm)
        << " epochs=" << last.epoch << " objective=" << std::setprecision(12) << last.objective
        << " test_metric=" << last.test_metric << " wall_ms=" << last.wall_ms << '\n';
    return ExitCode::Ok;
  });
}

ExitCode cmd_compare(const ExperimentConfig& federated, const ExperimentConfig& centralized,
                     const ExperimentConfig& frozen, const CompareOptions& opts,
                     std::ostream& log) {
  return map_exception(log, [&]() -> ExitCode {
    auto same_data = [&](const ExperimentConfig& a, const ExperimentConfig& b) {
      return a.dataset == b.dataset && a.format == b.format && a.sim.hp.seed == b.sim.hp.seed &&
             a.sim.hp.loss == b.sim.hp.loss && a.synth_n == b.synth_n && a.synth_d == b.synth_d;
    };
    if (!same_data(federated, centralized) || !same_data(federated, frozen))
      throw ConfigError("compare requires configs sharing dataset, loss and seed");
    if (centralized.sim.mode != RunMode::Centralized)
      throw ConfigError("second config must use centralized mode");
    if (frozen.sim.mode != RunMode::FrozenPassive)
      throw ConfigError("third config must use frozen_passive mode");

    auto final_metrics = [&](const ExperimentConfig& c) {
      auto data = load_experiment_data(c);
      const auto trace = run(c.sim, data.train, data.has_test ? &data.test : nullptr);
      return std::pair{trace.rows.back().objective, trace.rows.back().test_metric};
    };

    const auto [fed_obj, fed_metric] = final_metrics(federated);
    const auto [cen_obj, cen_metric] = final_metrics(centralized);
    const auto [fro_obj, fro_metric] = final_metrics(frozen);

    double tol = opts.lossless_tolerance;
    if (tol < 0.0) tol = federated.sim.deterministic ? 1e-6 : 5e-3;

    const double delta_fc = std::abs(fed_metric - cen_metric);
    const bool higher_is_better = federated.sim.hp.loss == LossKind::Logistic;
    const bool frozen_worse =
        higher_is_better ? fro_metric < fed_metric : fro_metric > fed_metric;

    log << std::setprecision(12);
    log << "federated:   objective=" << fed_obj << " test_metric=" << fed_metric << '\n';
    log << "centralized: objective=" << cen_obj << " test_metric=" << cen_metric << '\n';
    log << "frozen:      objective=" << fro_obj << " test_metric=" << fro_metric << '\n';
    log << "delta(federated, centralized) = " << delta_fc << " (tolerance " << tol << ")\n";
    if (delta_fc <= tol) log << "LOSSLESS\n";
    if (frozen_worse) log << "ABLATION-GAP\n";
    return ExitCode::Ok;
  });
}

ExitCode cmd_speedup(const ExperimentConfig& cfg, const std::vector<int>& q_list,
                     std::ostream& log) {
  return map_exception(log, [&]() -> ExitCode {
    auto raw = load_raw(cfg);
    SimConfig sim = cfg.sim;
    if (cfg.suboptimality_stop) {
      const auto part = make_partition(raw.train.d, sim.q, sim.hp.seed);
      const auto train = PartitionedDataset::vertical_split(raw.train, part);
      resolve_objective_stop(cfg, train, log, sim);
    }
    const auto rows =
        run_speedup_suite(sim, raw.train, raw.has_test ? &raw.test : nullptr, q_list);

    std::ostringstream csv;
    csv << "q,wall_ms,speedup\n" << std::setprecision(17);
    for (const auto& row : rows) {
      csv << row.q << ',';
      if (row.speedup) {
        csv << row.wall_ms << ',' << *row.speedup;
      } else {
        csv << ',';
      }
      csv << '\n';
    }
    if (!cfg.out_path.empty()) {
      std::ofstream out(cfg.out_path);
      if (!out) throw ConfigError("cannot write " + cfg.out_path);
      out << csv.str();
    }
    log << csv.str();
    return ExitCode::Ok;
  });
}

ExitCode cmd_audit(const ExperimentConfig& cfg, int n_aggregations, bool simulate_collusion,
                   bool unmask_debug, std::ostream& log) {
  return map_exception(log, [&]() -> ExitCode {
    auto data = load_experiment_data(cfg);
    const auto summary =
        run_audit(cfg.sim, data.train, n_aggregations, simulate_collusion, unmask_debug);
    log << "audited " << summary.aggregations << " aggregations\n";
    log << summary.violations << " violations\n";
    for (const auto& report : summary.reports) log << report;
    return ExitCode::Ok;
  });
}

ExitCode cmd_partition(const ExperimentConfig& cfg, std::ostream& log) {
  return map_exception(log, [&]() -> ExitCode {
    auto raw = load_raw(cfg);
    const auto part = make_partition(raw.train.d, cfg.sim.q, cfg.sim.hp.seed);
    log << "d=" << part.d << " q=" << part.q << '\n';
    for (int l = 0; l < part.q; ++l) {
      log << "party " << l << " (" << part.blocks[l].size() << " features):";
      for (int f : part.blocks[l]) log << ' ' << f;
      log << '\n';
    }
    return ExitCode::Ok;
  });
}

}  // namespace vflsim
