#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vflsim/runtime.hpp"

namespace vflsim {

enum class ExitCode : int { Ok = 0, Usage = 1, DataError = 2, NonConvergence = 3 };

// One experiment per flat key=value file; CLI flags override file keys.
struct ExperimentConfig {
  // data source
  std::string dataset;               // file path, or "synthetic"
  std::string format = "synthetic";  // libsvm | csv | synthetic
  int csv_label_column = 0;
  int libsvm_dim = 0;  // pad the parsed dimensionality up to this value
  int synth_n = 500;
  int synth_d = 20;
  double synth_flip = 0.05;
  double synth_noise = 0.1;
  bool synth_regression = false;
  double test_fraction = 0.2;
  bool normalize_labels = false;
  bool normalize_features = false;

  SimConfig sim;

  std::optional<double> suboptimality_stop;  // relative to a reference solve
  std::string out_path;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_stream(std::istream& in, const std::string& name = "<config>");
  void apply_override(const std::string& key, const std::string& value);
};

struct LoadedData {
  PartitionedDataset train;
  PartitionedDataset test;
  bool has_test = false;
};

LoadedData load_experiment_data(const ExperimentConfig& cfg);

void write_trace_csv(std::ostream& out, const TrainingTrace& trace);
std::vector<TraceRow> read_trace_csv(std::istream& in);

ExitCode cmd_run(const ExperimentConfig& cfg, std::ostream& log);

struct CompareOptions {
  double lossless_tolerance = -1.0;  // <0: pick the mode-appropriate default
};
ExitCode cmd_compare(const ExperimentConfig& federated, const ExperimentConfig& centralized,
                     const ExperimentConfig& frozen, const CompareOptions& opts, std::ostream& log);

ExitCode cmd_speedup(const ExperimentConfig& cfg, const std::vector<int>& q_list,
                     std::ostream& log);

ExitCode cmd_audit(const ExperimentConfig& cfg, int n_aggregations, bool simulate_collusion,
                   bool unmask_debug, std::ostream& log);

ExitCode cmd_partition(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace vflsim
