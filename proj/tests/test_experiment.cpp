#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vflsim/experiment.hpp"

using namespace vflsim;

namespace {

std::string scratch_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ExperimentConfig tiny_synth_config() {
  std::istringstream in(
      "format = synthetic\n"
      "synth_n = 60\n"
      "synth_d = 8\n"
      "loss = logistic\n"
      "regularizer = l2\n"
      "lambda = 0.01\n"
      "gamma = 0.3\n"
      "algorithm = svrg\n"
      "epochs = 3\n"
      "q = 2\n"
      "m = 1\n"
      "mode = async\n"
      "deterministic = true\n"
      "seed = 5\n");
  return ExperimentConfig::from_stream(in);
}

}  // namespace

TEST_CASE("config files parse and overrides apply") {
  auto cfg = tiny_synth_config();
  CHECK(cfg.sim.q == 2);
  CHECK(cfg.sim.hp.epochs == 3);
  CHECK(cfg.sim.hp.algorithm == Algorithm::Svrg);

  cfg.apply_override("epochs", "7");
  CHECK(cfg.sim.hp.epochs == 7);
  CHECK_THROWS_AS(cfg.apply_override("not_a_key", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("gamma", "banana"), ConfigError);

  std::istringstream bad("epochs 3\n");
  CHECK_THROWS_AS(ExperimentConfig::from_stream(bad), ConfigError);
}

TEST_CASE("trace CSV round trip") {
  TrainingTrace trace;
  trace.rows = {{0, 0.0, 0.9, 0.5, 0}, {1, 12.5, 0.51234567890123, 0.875, 2}};
  std::ostringstream out;
  write_trace_csv(out, trace);

  std::istringstream in(out.str());
  const auto rows = read_trace_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].epoch == 1.0);
  CHECK(rows[1].wall_ms == 12.5);
  CHECK(rows[1].objective == trace.rows[1].objective);
  CHECK(rows[1].test_metric == 0.875);
  CHECK(rows[1].max_staleness == 2);

  std::istringstream bad_header("nope\n1,2,3,4,5\n");
  CHECK_THROWS_AS(read_trace_csv(bad_header), ParseError);
}

TEST_CASE("cmd_run emits a CSV with one row per epoch plus the baseline") {
  auto cfg = tiny_synth_config();
  cfg.sim.hp.epochs = 2;
  cfg.out_path = scratch_path("vflsim_run_trace.csv");
  std::ostringstream log;
  const auto code = cmd_run(cfg, log);
  CHECK(code == ExitCode::Ok);

  std::ifstream in(cfg.out_path);
  REQUIRE(in.good());
  const auto rows = read_trace_csv(in);
  CHECK(rows.size() == 3);  // epoch 0 baseline + 2 epochs
  std::remove(cfg.out_path.c_str());
}

TEST_CASE("deterministic cmd_run is replay-identical") {
  auto cfg = tiny_synth_config();
  cfg.out_path = scratch_path("vflsim_replay_a.csv");
  std::ostringstream log_a, log_b;
  REQUIRE(cmd_run(cfg, log_a) == ExitCode::Ok);
  std::ifstream a(cfg.out_path);
  std::stringstream csv_a;
  csv_a << a.rdbuf();

  cfg.out_path = scratch_path("vflsim_replay_b.csv");
  REQUIRE(cmd_run(cfg, log_b) == ExitCode::Ok);
  std::ifstream b(cfg.out_path);
  std::stringstream csv_b;
  csv_b << b.rdbuf();

  CHECK(csv_a.str() == csv_b.str());
  std::remove(scratch_path("vflsim_replay_a.csv").c_str());
  std::remove(scratch_path("vflsim_replay_b.csv").c_str());
}

TEST_CASE("svrg objective decreases monotonically after the first epoch") {
  auto cfg = tiny_synth_config();
  cfg.sim.hp.epochs = 8;
  cfg.out_path = scratch_path("vflsim_svrg_curve.csv");
  std::ostringstream log;
  REQUIRE(cmd_run(cfg, log) == ExitCode::Ok);
  std::ifstream in(cfg.out_path);
  const auto rows = read_trace_csv(in);
  REQUIRE(rows.size() == 9);
  for (std::size_t r = 2; r < rows.size(); ++r) {
    CHECK(rows[r].objective < rows[r - 1].objective);
  }
  std::remove(cfg.out_path.c_str());
}

TEST_CASE("cmd_run maps data errors to a distinct exit code") {
  ExperimentConfig cfg = tiny_synth_config();
  cfg.format = "libsvm";
  cfg.dataset = "/nonexistent/path.libsvm";
  std::ostringstream log;
  CHECK(cmd_run(cfg, log) == ExitCode::DataError);

  ExperimentConfig bad = tiny_synth_config();
  bad.sim.hp.gamma = -1.0;
  CHECK(cmd_run(bad, log) == ExitCode::Usage);
}

TEST_CASE("cmd_run reports non-convergence and still writes the partial trace") {
  auto cfg = tiny_synth_config();
  cfg.sim.hp.epochs = 2;
  cfg.sim.objective_stop = -1.0;
  cfg.out_path = scratch_path("vflsim_nonconv.csv");
  std::ostringstream log;
  CHECK(cmd_run(cfg, log) == ExitCode::NonConvergence);
  std::ifstream in(cfg.out_path);
  REQUIRE(in.good());
  CHECK(read_trace_csv(in).size() == 3);
  std::remove(cfg.out_path.c_str());
}

TEST_CASE("cmd_compare flags losslessness and the ablation gap") {
  auto fed = tiny_synth_config();
  fed.sim.q = 4;
  fed.sim.m = 2;
  fed.sim.hp.epochs = 6;

  auto central = fed;
  central.sim.mode = RunMode::Centralized;
  auto frozen = fed;
  frozen.sim.mode = RunMode::FrozenPassive;

  std::ostringstream log;
  const auto code = cmd_compare(fed, central, frozen, {}, log);
  CHECK(code == ExitCode::Ok);
  const auto text = log.str();
  CHECK(text.find("delta(federated, centralized) = 0") != std::string::npos);
  CHECK(text.find("LOSSLESS") != std::string::npos);

  auto mismatched = fed;
  mismatched.synth_n = 99;
  CHECK(cmd_compare(mismatched, central, frozen, {}, log) == ExitCode::Usage);

  auto wrong_mode = fed;
  CHECK(cmd_compare(fed, wrong_mode, frozen, {}, log) == ExitCode::Usage);
}

TEST_CASE("cmd_speedup writes the q,wall_ms,speedup table") {
  auto cfg = tiny_synth_config();
  cfg.sim.hp.epochs = 25;
  cfg.sim.objective_stop = 0.55;
  std::ostringstream log;
  const auto code = cmd_speedup(cfg, {1}, log);
  CHECK(code == ExitCode::Ok);
  const auto text = log.str();
  CHECK(text.find("q,wall_ms,speedup") != std::string::npos);
  CHECK(text.find("1,") != std::string::npos);
}

TEST_CASE("cmd_audit honest and adversarial counts") {
  auto cfg = tiny_synth_config();
  cfg.sim.q = 4;
  cfg.sim.m = 2;
  cfg.sim.hp.epochs = 3;

  std::ostringstream honest;
  CHECK(cmd_audit(cfg, 30, false, false, honest) == ExitCode::Ok);
  CHECK(honest.str().find("0 violations") != std::string::npos);

  std::ostringstream unmasked;
  CHECK(cmd_audit(cfg, 10, false, true, unmasked) == ExitCode::Ok);
  CHECK(unmasked.str().find("40 violations") != std::string::npos);

  std::ostringstream collusion;
  CHECK(cmd_audit(cfg, 10, true, false, collusion) == ExitCode::Ok);
  CHECK(collusion.str().find("\n0 violations") == std::string::npos);
  CHECK(collusion.str().find("can reconstruct bare partial") != std::string::npos);
}

TEST_CASE("cmd_partition prints the seeded layout") {
  auto cfg = tiny_synth_config();
  std::ostringstream log;
  CHECK(cmd_partition(cfg, log) == ExitCode::Ok);
  CHECK(log.str().find("d=8 q=2") != std::string::npos);
  CHECK(log.str().find("party 0") != std::string::npos);
}
