#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vflsim/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<long> seed;
  std::optional<std::string> out;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--set", flags.overrides, "override a config key, key=value")->take_all();
  cmd->add_option("--seed", flags.seed, "override the experiment seed");
  cmd->add_option("--out", flags.out, "override the output path");
  cmd->add_flag("--deterministic", flags.deterministic,
                "force the seeded single-thread interleaver");
}

vflsim::ExperimentConfig build_config(const CommonFlags& flags) {
  vflsim::ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = vflsim::ExperimentConfig::from_file(flags.config_path);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw vflsim::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (flags.seed) cfg.sim.hp.seed = static_cast<std::uint64_t>(*flags.seed);
  if (flags.out) cfg.out_path = *flags.out;
  if (flags.deterministic) cfg.sim.deterministic = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vertical federated learning simulator"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "train one configuration and emit a trace CSV");
  add_common(run_cmd, run_flags);

  CommonFlags cmp_flags;
  std::string cmp_central, cmp_frozen;
  double cmp_tolerance = -1.0;
  auto* cmp_cmd = app.add_subcommand("compare",
                                     "run federated, centralized and frozen-passive "
                                     "configurations and report losslessness");
  add_common(cmp_cmd, cmp_flags);
  cmp_cmd->add_option("--centralized", cmp_central, "centralized-mode config file")->required();
  cmp_cmd->add_option("--frozen", cmp_frozen, "frozen-passive-mode config file")->required();
  cmp_cmd->add_option("--tolerance", cmp_tolerance, "lossless tolerance on the test metric");

  CommonFlags spd_flags;
  std::vector<int> spd_q_list;
  auto* spd_cmd = app.add_subcommand("speedup", "wall-time scalability over party counts");
  add_common(spd_cmd, spd_flags);
  spd_cmd->add_option("--q-list", spd_q_list, "party counts to sweep")->required();

  CommonFlags aud_flags;
  int aud_count = 100;
  bool aud_collusion = false;
  bool aud_unmask = false;
  auto* aud_cmd = app.add_subcommand("audit", "audit masked-aggregation transcripts");
  add_common(aud_cmd, aud_flags);
  aud_cmd->add_option("--aggregations", aud_count, "number of aggregations to audit");
  aud_cmd->add_flag("--simulate-collusion", aud_collusion,
                    "let the two mask-and-value receivers of one party collude");
  aud_cmd->add_flag("--unmask-debug", aud_unmask, "draw zero masks to demonstrate detection");

  CommonFlags part_flags;
  auto* part_cmd = app.add_subcommand("partition", "print the seeded feature partition");
  add_common(part_cmd, part_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    vflsim::ExitCode code = vflsim::ExitCode::Usage;
    if (*run_cmd) {
      code = vflsim::cmd_run(build_config(run_flags), std::cout);
    } else if (*cmp_cmd) {
      auto fed = build_config(cmp_flags);
      auto central = vflsim::ExperimentConfig::from_file(cmp_central);
      auto frozen = vflsim::ExperimentConfig::from_file(cmp_frozen);
      if (cmp_flags.seed) {
        central.sim.hp.seed = fed.sim.hp.seed;
        frozen.sim.hp.seed = fed.sim.hp.seed;
      }
      vflsim::CompareOptions opts;
      opts.lossless_tolerance = cmp_tolerance;
      code = vflsim::cmd_compare(fed, central, frozen, opts, std::cout);
    } else if (*spd_cmd) {
      code = vflsim::cmd_speedup(build_config(spd_flags), spd_q_list, std::cout);
    } else if (*aud_cmd) {
      code = vflsim::cmd_audit(build_config(aud_flags), aud_count, aud_collusion, aud_unmask,
                               std::cout);
    } else if (*part_cmd) {
      code = vflsim::cmd_partition(build_config(part_flags), std::cout);
    }
    return static_cast<int>(code);
  } catch (const vflsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return static_cast<int>(vflsim::ExitCode::Usage);
  } catch (const vflsim::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return static_cast<int>(vflsim::ExitCode::DataError);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(vflsim::ExitCode::Usage);
  }
}
