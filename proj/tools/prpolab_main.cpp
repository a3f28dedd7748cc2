#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prpolab/config.hpp"
#include "prpolab/error.hpp"
#include "prpolab/runner.hpp"
#include "prpolab/verify.hpp"

namespace {

using namespace prpolab;

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;  // section.key=value, applied in order
  std::string out_root;
  // direct mirrors of the most-used keys; empty/negative means "not given"
  std::string name, algo, suite, preset, partition_mode, outlier_rule;
  int steps = -1, group_size = -1, threads = -1, max_iter = -1;
  double tau = -1.0, lr = -1.0, epsilon = -1.0;
  long long seed = -1;
};

std::string dtos(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config) {
  if (with_config) cmd->add_option("-c,--config", f.config_path, "config file (ini)");
  cmd->add_option("--set", f.sets, "override one key, e.g. --set algo.tau=2.5")
      ->type_name("SECTION.KEY=VALUE");
  cmd->add_option("-o,--out", f.out_root, "output root (default $PRPOLAB_OUT_ROOT or ./runs)");
  cmd->add_option("--name", f.name, "run name ([run] name)");
  cmd->add_option("--algo", f.algo, "grpo | reward-prpo | data-prpo | prpo");
  cmd->add_option("--suite", f.suite, "basic | interference | scale-conflict | mixed");
  cmd->add_option("--preset", f.preset, "reward preset ([run] preset)");
  cmd->add_option("--partition-mode", f.partition_mode, "capability | global | question");
  cmd->add_option("--outlier-rule", f.outlier_rule, "scalar | any-dim");
  cmd->add_option("--steps", f.steps, "training steps");
  cmd->add_option("--group-size", f.group_size, "rollouts per question");
  cmd->add_option("--threads", f.threads, "worker threads");
  cmd->add_option("--max-iter", f.max_iter, "partition validation round budget");
  cmd->add_option("--tau", f.tau, "outlier threshold (inf disables)");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--epsilon", f.epsilon, "clip half-width");
  cmd->add_option("--seed", f.seed, "master seed ([run] seed)");
}

ExperimentConfig materialize(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = load_config_file(f.config_path);
  if (!f.name.empty()) apply_override(cfg, "run.name", f.name);
  if (!f.algo.empty()) apply_override(cfg, "algo.kind", f.algo);
  if (!f.suite.empty()) apply_override(cfg, "env.kind", f.suite);
  if (!f.preset.empty()) apply_override(cfg, "run.preset", f.preset);
  if (!f.partition_mode.empty()) apply_override(cfg, "algo.partition_mode", f.partition_mode);
  if (!f.outlier_rule.empty()) apply_override(cfg, "algo.outlier_rule", f.outlier_rule);
  if (f.steps >= 0) apply_override(cfg, "run.steps", std::to_string(f.steps));
  if (f.group_size >= 0) apply_override(cfg, "run.group_size", std::to_string(f.group_size));
  if (f.threads >= 0) apply_override(cfg, "run.threads", std::to_string(f.threads));
  if (f.max_iter >= 0) apply_override(cfg, "algo.max_iter", std::to_string(f.max_iter));
  if (f.tau >= 0.0) apply_override(cfg, "algo.tau", dtos(f.tau));
  if (f.lr >= 0.0) apply_override(cfg, "run.lr", dtos(f.lr));
  if (f.epsilon >= 0.0) apply_override(cfg, "algo.epsilon", dtos(f.epsilon));
  if (f.seed >= 0) apply_override(cfg, "run.seed", std::to_string(f.seed));
  for (const std::string& s : f.sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

int cmd_run(const CommonFlags& f) {
  const ExperimentConfig cfg = materialize(f);
  const RunResult result = run_experiment(cfg, f.out_root);
  const StepMetrics& fin = result.train.history.back();
  std::cout << "run " << cfg.name << " finished: steps=" << cfg.steps
            << " final_objective=" << fin.objective_value
            << " final_reward_mean=" << fin.reward_mean_agg
            << " relegated=" << fin.relegations << '\n'
            << "outputs in " << result.paths.dir << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::string& algos_csv,
                const CommonFlags& f) {
  std::vector<ExperimentConfig> cfgs;
  for (const std::string& path : config_paths) {
    CommonFlags per = f;
    per.config_path = path;
    cfgs.push_back(materialize(per));
  }
  if (!algos_csv.empty()) {
    // expand one base config into a variant per named algorithm
    if (cfgs.size() > 1)
      throw ConfigError("--algos expands a single base config; pass at most one --config");
    const ExperimentConfig base = cfgs.empty() ? materialize(f) : cfgs.front();
    cfgs.clear();
    std::stringstream ss(algos_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      ExperimentConfig cfg = base;
      apply_override(cfg, "algo.kind", item);
      cfg.name = base.name + "-" + item;
      cfgs.push_back(std::move(cfg));
    }
  }
  const CompareResult result = compare_variants(cfgs, f.out_root);
  std::cout << result.table << "long-format series in " << result.csv_path << '\n';
  return 0;
}

int cmd_verify() {
  const std::vector<VerifyCheck> checks = run_verification();
  std::cout << verification_report(checks);
  for (const VerifyCheck& c : checks)
    if (!c.passed) return 2;
  return 0;
}

int cmd_suite(const CommonFlags& f, const std::string& out_path) {
  const ExperimentConfig cfg = materialize(f);
  const std::string text = serialize_suite(make_task_suite(cfg.env));
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + out_path + "' for writing");
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group-relative policy optimization laboratory"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "train one variant and write metrics");
  add_common(run, run_flags, true);

  CommonFlags cmp_flags;
  std::vector<std::string> cmp_configs;
  std::string cmp_algos;
  CLI::App* cmp = app.add_subcommand("compare", "run variants on one suite and collate");
  cmp->add_option("-c,--config", cmp_configs, "config file per variant (repeatable)");
  cmp->add_option("--algos", cmp_algos, "comma list of algorithms to expand from the base config");
  add_common(cmp, cmp_flags, false);

  CLI::App* verify = app.add_subcommand("verify", "run the oracle self-check battery");

  CommonFlags suite_flags;
  std::string suite_out;
  CLI::App* suite = app.add_subcommand("suite", "print the configured task suite");
  add_common(suite, suite_flags, true);
  suite->add_option("--dump", suite_out, "write the suite here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are config errors
  }

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (cmp->parsed()) return cmd_compare(cmp_configs, cmp_algos, cmp_flags);
    if (verify->parsed()) return cmd_verify();
    if (suite->parsed()) return cmd_suite(suite_flags, suite_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
