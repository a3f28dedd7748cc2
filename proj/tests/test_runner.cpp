#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "prpolab/error.hpp"
#include "prpolab/runner.hpp"

using namespace prpolab;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.env.kind = SuiteKind::Basic;
  cfg.env.sizes = {2};
  cfg.env.vocab_size = 3;
  cfg.env.max_len = 3;
  cfg.env.dims = 2;
  cfg.env.seed = 11;
  cfg.name = name;
  cfg.steps = 4;
  cfg.group_size = 4;
  cfg.lr = 0.1;
  cfg.seed = 5;
  return cfg;
}

fs::path fresh_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

size_t count_lines(const std::string& text) {
  size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("a run writes its full artifact set") {
  const fs::path root = fresh_dir("prpolab_runner_artifacts");
  const RunResult res = run_experiment(small_config("demo"), root.string());

  CHECK(fs::exists(res.paths.metrics_csv));
  CHECK(fs::exists(res.paths.advantage_csv));
  CHECK(fs::exists(res.paths.partition_log));
  CHECK(fs::exists(res.paths.config_txt));
  CHECK(fs::exists(res.paths.summary_txt));
  CHECK(res.paths.dir == (root / "demo").string());
  CHECK(res.suite_digest != 0);
  CHECK(res.train.history.size() == 4);

  const std::string metrics = read_file(res.paths.metrics_csv);
  CHECK(metrics.rfind("# prpolab metrics v1\n", 0) == 0);
  CHECK(metrics.find("algo=grpo") != std::string::npos);
  CHECK(metrics.find("step,variant,preset,active_dims,objective,surrogate,kl,") !=
        std::string::npos);
  CHECK(count_lines(metrics) == 3 + 4);  // two comment lines, header, one row per step
  CHECK(metrics.find("wall") == std::string::npos);  // timing never lands in metrics

  const std::string adv = read_file(res.paths.advantage_csv);
  CHECK(adv.rfind("# prpolab advantage-audit v1\n", 0) == 0);
  CHECK(adv.find("# step 0") != std::string::npos);
  CHECK(adv.find("# step 3") != std::string::npos);

  const std::string summary = read_file(res.paths.summary_txt);
  for (const char* key : {"name=demo", "algo=grpo", "suite_hash=", "final_objective=",
                          "final_reward_mean_k=", "wall_time_seconds="})
    CHECK(summary.find(key) != std::string::npos);

  // the resolved config is a parse fixed point
  const std::string ini = read_file(res.paths.config_txt);
  CHECK(serialize_config(parse_config(ini)) == ini);

  fs::remove_all(root);
}

TEST_CASE("partition audit reflects whether pooling ran") {
  const fs::path root = fresh_dir("prpolab_runner_audit");

  const RunResult plain = run_experiment(small_config("plain"), root.string());
  const std::string no_pool = read_file(plain.paths.partition_log);
  CHECK(no_pool.find("uses no partition pooling") != std::string::npos);

  ExperimentConfig pooled = small_config("pooled");
  pooled.algo.kind = AlgoKind::DataPrpo;
  const RunResult res = run_experiment(pooled, root.string());
  const std::string log = read_file(res.paths.partition_log);
  CHECK(log.rfind("# prpolab partition-audit v1\n", 0) == 0);
  CHECK(log.find("step 0") != std::string::npos);
  CHECK(log.find("step 3") != std::string::npos);
  CHECK(log.find("mode=capability") != std::string::npos);
  CHECK(log.find("status=converged") != std::string::npos);

  fs::remove_all(root);
}

TEST_CASE("reruns and thread counts leave the metrics byte-identical") {
  const fs::path root_a = fresh_dir("prpolab_runner_rerun_a");
  const fs::path root_b = fresh_dir("prpolab_runner_rerun_b");

  ExperimentConfig cfg = small_config("same");
  cfg.algo.kind = AlgoKind::Prpo;
  const RunResult a = run_experiment(cfg, root_a.string());
  const RunResult b = run_experiment(cfg, root_b.string());
  CHECK(read_file(a.paths.metrics_csv) == read_file(b.paths.metrics_csv));
  CHECK(read_file(a.paths.advantage_csv) == read_file(b.paths.advantage_csv));
  CHECK(read_file(a.paths.partition_log) == read_file(b.paths.partition_log));

  ExperimentConfig threaded = cfg;
  threaded.threads = 4;
  const fs::path root_c = fresh_dir("prpolab_runner_rerun_c");
  const RunResult c = run_experiment(threaded, root_c.string());
  // thread count shows up in the resolved config but never in the results
  CHECK(read_file(a.paths.metrics_csv) == read_file(c.paths.metrics_csv));

  fs::remove_all(root_a);
  fs::remove_all(root_b);
  fs::remove_all(root_c);
}

TEST_CASE("comparisons demand distinct names and identical suites") {
  const fs::path root = fresh_dir("prpolab_runner_compare");

  ExperimentConfig a = small_config("a");
  ExperimentConfig b = small_config("b");
  b.algo.kind = AlgoKind::DataPrpo;

  const CompareResult res = compare_variants({a, b}, root.string());
  REQUIRE(res.runs.size() == 2);
  CHECK(fs::exists(res.csv_path));
  const std::string csv = read_file(res.csv_path);
  CHECK(csv.rfind("# prpolab comparison v1\n", 0) == 0);
  CHECK(csv.find("step,variant,metric,value") != std::string::npos);
  CHECK(csv.find(",a,objective,") != std::string::npos);
  CHECK(csv.find(",b,reward_mean_k1,") != std::string::npos);
  CHECK(res.table.find("a") != std::string::npos);
  CHECK(res.table.find("data-prpo") != std::string::npos);

  CHECK_THROWS_AS(compare_variants({a}, root.string()), ConfigError);
  ExperimentConfig clash = b;
  clash.name = "a";
  CHECK_THROWS_AS(compare_variants({a, clash}, root.string()), ConfigError);
  ExperimentConfig other_suite = b;
  other_suite.env.seed = 99;
  CHECK_THROWS_AS(compare_variants({a, other_suite}, root.string()), ConfigError);

  fs::remove_all(root);
}

TEST_CASE("output root resolution prefers explicit, then environment, then default") {
  ::unsetenv("PRPOLAB_OUT_ROOT");
  CHECK(resolve_out_root("chosen") == "chosen");
  CHECK(resolve_out_root("") == "runs");
  ::setenv("PRPOLAB_OUT_ROOT", "/tmp/prpolab_env_root", 1);
  CHECK(resolve_out_root("") == "/tmp/prpolab_env_root");
  CHECK(resolve_out_root("chosen") == "chosen");
  ::unsetenv("PRPOLAB_OUT_ROOT");
  CHECK(resolve_out_root("") == "runs");
}

}  // TEST_SUITE
