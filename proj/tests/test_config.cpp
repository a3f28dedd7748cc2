#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"
#include "prpolab/config.hpp"
#include "prpolab/error.hpp"

using namespace prpolab;

namespace {

const char* kSample = R"ini(# example experiment
[policy]
parameterization = tabular-logits
init_scale = 0.25

[env]
kind = interference
sizes = 3
vocab_size = 4
max_len = 4
dims = 2
seed = 42

[algo]
kind = prpo
epsilon = 0.15
lambda_k = 0.75, 0.25
partition_mode = capability
tau = 2.5
max_iter = 4

[run]
name = demo-a_1
steps = 12
group_size = 6
lr = 0.05
seed = 7
)ini";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("a full config file parses into the expected fields") {
  const ExperimentConfig cfg = parse_config(kSample);
  CHECK(cfg.parameterization == Parameterization::TabularLogits);
  CHECK(cfg.init_scale == 0.25);
  CHECK(cfg.env.kind == SuiteKind::Interference);
  CHECK(cfg.env.sizes == std::vector<int>{3});
  CHECK(cfg.env.vocab_size == 4);
  CHECK(cfg.env.seed == 42);
  CHECK(cfg.algo.kind == AlgoKind::Prpo);
  CHECK(cfg.algo.epsilon == 0.15);
  CHECK(cfg.algo.lambda_k == std::vector<double>{0.75, 0.25});
  CHECK(cfg.algo.partition.mode == PartitionMode::Capability);
  CHECK(cfg.algo.partition.tau == 2.5);
  CHECK(cfg.algo.partition.max_iter == 4);
  CHECK(cfg.name == "demo-a_1");
  CHECK(cfg.steps == 12);
  CHECK(cfg.group_size == 6);
  CHECK(cfg.lr == 0.05);
  CHECK(cfg.seed == 7);
  // untouched keys keep their defaults
  CHECK(cfg.algo.kl_coeff == 0.0);
  CHECK(cfg.inner_updates == 1);
  CHECK(cfg.threads == 1);
  cfg.validate();
}

TEST_CASE("defaults alone form a sound config") {
  const ExperimentConfig cfg = parse_config("[env]\nsizes = 2\n");
  cfg.validate();
  CHECK(cfg.algo.partition.tau == 3.0);
  CHECK(cfg.algo.partition.max_iter == 5);
  CHECK(cfg.algo.kind == AlgoKind::Grpo);
  CHECK(cfg.steps == 200);
}

TEST_CASE("parse errors carry the offending line number") {
  auto message_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message_of("[env]\nbogus_key = 1\n").find("line 2") != std::string::npos);
  CHECK(message_of("[nonsense]\nx = 1\n").find("unknown section") != std::string::npos);
  CHECK(message_of("steps = 5\n").find("outside any [section]") != std::string::npos);
  CHECK(message_of("[run]\nsteps = 5\nsteps = 6\n").find("duplicate") != std::string::npos);
  CHECK(message_of("[run]\nsteps\n").find("key = value") != std::string::npos);
  CHECK(message_of("[run\nsteps = 5\n").find("unterminated") != std::string::npos);
  CHECK(message_of("[run]\nsteps = abc\n").find("expected an integer") != std::string::npos);
  CHECK(message_of("[run]\nlr = fast\n").find("expected a number") != std::string::npos);
}

TEST_CASE("serialization is a fixed point of parsing") {
  ExperimentConfig cfg = parse_config(kSample);
  cfg.algo.lambda_m = {0.3, 0.7};
  cfg.algo.kl_coeff = 0.01;
  cfg.lr = 1.0 / 3.0;  // needs all 17 digits to survive
  const std::string once = serialize_config(cfg);
  const ExperimentConfig back = parse_config(once);
  CHECK(serialize_config(back) == once);
  CHECK(back.lr == cfg.lr);
  CHECK(back.algo.lambda_m == cfg.algo.lambda_m);
}

TEST_CASE("infinity survives the round trip") {
  ExperimentConfig cfg;
  cfg.env.sizes = {2};
  cfg.algo.partition.tau = std::numeric_limits<double>::infinity();
  const ExperimentConfig back = parse_config(serialize_config(cfg));
  CHECK(std::isinf(back.algo.partition.tau));
  CHECK(back.algo.partition.tau > 0);
}

TEST_CASE("dotted overrides reach into sections") {
  ExperimentConfig cfg;
  cfg.env.sizes = {2};
  apply_override(cfg, "run.steps", "33");
  apply_override(cfg, "algo.tau", "inf");
  apply_override(cfg, "env.kind", "scale-conflict");
  apply_override(cfg, "env.sizes", "2,3");
  CHECK(cfg.steps == 33);
  CHECK(std::isinf(cfg.algo.partition.tau));
  CHECK(cfg.env.kind == SuiteKind::ScaleConflict);
  CHECK(cfg.env.sizes == std::vector<int>{2, 3});
  CHECK_THROWS_AS(apply_override(cfg, "steps", "5"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "run.", "5"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "run.bogus", "5"), ConfigError);
}

TEST_CASE("cross-field problems surface during validation") {
  ExperimentConfig cfg;
  cfg.env.sizes = {2};
  cfg.name = "bad name";  // spaces are not allowed
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.name = "ok";
  cfg.group_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.group_size = 8;
  cfg.env.dims = 1;
  cfg.preset = RewardPreset::FormatOnly;  // strips the only dimension
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("the policy shape is derived from the environment") {
  ExperimentConfig cfg = parse_config(kSample);
  const TrainConfig tc = cfg.to_train_config();
  CHECK(tc.policy.vocab_size == 4);
  CHECK(tc.policy.max_len == 4);
  CHECK(tc.policy.num_contexts == 3);
  CHECK(tc.tasks.size() == 3);
  CHECK(tc.init_scale == 0.25);
  CHECK(tc.seed == 7);
}

TEST_CASE("missing config files raise io errors") {
  CHECK_THROWS_AS(load_config_file("/nonexistent/prpolab.ini"), IoError);
}

}  // TEST_SUITE
