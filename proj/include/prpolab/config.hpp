#pragma once

#include <string>
#include <vector>

#include "prpolab/envs.hpp"
#include "prpolab/objective.hpp"
#include "prpolab/policy.hpp"

namespace prpolab {

// Everything a run needs, grouped the way the config file sections are.
struct ExperimentConfig {
  // [policy]
  Parameterization parameterization = Parameterization::TabularLogits;
  double init_scale = 0.1;

  // [env]
  SuiteConfig env;

  // [algo]
  AlgoVariant algo;

  // [run]
  std::string name = "run";
  RewardPreset preset = RewardPreset::Base;
  int switch_step = -1;
  int group_size = 8;
  int steps = 200;
  double lr = 0.1;
  int inner_updates = 1;
  uint64_t seed = 0;
  int threads = 1;

  void validate() const;
  TrainConfig to_train_config() const;  // materializes tasks and the policy shape
};

// strict INI subset: [section], key = value, full-line # comments; unknown
// sections/keys and duplicate keys are errors that carry the line number
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// canonical re-parseable form; parse(serialize(c)) == c
std::string serialize_config(const ExperimentConfig& cfg);

// one "section.key=value" override from the command line
void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value);

}  // namespace prpolab
