#pragma once

#include <string>
#include <vector>

#include "prpolab/config.hpp"
#include "prpolab/objective.hpp"

namespace prpolab {

struct RunPaths {
  std::string dir;
  std::string metrics_csv;
  std::string advantage_csv;
  std::string partition_log;
  std::string config_txt;
  std::string summary_txt;
};

struct RunResult {
  RunPaths paths;
  TrainResult train;
  uint64_t suite_digest = 0;
};

// empty out_root falls back to $PRPOLAB_OUT_ROOT, then "runs"
std::string resolve_out_root(const std::string& out_root);

// trains one variant and writes metrics.csv, advantage_audit.csv,
// partition_audit.log, resolved_config.ini and summary.txt under
// <out_root>/<run name>/
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_root);

struct CompareResult {
  std::string csv_path;   // long-format step,variant,metric,value
  std::string table;      // final-step summary, one row per variant
  std::vector<RunResult> runs;
};

// runs several variants on the identical task suite and collates them
CompareResult compare_variants(const std::vector<ExperimentConfig>& cfgs,
                               const std::string& out_root);

}  // namespace prpolab
