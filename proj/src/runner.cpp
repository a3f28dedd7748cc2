#include "prpolab/runner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "prpolab/error.hpp"
#include "prpolab/partition.hpp"

namespace prpolab {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// terminal display only; files keep full precision
std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string join_semis_short(const std::vector<double>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ';';
    out += fmt_short(vs[i]);
  }
  return out;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string join_semis(const std::vector<double>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ';';
    out += fmt(vs[i]);
  }
  return out;
}

std::string join_semis(const std::vector<int>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(vs[i]);
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string metrics_row(const std::string& variant, const std::string& preset,
                        const StepMetrics& m) {
  std::ostringstream row;
  row << m.step << ',' << variant << ',' << preset << ',' << join_semis(m.active_dims) << ','
      << fmt(m.objective_value) << ',' << fmt(m.surrogate) << ',' << fmt(m.kl_value) << ','
      << fmt(m.clip_fraction) << ',' << fmt(m.grad_norm) << ',' << fmt(m.param_norm) << ','
      << fmt(m.reward_mean_agg) << ',' << join_semis(m.reward_mean_k) << ','
      << fmt(m.mean_abs_adv) << ',' << join_semis(m.mean_abs_adv_k) << ',' << m.m_final << ','
      << m.relegations << ',' << m.degenerate_entries << ',' << fmt(m.response_len_mean) << '\n';
  return row.str();
}

constexpr const char* kMetricsHeader =
    "step,variant,preset,active_dims,objective,surrogate,kl,clip_fraction,grad_norm,"
    "param_norm,reward_mean_agg,reward_mean_k,mean_abs_adv,mean_abs_adv_k,m_final,"
    "relegations,degenerate_entries,response_len_mean\n";

}  // namespace

std::string resolve_out_root(const std::string& out_root) {
  if (!out_root.empty()) return out_root;
  if (const char* env = std::getenv("PRPOLAB_OUT_ROOT"); env && *env) return env;
  return "runs";
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_root) {
  cfg.validate();
  const TrainConfig tc = cfg.to_train_config();

  RunResult result;
  result.suite_digest = suite_hash(tc.tasks);

  const std::string root = resolve_out_root(out_root);
  const std::string dir = root + "/" + cfg.name;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory '" + dir + "': " + ec.message());

  RunPaths& paths = result.paths;
  paths.dir = dir;
  paths.metrics_csv = dir + "/metrics.csv";
  paths.advantage_csv = dir + "/advantage_audit.csv";
  paths.partition_log = dir + "/partition_audit.log";
  paths.config_txt = dir + "/resolved_config.ini";
  paths.summary_txt = dir + "/summary.txt";

  write_file(paths.config_txt, serialize_config(cfg));

  std::ostringstream metrics;
  metrics << "# prpolab metrics v1\n";
  metrics << "# variant=" << cfg.name << " algo=" << to_string(cfg.algo.kind)
          << " suite=" << hex64(result.suite_digest) << '\n';
  metrics << kMetricsHeader;

  std::string step0_adv, last_adv;
  int last_step = 0;
  std::ostringstream partition_log;
  partition_log << "# prpolab partition-audit v1\n";
  bool any_partition = false;

  const auto started = std::chrono::steady_clock::now();
  result.train = run_training(tc, [&](const StepOutcome& out, const PolicyParams&) {
    metrics << metrics_row(cfg.name, to_string(cfg.preset), out.metrics);
    const std::string csv = out.table.to_csv(out.batch.rollouts);
    if (out.metrics.step == 0) step0_adv = csv;
    last_adv = csv;
    last_step = out.metrics.step;
    if (out.has_partitions) {
      any_partition = true;
      partition_log << "step " << out.metrics.step << '\n'
                    << partition_audit_text(out.pstate);
    }
  });
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;

  write_file(paths.metrics_csv, metrics.str());

  std::ostringstream adv;
  adv << "# prpolab advantage-audit v1\n# step 0\n" << step0_adv;
  if (last_step != 0) adv << "# step " << last_step << '\n' << last_adv;
  write_file(paths.advantage_csv, adv.str());

  if (!any_partition)
    partition_log << "# variant " << to_string(cfg.algo.kind) << " uses no partition pooling\n";
  write_file(paths.partition_log, partition_log.str());

  const StepMetrics& fin = result.train.history.back();
  std::ostringstream summary;
  summary << "name=" << cfg.name << '\n'
          << "algo=" << to_string(cfg.algo.kind) << '\n'
          << "preset=" << to_string(cfg.preset) << '\n'
          << "suite_hash=" << hex64(result.suite_digest) << '\n'
          << "steps=" << cfg.steps << '\n'
          << "final_objective=" << fmt(fin.objective_value) << '\n'
          << "final_reward_mean_agg=" << fmt(fin.reward_mean_agg) << '\n'
          << "final_reward_mean_k=" << join_semis(fin.reward_mean_k) << '\n'
          << "final_mean_abs_adv=" << fmt(fin.mean_abs_adv) << '\n'
          << "final_param_norm=" << fmt(fin.param_norm) << '\n'
          << "final_m_final=" << fin.m_final << '\n'
          << "final_relegations=" << fin.relegations << '\n'
          << "wall_time_seconds=" << fmt(elapsed.count()) << '\n';
  write_file(paths.summary_txt, summary.str());

  return result;
}

CompareResult compare_variants(const std::vector<ExperimentConfig>& cfgs,
                               const std::string& out_root) {
  if (cfgs.size() < 2) throw ConfigError("comparison needs at least two variants");
  std::set<std::string> names;
  for (const ExperimentConfig& cfg : cfgs)
    if (!names.insert(cfg.name).second)
      throw ConfigError("duplicate variant name '" + cfg.name + "'");

  // all variants must see the identical task suite or the comparison is moot
  std::vector<uint64_t> digests;
  for (const ExperimentConfig& cfg : cfgs) {
    cfg.validate();
    digests.push_back(suite_hash(cfg.to_train_config().tasks));
  }
  for (size_t i = 1; i < digests.size(); ++i)
    if (digests[i] != digests[0])
      throw ConfigError("variant '" + cfgs[i].name + "' builds a different task suite than '" +
                        cfgs[0].name + "'");

  CompareResult result;
  for (const ExperimentConfig& cfg : cfgs) result.runs.push_back(run_experiment(cfg, out_root));

  const std::string root = resolve_out_root(out_root);
  std::ostringstream csv;
  csv << "# prpolab comparison v1\n# suite=" << hex64(digests[0]) << '\n';
  csv << "step,variant,metric,value\n";
  for (size_t i = 0; i < cfgs.size(); ++i) {
    for (const StepMetrics& m : result.runs[i].train.history) {
      auto put = [&](const std::string& metric, double value) {
        csv << m.step << ',' << cfgs[i].name << ',' << metric << ',' << fmt(value) << '\n';
      };
      put("objective", m.objective_value);
      put("surrogate", m.surrogate);
      put("kl", m.kl_value);
      put("clip_fraction", m.clip_fraction);
      put("grad_norm", m.grad_norm);
      put("param_norm", m.param_norm);
      put("reward_mean_agg", m.reward_mean_agg);
      for (size_t k = 0; k < m.reward_mean_k.size(); ++k)
        put("reward_mean_k" + std::to_string(k), m.reward_mean_k[k]);
      put("mean_abs_adv", m.mean_abs_adv);
      put("m_final", static_cast<double>(m.m_final));
      put("relegations", static_cast<double>(m.relegations));
    }
  }
  result.csv_path = root + "/comparison.csv";
  write_file(result.csv_path, csv.str());

  std::ostringstream table;
  table << std::left << std::setw(24) << "variant" << std::setw(14) << "algo" << std::setw(16)
        << "objective" << std::setw(16) << "reward_agg" << std::setw(22) << "reward_k"
        << std::setw(10) << "m_final" << "relegated\n";
  for (size_t i = 0; i < cfgs.size(); ++i) {
    const StepMetrics& fin = result.runs[i].train.history.back();
    table << std::left << std::setw(24) << cfgs[i].name << std::setw(14)
          << to_string(cfgs[i].algo.kind) << std::setw(16) << fmt_short(fin.objective_value)
          << std::setw(16) << fmt_short(fin.reward_mean_agg) << std::setw(22)
          << join_semis_short(fin.reward_mean_k) << std::setw(10) << fin.m_final
          << fin.relegations << '\n';
  }
  result.table = table.str();
  return result;
}

}  // namespace prpolab
