// pybind11 surface for the lab: policies, task suites, advantages, partition
// validation, the clipped surrogate, training, and the experiment runner.

#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>

#include "prpolab/advantage.hpp"
#include "prpolab/config.hpp"
#include "prpolab/envs.hpp"
#include "prpolab/error.hpp"
#include "prpolab/objective.hpp"
#include "prpolab/oracle.hpp"
#include "prpolab/partition.hpp"
#include "prpolab/policy.hpp"
#include "prpolab/rng.hpp"
#include "prpolab/runner.hpp"

namespace py = pybind11;
using namespace prpolab;

PYBIND11_MODULE(_prpolab, m) {
  m.doc() = "desk-scale GRPO / PRPO policy-optimization laboratory";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<InvariantError>(m, "InvariantError");
  py::register_exception<IoError>(m, "IoError");

  py::enum_<Parameterization>(m, "Parameterization")
      .value("TabularLogits", Parameterization::TabularLogits)
      .value("LinearFeatures", Parameterization::LinearFeatures);

  py::enum_<SuiteKind>(m, "SuiteKind")
      .value("Basic", SuiteKind::Basic)
      .value("Interference", SuiteKind::Interference)
      .value("ScaleConflict", SuiteKind::ScaleConflict)
      .value("Mixed", SuiteKind::Mixed);

  py::enum_<RewardKind>(m, "RewardKind")
      .value("Accuracy", RewardKind::Accuracy)
      .value("Format", RewardKind::Format)
      .value("Complement", RewardKind::Complement);

  py::enum_<GroupLevel>(m, "GroupLevel")
      .value("Question", GroupLevel::Question)
      .value("Capability", GroupLevel::Capability)
      .value("Batch", GroupLevel::Batch)
      .value("RolloutSingleton", GroupLevel::RolloutSingleton);

  py::enum_<StdMode>(m, "StdMode")
      .value("Sample", StdMode::Sample)
      .value("Population", StdMode::Population);

  py::enum_<AdvScheme>(m, "AdvScheme")
      .value("QuestionScalar", AdvScheme::QuestionScalar)
      .value("QuestionPerDim", AdvScheme::QuestionPerDim)
      .value("PartitionScalar", AdvScheme::PartitionScalar)
      .value("PartitionPerDim", AdvScheme::PartitionPerDim);

  py::enum_<PartitionMode>(m, "PartitionMode")
      .value("Capability", PartitionMode::Capability)
      .value("Global", PartitionMode::Global)
      .value("Question", PartitionMode::Question);

  py::enum_<OutlierRule>(m, "OutlierRule")
      .value("Scalar", OutlierRule::Scalar)
      .value("AnyDim", OutlierRule::AnyDim);

  py::enum_<AlgoKind>(m, "AlgoKind")
      .value("Grpo", AlgoKind::Grpo)
      .value("RewardPrpo", AlgoKind::RewardPrpo)
      .value("DataPrpo", AlgoKind::DataPrpo)
      .value("Prpo", AlgoKind::Prpo);

  py::enum_<RewardPreset>(m, "RewardPreset")
      .value("Base", RewardPreset::Base)
      .value("AccuracyOnly", RewardPreset::AccuracyOnly)
      .value("FormatOnly", RewardPreset::FormatOnly)
      .value("AccuracyThenFormat", RewardPreset::AccuracyThenFormat)
      .value("FormatThenAccuracy", RewardPreset::FormatThenAccuracy);

  py::class_<PolicySpec>(m, "PolicySpec")
      .def(py::init<>())
      .def_readwrite("vocab_size", &PolicySpec::vocab_size)
      .def_readwrite("max_len", &PolicySpec::max_len)
      .def_readwrite("num_contexts", &PolicySpec::num_contexts)
      .def_readwrite("parameterization", &PolicySpec::parameterization)
      .def("param_count", &PolicySpec::param_count)
      .def("validate", &PolicySpec::validate)
      .def(py::self == py::self);

  py::class_<PolicyParams>(m, "PolicyParams")
      .def(py::init<>())
      .def_readwrite("spec", &PolicyParams::spec)
      .def_readwrite("theta", &PolicyParams::theta);

  py::class_<Rollout>(m, "Rollout")
      .def(py::init<>())
      .def_readwrite("rollout_uid", &Rollout::rollout_uid)
      .def_readwrite("question_id", &Rollout::question_id)
      .def_readwrite("capability_uid", &Rollout::capability_uid)
      .def_readwrite("tokens", &Rollout::tokens)
      .def_readwrite("old_logps", &Rollout::old_logps)
      .def_readwrite("rewards", &Rollout::rewards);

  py::class_<RewardRule>(m, "RewardRule")
      .def(py::init<>())
      .def_readwrite("kind", &RewardRule::kind)
      .def_readwrite("scale", &RewardRule::scale)
      .def_readwrite("complement_c", &RewardRule::complement_c)
      .def_readwrite("filler_token", &RewardRule::filler_token)
      .def("range_lo", &RewardRule::range_lo)
      .def("range_hi", &RewardRule::range_hi)
      .def("__repr__", &RewardRule::to_string)
      .def_static("parse", &RewardRule::parse);

  py::class_<Task>(m, "Task")
      .def(py::init<>())
      .def_readwrite("question_id", &Task::question_id)
      .def_readwrite("capability_uid", &Task::capability_uid)
      .def_readwrite("target", &Task::target)
      .def_readwrite("reward_spec", &Task::reward_spec);

  py::class_<SuiteConfig>(m, "SuiteConfig")
      .def(py::init<>())
      .def_readwrite("kind", &SuiteConfig::kind)
      .def_readwrite("sizes", &SuiteConfig::sizes)
      .def_readwrite("vocab_size", &SuiteConfig::vocab_size)
      .def_readwrite("max_len", &SuiteConfig::max_len)
      .def_readwrite("dims", &SuiteConfig::dims)
      .def_readwrite("seed", &SuiteConfig::seed)
      .def_readwrite("complement_c", &SuiteConfig::complement_c)
      .def_readwrite("scale_factor", &SuiteConfig::scale_factor)
      .def_readwrite("filler_token", &SuiteConfig::filler_token)
      .def("validate", &SuiteConfig::validate);

  py::class_<GroupKey>(m, "GroupKey")
      .def(py::init<>())
      .def_readwrite("level", &GroupKey::level)
      .def_readwrite("id", &GroupKey::id)
      .def("__repr__", &GroupKey::to_string)
      .def("__hash__",
           [](const GroupKey& k) {
             return static_cast<int64_t>(k.id * 4 + static_cast<uint64_t>(k.level));
           })
      .def(py::self == py::self)
      .def(py::self < py::self);

  py::class_<GroupStats>(m, "GroupStats")
      .def(py::init<>())
      .def_readwrite("mean", &GroupStats::mean)
      .def_readwrite("stddev", &GroupStats::stddev)
      .def_readwrite("count", &GroupStats::count)
      .def_readwrite("degenerate", &GroupStats::degenerate);

  py::class_<AdvEntry>(m, "AdvEntry")
      .def(py::init<>())
      .def_readwrite("value", &AdvEntry::value)
      .def_readwrite("raw", &AdvEntry::raw)
      .def_readwrite("degenerate", &AdvEntry::degenerate)
      .def_readwrite("cell", &AdvEntry::cell);

  py::class_<AdvantageTable>(m, "AdvantageTable")
      .def(py::init<>())
      .def_readwrite("scheme", &AdvantageTable::scheme)
      .def_readwrite("num_dims", &AdvantageTable::num_dims)
      .def_readwrite("std_mode", &AdvantageTable::std_mode)
      .def_readonly("entries", &AdvantageTable::entries)
      .def_readonly("cells", &AdvantageTable::cells)
      .def("advantage", &AdvantageTable::advantage, py::arg("rollout_uid"), py::arg("dim") = 0)
      .def("to_csv", &AdvantageTable::to_csv);

  py::class_<PartitionConfig>(m, "PartitionConfig")
      .def(py::init<>())
      .def_readwrite("mode", &PartitionConfig::mode)
      .def_readwrite("tau", &PartitionConfig::tau)
      .def_readwrite("max_iter", &PartitionConfig::max_iter)
      .def_readwrite("outlier_rule", &PartitionConfig::outlier_rule)
      .def_readwrite("weights", &PartitionConfig::weights)
      .def_readwrite("std_mode", &PartitionConfig::std_mode);

  py::class_<RelegationEvent>(m, "RelegationEvent")
      .def(py::init<>())
      .def_readwrite("iteration", &RelegationEvent::iteration)
      .def_readwrite("rollout_uid", &RelegationEvent::rollout_uid)
      .def_readwrite("advantage", &RelegationEvent::advantage)
      .def_readwrite("from_", &RelegationEvent::from);

  py::class_<PartitionState>(m, "PartitionState")
      .def(py::init<>())
      .def_readwrite("mode", &PartitionState::mode)
      .def_readwrite("tau", &PartitionState::tau)
      .def_readwrite("max_iter", &PartitionState::max_iter)
      .def_readwrite("iteration", &PartitionState::iteration)
      .def_readwrite("assignment", &PartitionState::assignment)
      .def_readwrite("relegated", &PartitionState::relegated)
      .def_readwrite("history", &PartitionState::history)
      .def_readwrite("converged", &PartitionState::converged)
      .def_readwrite("exhausted", &PartitionState::exhausted)
      .def("num_partitions", &PartitionState::num_partitions);

  py::class_<ValidationResult>(m, "ValidationResult")
      .def(py::init<>())
      .def_readwrite("state", &ValidationResult::state)
      .def_readwrite("table", &ValidationResult::table);

  py::class_<AlgoVariant>(m, "AlgoVariant")
      .def(py::init<>())
      .def_readwrite("kind", &AlgoVariant::kind)
      .def_readwrite("epsilon", &AlgoVariant::epsilon)
      .def_readwrite("kl_coeff", &AlgoVariant::kl_coeff)
      .def_readwrite("lambda_k", &AlgoVariant::lambda_k)
      .def_readwrite("lambda_m", &AlgoVariant::lambda_m)
      .def_readwrite("partition", &AlgoVariant::partition)
      .def("validate", &AlgoVariant::validate);

  py::class_<GroupBatch>(m, "GroupBatch")
      .def(py::init<>())
      .def_readwrite("rollouts", &GroupBatch::rollouts)
      .def_readwrite("num_dims", &GroupBatch::num_dims)
      .def_readwrite("active_dims", &GroupBatch::active_dims);

  py::class_<ObjectiveTerm>(m, "ObjectiveTerm")
      .def(py::init<>())
      .def_readwrite("uid", &ObjectiveTerm::uid)
      .def_readwrite("dim", &ObjectiveTerm::dim)
      .def_readwrite("weight", &ObjectiveTerm::weight)
      .def_readwrite("advantage", &ObjectiveTerm::advantage);

  py::class_<TermBuild>(m, "TermBuild")
      .def(py::init<>())
      .def_readwrite("terms", &TermBuild::terms)
      .def_readwrite("table", &TermBuild::table)
      .def_readwrite("pstate", &TermBuild::pstate)
      .def_readwrite("has_partitions", &TermBuild::has_partitions)
      .def_readwrite("m_final", &TermBuild::m_final);

  py::class_<SurrogateEval>(m, "SurrogateEval")
      .def(py::init<>())
      .def_readwrite("value", &SurrogateEval::value)
      .def_readwrite("grad", &SurrogateEval::grad)
      .def_readwrite("clip_fraction", &SurrogateEval::clip_fraction);

  py::class_<StepMetrics>(m, "StepMetrics")
      .def(py::init<>())
      .def_readwrite("step", &StepMetrics::step)
      .def_readwrite("objective_value", &StepMetrics::objective_value)
      .def_readwrite("surrogate", &StepMetrics::surrogate)
      .def_readwrite("kl_value", &StepMetrics::kl_value)
      .def_readwrite("clip_fraction", &StepMetrics::clip_fraction)
      .def_readwrite("grad_norm", &StepMetrics::grad_norm)
      .def_readwrite("param_norm", &StepMetrics::param_norm)
      .def_readwrite("reward_mean_agg", &StepMetrics::reward_mean_agg)
      .def_readwrite("reward_mean_k", &StepMetrics::reward_mean_k)
      .def_readwrite("mean_abs_adv", &StepMetrics::mean_abs_adv)
      .def_readwrite("mean_abs_adv_k", &StepMetrics::mean_abs_adv_k)
      .def_readwrite("m_final", &StepMetrics::m_final)
      .def_readwrite("relegations", &StepMetrics::relegations)
      .def_readwrite("degenerate_entries", &StepMetrics::degenerate_entries)
      .def_readwrite("response_len_mean", &StepMetrics::response_len_mean)
      .def_readwrite("active_dims", &StepMetrics::active_dims)
      .def("all_finite", &StepMetrics::all_finite);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("policy", &TrainConfig::policy)
      .def_readwrite("algo", &TrainConfig::algo)
      .def_readwrite("tasks", &TrainConfig::tasks)
      .def_readwrite("preset", &TrainConfig::preset)
      .def_readwrite("switch_step", &TrainConfig::switch_step)
      .def_readwrite("group_size", &TrainConfig::group_size)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("inner_updates", &TrainConfig::inner_updates)
      .def_readwrite("init_scale", &TrainConfig::init_scale)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("threads", &TrainConfig::threads)
      .def("validate", &TrainConfig::validate);

  py::class_<TrainResult>(m, "TrainResult")
      .def(py::init<>())
      .def_readwrite("params", &TrainResult::params)
      .def_readwrite("history", &TrainResult::history);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("parameterization", &ExperimentConfig::parameterization)
      .def_readwrite("init_scale", &ExperimentConfig::init_scale)
      .def_readwrite("env", &ExperimentConfig::env)
      .def_readwrite("algo", &ExperimentConfig::algo)
      .def_readwrite("name", &ExperimentConfig::name)
      .def_readwrite("preset", &ExperimentConfig::preset)
      .def_readwrite("switch_step", &ExperimentConfig::switch_step)
      .def_readwrite("group_size", &ExperimentConfig::group_size)
      .def_readwrite("steps", &ExperimentConfig::steps)
      .def_readwrite("lr", &ExperimentConfig::lr)
      .def_readwrite("inner_updates", &ExperimentConfig::inner_updates)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("threads", &ExperimentConfig::threads)
      .def("validate", &ExperimentConfig::validate)
      .def("to_train_config", &ExperimentConfig::to_train_config);

  py::class_<RunPaths>(m, "RunPaths")
      .def(py::init<>())
      .def_readonly("dir", &RunPaths::dir)
      .def_readonly("metrics_csv", &RunPaths::metrics_csv)
      .def_readonly("advantage_csv", &RunPaths::advantage_csv)
      .def_readonly("partition_log", &RunPaths::partition_log)
      .def_readonly("config_txt", &RunPaths::config_txt)
      .def_readonly("summary_txt", &RunPaths::summary_txt);

  py::class_<RunResult>(m, "RunResult")
      .def(py::init<>())
      .def_readonly("paths", &RunResult::paths)
      .def_readonly("train", &RunResult::train)
      .def_readonly("suite_digest", &RunResult::suite_digest);

  py::class_<CompareResult>(m, "CompareResult")
      .def(py::init<>())
      .def_readonly("csv_path", &CompareResult::csv_path)
      .def_readonly("table", &CompareResult::table)
      .def_readonly("runs", &CompareResult::runs);

  // seeds and policies
  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("a"), py::arg("b") = 0,
        py::arg("c") = 0);
  m.def("init_policy", &init_policy, py::arg("spec"), py::arg("seed"),
        py::arg("init_scale") = 1.0);
  m.def("token_logits", &token_logits);
  m.def("next_token_log_probs", &next_token_log_probs);
  m.def("log_prob", &log_prob);
  m.def("grad_log_prob", &grad_log_prob);
  m.def("sample_rollouts", &sample_rollouts, py::arg("params"), py::arg("question"),
        py::arg("num_rollouts"), py::arg("seed"));

  // task suites
  m.def("make_task_suite", &make_task_suite);
  m.def("evaluate_rewards", &evaluate_rewards);
  m.def("serialize_suite", &serialize_suite);
  m.def("parse_suite", &parse_suite);
  m.def("suite_hash", &suite_hash);

  // advantages
  m.def("group_stats", &group_stats, py::arg("values"), py::arg("mode") = StdMode::Sample);
  m.def("standardize", &standardize);
  m.def("scalarize", &scalarize);
  m.def("question_scalar_advantages", &question_scalar_advantages, py::arg("rollouts"),
        py::arg("weights") = std::vector<double>{}, py::arg("mode") = StdMode::Sample);
  m.def("question_per_dim_advantages", &question_per_dim_advantages, py::arg("rollouts"),
        py::arg("mode") = StdMode::Sample);
  m.def("partition_scalar_advantages", &partition_scalar_advantages, py::arg("rollouts"),
        py::arg("assignment"), py::arg("weights") = std::vector<double>{},
        py::arg("mode") = StdMode::Sample);
  m.def("partition_per_dim_advantages", &partition_per_dim_advantages, py::arg("rollouts"),
        py::arg("assignment"), py::arg("mode") = StdMode::Sample);

  // partition validation
  m.def("assign_initial_partitions", &assign_initial_partitions);
  m.def("detect_outliers", &detect_outliers);
  m.def("relegate", &relegate);
  m.def("validate_partitions", &validate_partitions);
  m.def("partition_groups", &partition_groups);
  m.def("partition_audit_text", &partition_audit_text);

  // objective and training
  m.def("preset_active_dims", &preset_active_dims);
  m.def("build_batch", &build_batch, py::arg("params"), py::arg("tasks"), py::arg("group_size"),
        py::arg("seed"), py::arg("active_dims") = std::vector<int>{});
  m.def("clipped_term", &clipped_term);
  m.def("build_objective_terms", &build_objective_terms);
  m.def("evaluate_surrogate", &evaluate_surrogate, py::arg("params"), py::arg("batch"),
        py::arg("terms"), py::arg("epsilon"), py::arg("want_grad"), py::arg("threads") = 1);
  m.def("kl_grid_value", &kl_grid_value);
  m.def("kl_grid_value_and_grad", [](const PolicyParams& now, const PolicyParams& ref) {
    std::vector<double> grad;
    const double value = kl_grid_value_and_grad(now, ref, grad);
    return py::make_tuple(value, grad);
  });
  m.def("run_training", [](const TrainConfig& cfg) { return run_training(cfg); });

  // experiment runner and configs
  m.def("parse_config", &parse_config);
  m.def("load_config_file", &load_config_file);
  m.def("serialize_config", &serialize_config);
  m.def("apply_override", &apply_override);
  m.def("resolve_out_root", &resolve_out_root);
  m.def("run_experiment", &run_experiment, py::arg("cfg"), py::arg("out_root") = std::string{});
  m.def("compare_variants", &compare_variants, py::arg("cfgs"),
        py::arg("out_root") = std::string{});

  // independent oracles
  m.def("finite_diff_gradient", &oracle::finite_diff_gradient, py::arg("f"), py::arg("at"),
        py::arg("h") = 1e-5);
  m.def("enumerate_expectation", &oracle::enumerate_expectation);
  m.def("reference_advantages", &oracle::reference_advantages, py::arg("rollouts"),
        py::arg("assignment"), py::arg("per_dim"),
        py::arg("weights") = std::vector<double>{});
}
