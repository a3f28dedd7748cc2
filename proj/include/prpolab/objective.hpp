#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prpolab/advantage.hpp"
#include "prpolab/envs.hpp"
#include "prpolab/partition.hpp"
#include "prpolab/policy.hpp"

namespace prpolab {

enum class AlgoKind { Grpo, RewardPrpo, DataPrpo, Prpo };

std::string to_string(AlgoKind k);
AlgoKind algo_kind_from_string(const std::string& s);

struct AlgoVariant {
  AlgoKind kind = AlgoKind::Grpo;
  double epsilon = 0.2;   // clip half-width
  double kl_coeff = 0.0;  // 0 disables the reference penalty
  std::vector<double> lambda_k;  // per-dimension weights; empty = uniform / plain sum
  std::vector<double> lambda_m;  // per-partition weights; empty = uniform over final groups
  PartitionConfig partition;     // pooling mode, tau, round budget, outlier rule

  void validate() const;
};

// Which reward dimensions feed training. Staged presets flip at switch_step.
// Even dimensions carry the correctness-style signal, odd ones the
// surface-form signal, so masks select by index parity.
enum class RewardPreset { Base, AccuracyOnly, FormatOnly, AccuracyThenFormat, FormatThenAccuracy };

std::string to_string(RewardPreset p);
RewardPreset reward_preset_from_string(const std::string& s);

std::vector<int> preset_active_dims(RewardPreset p, int step, int switch_step, int num_dims);

struct GroupBatch {
  std::vector<Rollout> rollouts;  // uid-sorted
  int num_dims = 1;               // reward dims the rollouts carry (post-mask)
  std::vector<int> active_dims;   // original dim indices backing those rewards
};

// sample group_size rollouts per task and attach (optionally masked) rewards
GroupBatch build_batch(const PolicyParams& params, const std::vector<Task>& tasks,
                       int group_size, uint64_t seed, const std::vector<int>& active_dims = {});

// min(r*A, clip(r, 1-eps, 1+eps)*A)
double clipped_term(double ratio, double advantage, double epsilon);

// one weighted (rollout, dim) contribution to the objective
struct ObjectiveTerm {
  uint64_t uid = 0;
  int dim = 0;
  double weight = 0.0;
  double advantage = 0.0;
};

struct TermBuild {
  std::vector<ObjectiveTerm> terms;
  AdvantageTable table;
  PartitionState pstate;        // populated for partition-based variants
  bool has_partitions = false;
  int m_final = 0;              // groups backing the table (dim-0 cells)
};

TermBuild build_objective_terms(const AlgoVariant& variant, const GroupBatch& batch);

struct SurrogateEval {
  double value = 0.0;
  std::vector<double> grad;     // filled only when requested
  double clip_fraction = 0.0;   // share of (term, token) pairs where the clip binds
};

// Clipped-surrogate value and (optionally) its gradient. The reduction order
// is fixed by uid-sorted chunks, so any thread count gives identical bits.
SurrogateEval evaluate_surrogate(const PolicyParams& params, const GroupBatch& batch,
                                 const std::vector<ObjectiveTerm>& terms, double epsilon,
                                 bool want_grad, int threads = 1);

// mean over the (context, position) grid of KL(ref || now), closed form
double kl_grid_value(const PolicyParams& now, const PolicyParams& ref);
double kl_grid_value_and_grad(const PolicyParams& now, const PolicyParams& ref,
                              std::vector<double>& grad);

struct StepMetrics {
  int step = 0;
  double objective_value = 0.0;  // surrogate - kl_coeff * kl
  double surrogate = 0.0;
  double kl_value = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double param_norm = 0.0;
  double reward_mean_agg = 0.0;          // mean unweighted-sum reward, all dims
  std::vector<double> reward_mean_k;     // per-dimension means, all dims
  double mean_abs_adv = 0.0;
  std::vector<double> mean_abs_adv_k;    // per active dimension
  int m_final = 0;
  int relegations = 0;                   // rollouts standing alone this step
  int degenerate_entries = 0;
  double response_len_mean = 0.0;
  std::vector<int> active_dims;

  bool all_finite() const;
};

struct TrainConfig {
  PolicySpec policy;
  AlgoVariant algo;
  std::vector<Task> tasks;
  RewardPreset preset = RewardPreset::Base;
  int switch_step = -1;  // -1 = halfway, for the staged presets
  int group_size = 8;
  int steps = 200;
  double lr = 0.1;
  int inner_updates = 1;  // surrogate ascent steps per sampled batch
  double init_scale = 0.1;
  uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct StepOutcome {
  StepMetrics metrics;
  GroupBatch batch;
  AdvantageTable table;
  PartitionState pstate;
  bool has_partitions = false;
};

// sample a batch under `params`, build the variant's objective, ascend
StepOutcome train_step(PolicyParams& params, const TrainConfig& cfg, int step);

struct TrainResult {
  PolicyParams params;
  std::vector<StepMetrics> history;
};

using StepCallback = std::function<void(const StepOutcome&, const PolicyParams&)>;

TrainResult run_training(const TrainConfig& cfg, const StepCallback& on_step = nullptr);

}  // namespace prpolab
