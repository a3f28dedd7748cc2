#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prpolab/advantage.hpp"
#include "prpolab/policy.hpp"

namespace prpolab {

// How rollouts are pooled before standardization: by capability label, as one
// batch-wide pool, or by question (the latter matches plain per-question
// grouping and makes relegation a no-op refinement of it).
enum class PartitionMode { Capability, Global, Question };

std::string to_string(PartitionMode m);
PartitionMode partition_mode_from_string(const std::string& s);

enum class OutlierRule { Scalar, AnyDim };

std::string to_string(OutlierRule r);
OutlierRule outlier_rule_from_string(const std::string& s);

struct PartitionConfig {
  PartitionMode mode = PartitionMode::Capability;
  double tau = 3.0;  // infinity disables relegation entirely
  int max_iter = 5;
  OutlierRule outlier_rule = OutlierRule::Scalar;
  std::vector<double> weights;  // scalarization weights used during detection
  StdMode std_mode = StdMode::Sample;
};

struct RelegationEvent {
  int iteration = 0;       // 1-based round in which the rollout was split out
  uint64_t rollout_uid = 0;
  double advantage = 0.0;  // standardized value that tripped the threshold
  GroupKey from;
};

struct PartitionState {
  PartitionMode mode = PartitionMode::Capability;
  double tau = 3.0;
  int max_iter = 5;
  int iteration = 0;  // relegation rounds performed so far
  std::map<uint64_t, GroupKey> assignment;
  std::set<uint64_t> relegated;
  std::vector<std::vector<RelegationEvent>> history;  // one entry per round
  bool converged = false;
  bool exhausted = false;

  int num_partitions() const;  // distinct groups, singletons included
};

PartitionState assign_initial_partitions(const std::vector<Rollout>& rollouts,
                                         const PartitionConfig& cfg);

// uids whose |advantage| strictly exceeds tau; rollouts already standing alone
// are never re-flagged
std::vector<uint64_t> detect_outliers(const AdvantageTable& table, const PartitionState& state,
                                      double tau);

// move each listed rollout into its own singleton group; throws if one of them
// was split out before
void relegate(PartitionState& state, const std::vector<uint64_t>& outliers,
              const AdvantageTable& table);

struct ValidationResult {
  PartitionState state;
  AdvantageTable table;  // scalar advantages under the final assignment
};

// detect/relegate until no outlier remains or the round budget runs out
ValidationResult validate_partitions(const std::vector<Rollout>& rollouts,
                                     const PartitionConfig& cfg);

std::map<GroupKey, std::vector<uint64_t>> partition_groups(const PartitionState& state);

// human-readable trace of the rounds, suitable for an audit log
std::string partition_audit_text(const PartitionState& state);

}  // namespace prpolab
