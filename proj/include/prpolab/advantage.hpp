#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prpolab/policy.hpp"

namespace prpolab {

// Grouping level used when standardizing rewards. Batch is the single pool
// holding every rollout; RolloutSingleton marks a rollout that was split out
// of its partition and now stands alone.
enum class GroupLevel { Question = 0, Capability = 1, Batch = 2, RolloutSingleton = 3 };

struct GroupKey {
  GroupLevel level = GroupLevel::Question;
  uint64_t id = 0;

  friend bool operator<(const GroupKey& a, const GroupKey& b) {
    if (a.level != b.level) return static_cast<int>(a.level) < static_cast<int>(b.level);
    return a.id < b.id;
  }
  friend bool operator==(const GroupKey& a, const GroupKey& b) {
    return a.level == b.level && a.id == b.id;
  }
  std::string to_string() const;
};

GroupKey group_key_from_string(const std::string& text);

enum class StdMode { Sample, Population };

struct GroupStats {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
  bool degenerate = false;
};

// mean and (by default) sample standard deviation; flags groups whose spread
// is numerically zero or with fewer than two members.
GroupStats group_stats(const std::vector<double>& values, StdMode mode = StdMode::Sample);

// (value - mean) / stddev, or exactly 0 for degenerate groups
double standardize(double value, const GroupStats& stats);

// weighted sum of reward dimensions; empty weights means plain sum
double scalarize(const std::vector<double>& rewards, const std::vector<double>& weights);

enum class AdvScheme { QuestionScalar, QuestionPerDim, PartitionScalar, PartitionPerDim };

std::string to_string(AdvScheme s);

struct AdvEntry {
  double value = 0.0;
  double raw = 0.0;       // reward the entry was standardized from
  bool degenerate = false;
  GroupKey cell;
};

struct AdvantageTable {
  AdvScheme scheme = AdvScheme::QuestionScalar;
  int num_dims = 1;  // entries per rollout (1 for scalar schemes)
  StdMode std_mode = StdMode::Sample;
  std::map<std::pair<uint64_t, int>, AdvEntry> entries;   // (rollout_uid, dim)
  std::map<std::pair<GroupKey, int>, GroupStats> cells;   // (group, dim)

  double advantage(uint64_t rollout_uid, int dim = 0) const;
  const AdvEntry& entry(uint64_t rollout_uid, int dim = 0) const;
  std::string to_csv(const std::vector<Rollout>& rollouts) const;
};

// Standardize the (weighted-sum) scalar reward within each question's group.
AdvantageTable question_scalar_advantages(const std::vector<Rollout>& rollouts,
                                          const std::vector<double>& weights = {},
                                          StdMode mode = StdMode::Sample);

// Standardize each reward dimension separately within each question's group.
AdvantageTable question_per_dim_advantages(const std::vector<Rollout>& rollouts,
                                           StdMode mode = StdMode::Sample);

// Standardize the scalar reward within caller-supplied partitions (statistics
// pooled across all member rollouts). Rollouts assigned a RolloutSingleton key
// fall back to their own question group's statistics and are recorded as
// one-member cells.
AdvantageTable partition_scalar_advantages(const std::vector<Rollout>& rollouts,
                                           const std::map<uint64_t, GroupKey>& assignment,
                                           const std::vector<double>& weights = {},
                                           StdMode mode = StdMode::Sample);

// Per-dimension variant of the above: one cell per (partition, dimension).
AdvantageTable partition_per_dim_advantages(const std::vector<Rollout>& rollouts,
                                            const std::map<uint64_t, GroupKey>& assignment,
                                            StdMode mode = StdMode::Sample);

}  // namespace prpolab
