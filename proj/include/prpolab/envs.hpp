#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prpolab/policy.hpp"

namespace prpolab {

// Per-dimension reward rules. Accuracy scores position matches against the
// task target; format penalizes a designated filler token; complement returns
// scale*(c - accuracy fraction) so that accuracy + complement is constant.
enum class RewardKind { Accuracy, Format, Complement };

struct RewardRule {
  RewardKind kind = RewardKind::Accuracy;
  double scale = 1.0;
  double complement_c = 1.0;  // Complement only
  int filler_token = 0;       // Format only

  double range_lo() const;
  double range_hi() const;
  std::string to_string() const;
  static RewardRule parse(const std::string& text);
};

struct Task {
  int question_id = 0;
  int capability_uid = 0;
  TokenSequence target;
  std::vector<RewardRule> reward_spec;  // K entries, identical K across a suite
};

enum class SuiteKind { Basic, Interference, ScaleConflict, Mixed };

std::string to_string(SuiteKind k);
SuiteKind suite_kind_from_string(const std::string& s);

struct SuiteConfig {
  SuiteKind kind = SuiteKind::Basic;
  std::vector<int> sizes;  // tasks per capability label; label m = index
  int vocab_size = 4;
  int max_len = 4;
  int dims = 2;
  uint64_t seed = 0;
  double complement_c = 1.0;   // interference: accuracy + complement == c
  double scale_factor = 100.0; // scale-conflict: high/low magnitude ratio
  int filler_token = 0;

  void validate() const;
};

// Deterministic synthetic task suite. Interference suites make the scalar sum
// of the two dimensions constant per construction; scale-conflict suites give
// capability labels geometrically increasing reward magnitudes up to
// scale_factor. question_id = suite index, also the policy context index.
std::vector<Task> make_task_suite(const SuiteConfig& config);

// Pure. K reward values for one sequence, each inside its declared range.
std::vector<double> evaluate_rewards(const Task& task, const TokenSequence& seq);

// Line-oriented text format, one task per line (see docs/formats.md).
std::string serialize_suite(const std::vector<Task>& tasks);
std::vector<Task> parse_suite(const std::string& text);

// FNV-1a of the serialized suite; stamped into comparison output.
uint64_t suite_hash(const std::vector<Task>& tasks);

}  // namespace prpolab
