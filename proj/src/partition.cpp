#include "prpolab/partition.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "prpolab/error.hpp"

namespace prpolab {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string to_string(PartitionMode m) {
  switch (m) {
    case PartitionMode::Capability: return "capability";
    case PartitionMode::Global: return "global";
    case PartitionMode::Question: return "question";
  }
  throw InvariantError("unreachable partition mode");
}

PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "capability") return PartitionMode::Capability;
  if (s == "global") return PartitionMode::Global;
  if (s == "question") return PartitionMode::Question;
  throw ConfigError("unknown partition mode '" + s + "'");
}

std::string to_string(OutlierRule r) {
  switch (r) {
    case OutlierRule::Scalar: return "scalar";
    case OutlierRule::AnyDim: return "any-dim";
  }
  throw InvariantError("unreachable outlier rule");
}

OutlierRule outlier_rule_from_string(const std::string& s) {
  if (s == "scalar") return OutlierRule::Scalar;
  if (s == "any-dim") return OutlierRule::AnyDim;
  throw ConfigError("unknown outlier rule '" + s + "'");
}

int PartitionState::num_partitions() const {
  std::set<GroupKey> keys;
  for (const auto& [uid, key] : assignment) keys.insert(key);
  return static_cast<int>(keys.size());
}

PartitionState assign_initial_partitions(const std::vector<Rollout>& rollouts,
                                         const PartitionConfig& cfg) {
  if (rollouts.empty()) throw InvariantError("partitioning an empty batch");
  if (!(cfg.tau > 0.0)) throw ConfigError("outlier threshold must be positive");
  if (cfg.max_iter < 0) throw ConfigError("validation round budget must be >= 0");

  PartitionState state;
  state.mode = cfg.mode;
  state.tau = cfg.tau;
  state.max_iter = cfg.max_iter;
  for (const Rollout& r : rollouts) {
    GroupKey key;
    switch (cfg.mode) {
      case PartitionMode::Capability:
        key = {GroupLevel::Capability, static_cast<uint64_t>(r.capability_uid)};
        break;
      case PartitionMode::Global:
        key = {GroupLevel::Batch, 0};
        break;
      case PartitionMode::Question:
        key = {GroupLevel::Question, static_cast<uint64_t>(r.question_id)};
        break;
    }
    state.assignment[r.rollout_uid] = key;
  }
  return state;
}

std::vector<uint64_t> detect_outliers(const AdvantageTable& table, const PartitionState& state,
                                      double tau) {
  std::vector<uint64_t> outliers;
  uint64_t last = 0;
  bool have_last = false;
  for (const auto& [key, e] : table.entries) {
    const uint64_t uid = key.first;
    if (have_last && uid == last) continue;  // entries are (uid, dim)-ordered
    auto ait = state.assignment.find(uid);
    if (ait == state.assignment.end())
      throw InvariantError("outlier scan hit unassigned rollout " + std::to_string(uid));
    if (ait->second.level == GroupLevel::RolloutSingleton) continue;
    bool hit = false;
    for (int d = 0; d < table.num_dims; ++d)
      if (std::fabs(table.advantage(uid, d)) > tau) {
        hit = true;
        break;
      }
    if (hit) {
      outliers.push_back(uid);
      last = uid;
      have_last = true;
    } else {
      last = uid;
      have_last = true;
    }
  }
  return outliers;
}

void relegate(PartitionState& state, const std::vector<uint64_t>& outliers,
              const AdvantageTable& table) {
  std::vector<RelegationEvent> round;
  for (uint64_t uid : outliers) {
    if (state.relegated.count(uid))
      throw InvariantError("rollout " + std::to_string(uid) + " flagged twice for relegation");
    auto ait = state.assignment.find(uid);
    if (ait == state.assignment.end())
      throw InvariantError("relegating unassigned rollout " + std::to_string(uid));

    RelegationEvent ev;
    ev.iteration = state.iteration + 1;
    ev.rollout_uid = uid;
    ev.from = ait->second;
    // keep the most extreme value across dimensions for the audit trail
    double extreme = 0.0;
    for (int d = 0; d < table.num_dims; ++d) {
      const double a = table.advantage(uid, d);
      if (std::fabs(a) > std::fabs(extreme)) extreme = a;
    }
    ev.advantage = extreme;
    round.push_back(ev);

    ait->second = GroupKey{GroupLevel::RolloutSingleton, uid};
    state.relegated.insert(uid);
  }
  ++state.iteration;
  state.history.push_back(std::move(round));
}

ValidationResult validate_partitions(const std::vector<Rollout>& rollouts,
                                     const PartitionConfig& cfg) {
  PartitionState state = assign_initial_partitions(rollouts, cfg);
  auto detection_table = [&]() {
    return cfg.outlier_rule == OutlierRule::Scalar
               ? partition_scalar_advantages(rollouts, state.assignment, cfg.weights, cfg.std_mode)
               : partition_per_dim_advantages(rollouts, state.assignment, cfg.std_mode);
  };

  while (true) {
    const AdvantageTable table = detection_table();
    const std::vector<uint64_t> outliers = detect_outliers(table, state, cfg.tau);
    if (outliers.empty()) {
      state.converged = true;
      break;
    }
    if (state.iteration >= cfg.max_iter) {
      state.exhausted = true;
      break;
    }
    relegate(state, outliers, table);
  }

  ValidationResult result;
  result.table =
      partition_scalar_advantages(rollouts, state.assignment, cfg.weights, cfg.std_mode);
  result.state = std::move(state);
  return result;
}

std::map<GroupKey, std::vector<uint64_t>> partition_groups(const PartitionState& state) {
  std::map<GroupKey, std::vector<uint64_t>> groups;
  for (const auto& [uid, key] : state.assignment) groups[key].push_back(uid);
  return groups;
}

std::string partition_audit_text(const PartitionState& state) {
  std::ostringstream out;
  out << "mode=" << to_string(state.mode) << " tau=" << fmt(state.tau)
      << " max_iter=" << state.max_iter << '\n';
  for (size_t i = 0; i < state.history.size(); ++i) {
    out << "round " << (i + 1) << ": " << state.history[i].size() << " relegated\n";
    for (const RelegationEvent& ev : state.history[i])
      out << "  uid=" << ev.rollout_uid << " from=" << ev.from.to_string()
          << " advantage=" << fmt(ev.advantage) << '\n';
  }
  const char* status = state.converged ? "converged" : (state.exhausted ? "exhausted" : "pending");
  out << "status=" << status << " rounds=" << state.iteration
      << " partitions=" << state.num_partitions() << " relegated=" << state.relegated.size()
      << '\n';
  return out.str();
}

}  // namespace prpolab
