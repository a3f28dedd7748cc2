#include "prpolab/advantage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "prpolab/error.hpp"

namespace prpolab {

namespace {

// spread below this (relative to the mean's magnitude) counts as zero
constexpr double kDegenerateRel = 1e-12;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string GroupKey::to_string() const {
  switch (level) {
    case GroupLevel::Question: return "question:" + std::to_string(id);
    case GroupLevel::Capability: return "capability:" + std::to_string(id);
    case GroupLevel::Batch: return "batch:" + std::to_string(id);
    case GroupLevel::RolloutSingleton: return "rollout:" + std::to_string(id);
  }
  throw InvariantError("unreachable group level");
}

GroupKey group_key_from_string(const std::string& text) {
  const size_t colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("bad group key '" + text + "'");
  const std::string name = text.substr(0, colon);
  GroupKey key;
  if (name == "question")
    key.level = GroupLevel::Question;
  else if (name == "capability")
    key.level = GroupLevel::Capability;
  else if (name == "batch")
    key.level = GroupLevel::Batch;
  else if (name == "rollout")
    key.level = GroupLevel::RolloutSingleton;
  else
    throw ConfigError("bad group key level '" + name + "'");
  key.id = std::stoull(text.substr(colon + 1));
  return key;
}

std::string to_string(AdvScheme s) {
  switch (s) {
    case AdvScheme::QuestionScalar: return "question-scalar";
    case AdvScheme::QuestionPerDim: return "question-per-dim";
    case AdvScheme::PartitionScalar: return "partition-scalar";
    case AdvScheme::PartitionPerDim: return "partition-per-dim";
  }
  throw InvariantError("unreachable advantage scheme");
}

GroupStats group_stats(const std::vector<double>& values, StdMode mode) {
  GroupStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.degenerate = true;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  if (s.count < 2) {
    s.degenerate = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    ss += d * d;
  }
  const int denom = mode == StdMode::Sample ? s.count - 1 : s.count;
  s.stddev = std::sqrt(ss / denom);
  s.degenerate = s.stddev <= kDegenerateRel * std::max(1.0, std::fabs(s.mean));
  return s;
}

double standardize(double value, const GroupStats& stats) {
  if (stats.degenerate) return 0.0;
  return (value - stats.mean) / stats.stddev;
}

double scalarize(const std::vector<double>& rewards, const std::vector<double>& weights) {
  if (weights.empty()) {
    double sum = 0.0;
    for (double r : rewards) sum += r;
    return sum;
  }
  if (weights.size() != rewards.size())
    throw InvariantError("scalarize: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(rewards.size()) + " reward dimensions");
  double sum = 0.0;
  for (size_t k = 0; k < rewards.size(); ++k) sum += weights[k] * rewards[k];
  return sum;
}

double AdvantageTable::advantage(uint64_t rollout_uid, int dim) const {
  return entry(rollout_uid, dim).value;
}

const AdvEntry& AdvantageTable::entry(uint64_t rollout_uid, int dim) const {
  auto it = entries.find({rollout_uid, dim});
  if (it == entries.end())
    throw InvariantError("no advantage entry for rollout " + std::to_string(rollout_uid) +
                         " dim " + std::to_string(dim));
  return it->second;
}

std::string AdvantageTable::to_csv(const std::vector<Rollout>& rollouts) const {
  std::map<uint64_t, const Rollout*> by_uid;
  for (const Rollout& r : rollouts) by_uid[r.rollout_uid] = &r;

  std::ostringstream out;
  out << "rollout_uid,question_id,capability_uid,dim,reward,cell,cell_count,cell_mean,"
         "cell_stddev,advantage,degenerate\n";
  for (const auto& [key, e] : entries) {
    auto rit = by_uid.find(key.first);
    if (rit == by_uid.end())
      throw InvariantError("advantage table references unknown rollout " +
                           std::to_string(key.first));
    const Rollout& r = *rit->second;
    auto cit = cells.find({e.cell, key.second});
    if (cit == cells.end()) cit = cells.find({e.cell, 0});
    if (cit == cells.end())
      throw InvariantError("advantage table cell missing: " + e.cell.to_string());
    const GroupStats& st = cit->second;
    out << key.first << ',' << r.question_id << ',' << r.capability_uid << ',' << key.second
        << ',' << fmt(e.raw) << ',' << e.cell.to_string() << ',' << st.count << ','
        << fmt(st.mean) << ',' << fmt(st.stddev) << ',' << fmt(e.value) << ','
        << (e.degenerate ? 1 : 0) << '\n';
  }
  return out.str();
}

namespace {

int checked_num_dims(const std::vector<Rollout>& rollouts) {
  if (rollouts.empty()) throw InvariantError("advantage computation on empty batch");
  const int dims = static_cast<int>(rollouts.front().rewards.size());
  if (dims < 1) throw InvariantError("rollouts carry no reward dimensions");
  for (const Rollout& r : rollouts)
    if (static_cast<int>(r.rewards.size()) != dims)
      throw InvariantError("inconsistent reward dimension count in batch");
  return dims;
}

std::vector<const Rollout*> sorted_by_uid(const std::vector<Rollout>& rollouts) {
  std::vector<const Rollout*> order;
  order.reserve(rollouts.size());
  for (const Rollout& r : rollouts) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const Rollout* a, const Rollout* b) { return a->rollout_uid < b->rollout_uid; });
  for (size_t i = 1; i < order.size(); ++i)
    if (order[i - 1]->rollout_uid == order[i]->rollout_uid)
      throw InvariantError("duplicate rollout uid " + std::to_string(order[i]->rollout_uid));
  return order;
}

// One standardization pass shared by all four schemes. `value_of` selects the
// quantity to standardize for a given dim (scalar schemes use dim 0 only).
AdvantageTable build_table(const std::vector<Rollout>& rollouts, AdvScheme scheme,
                           const std::map<uint64_t, GroupKey>& assignment,
                           const std::vector<double>& weights, StdMode mode, bool per_dim) {
  const int reward_dims = checked_num_dims(rollouts);
  const int dims = per_dim ? reward_dims : 1;
  const std::vector<const Rollout*> order = sorted_by_uid(rollouts);

  auto value_of = [&](const Rollout& r, int dim) {
    return per_dim ? r.rewards[static_cast<size_t>(dim)] : scalarize(r.rewards, weights);
  };

  AdvantageTable table;
  table.scheme = scheme;
  table.num_dims = dims;
  table.std_mode = mode;

  // question-level values, always collected: they back the singleton fallback
  std::map<std::pair<uint64_t, int>, std::vector<double>> question_values;
  std::map<std::pair<GroupKey, int>, std::vector<std::pair<uint64_t, double>>> cell_values;
  for (const Rollout* r : order) {
    auto ait = assignment.find(r->rollout_uid);
    if (ait == assignment.end())
      throw InvariantError("rollout " + std::to_string(r->rollout_uid) +
                           " has no partition assignment");
    for (int d = 0; d < dims; ++d) {
      const double v = value_of(*r, d);
      question_values[{static_cast<uint64_t>(r->question_id), d}].push_back(v);
      cell_values[{ait->second, d}].push_back({r->rollout_uid, v});
    }
  }

  std::map<std::pair<uint64_t, int>, GroupStats> question_stats;
  for (const auto& [qk, vals] : question_values) question_stats[qk] = group_stats(vals, mode);

  std::map<uint64_t, const Rollout*> by_uid;
  for (const Rollout* r : order) by_uid[r->rollout_uid] = r;

  for (const auto& [cell_key, members] : cell_values) {
    const GroupKey& cell = cell_key.first;
    const int d = cell_key.second;
    if (cell.level == GroupLevel::RolloutSingleton) {
      if (members.size() != 1)
        throw InvariantError("singleton cell " + cell.to_string() + " holds " +
                             std::to_string(members.size()) + " rollouts");
      const auto& [uid, v] = members.front();
      GroupStats st;
      st.mean = v;
      st.count = 1;
      st.degenerate = true;
      table.cells[{cell, d}] = st;
      const Rollout& r = *by_uid.at(uid);
      const GroupStats& qst = question_stats.at({static_cast<uint64_t>(r.question_id), d});
      AdvEntry e;
      e.raw = v;
      e.value = standardize(v, qst);
      e.degenerate = qst.degenerate;
      e.cell = cell;
      table.entries[{uid, d}] = e;
      continue;
    }
    std::vector<double> vals;
    vals.reserve(members.size());
    for (const auto& [uid, v] : members) vals.push_back(v);
    const GroupStats st = group_stats(vals, mode);
    table.cells[{cell, d}] = st;
    for (const auto& [uid, v] : members) {
      AdvEntry e;
      e.raw = v;
      e.value = standardize(v, st);
      e.degenerate = st.degenerate;
      e.cell = cell;
      table.entries[{uid, d}] = e;
    }
  }
  return table;
}

std::map<uint64_t, GroupKey> question_assignment(const std::vector<Rollout>& rollouts) {
  std::map<uint64_t, GroupKey> assignment;
  for (const Rollout& r : rollouts)
    assignment[r.rollout_uid] =
        GroupKey{GroupLevel::Question, static_cast<uint64_t>(r.question_id)};
  return assignment;
}

}  // namespace

AdvantageTable question_scalar_advantages(const std::vector<Rollout>& rollouts,
                                          const std::vector<double>& weights, StdMode mode) {
  return build_table(rollouts, AdvScheme::QuestionScalar, question_assignment(rollouts), weights,
                     mode, false);
}

AdvantageTable question_per_dim_advantages(const std::vector<Rollout>& rollouts, StdMode mode) {
  return build_table(rollouts, AdvScheme::QuestionPerDim, question_assignment(rollouts), {}, mode,
                     true);
}

AdvantageTable partition_scalar_advantages(const std::vector<Rollout>& rollouts,
                                           const std::map<uint64_t, GroupKey>& assignment,
                                           const std::vector<double>& weights, StdMode mode) {
  return build_table(rollouts, AdvScheme::PartitionScalar, assignment, weights, mode, false);
}

AdvantageTable partition_per_dim_advantages(const std::vector<Rollout>& rollouts,
                                            const std::map<uint64_t, GroupKey>& assignment,
                                            StdMode mode) {
  return build_table(rollouts, AdvScheme::PartitionPerDim, assignment, {}, mode, true);
}

}  // namespace prpolab
