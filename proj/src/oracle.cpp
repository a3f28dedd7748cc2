#include "prpolab/oracle.hpp"

#include <cmath>

#include "prpolab/error.hpp"

namespace prpolab::oracle {

std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& at,
    double h) {
  std::vector<double> grad(at.size());
  std::vector<double> point = at;
  for (size_t j = 0; j < at.size(); ++j) {
    point[j] = at[j] + h;
    const double up = f(point);
    point[j] = at[j] - h;
    const double down = f(point);
    point[j] = at[j];
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

double enumerate_expectation(const PolicyParams& params, int context,
                             const std::function<double(const TokenSequence&)>& f) {
  const PolicySpec& spec = params.spec;
  validate_context(spec, context);
  double combos = 1.0;
  for (int t = 0; t < spec.max_len; ++t) combos *= spec.vocab_size;
  if (combos > 1e6) throw InvariantError("sequence space too large to enumerate");

  std::vector<std::vector<double>> lp(spec.max_len);
  for (int t = 0; t < spec.max_len; ++t) lp[t] = next_token_log_probs(params, context, t);

  TokenSequence seq(spec.max_len, 0);
  double total = 0.0;
  while (true) {
    double logp = 0.0;
    for (int t = 0; t < spec.max_len; ++t) logp += lp[t][seq[t]];
    total += std::exp(logp) * f(seq);

    int t = spec.max_len - 1;
    while (t >= 0) {
      if (++seq[t] < spec.vocab_size) break;
      seq[t] = 0;
      --t;
    }
    if (t < 0) break;
  }
  return total;
}

std::map<std::pair<uint64_t, int>, double> reference_advantages(
    const std::vector<Rollout>& rollouts, const std::map<uint64_t, GroupKey>& assignment,
    bool per_dim, const std::vector<double>& weights) {
  const int dims = per_dim ? static_cast<int>(rollouts.front().rewards.size()) : 1;

  auto value_of = [&](const Rollout& r, int d) {
    if (per_dim) return r.rewards[static_cast<size_t>(d)];
    double s = 0.0;
    for (size_t k = 0; k < r.rewards.size(); ++k)
      s += (weights.empty() ? 1.0 : weights[k]) * r.rewards[k];
    return s;
  };

  // mean/stddev of the named pool, one pass per request (slow on purpose)
  auto pool_stats = [&](const GroupKey& key, int d, bool by_question, uint64_t question,
                        double& mean, double& sd, int& count) {
    double sum = 0.0;
    count = 0;
    for (const Rollout& r : rollouts) {
      const bool in_pool = by_question
                               ? static_cast<uint64_t>(r.question_id) == question
                               : assignment.at(r.rollout_uid) == key;
      if (!in_pool) continue;
      sum += value_of(r, d);
      ++count;
    }
    mean = count > 0 ? sum / count : 0.0;
    double ss = 0.0;
    for (const Rollout& r : rollouts) {
      const bool in_pool = by_question
                               ? static_cast<uint64_t>(r.question_id) == question
                               : assignment.at(r.rollout_uid) == key;
      if (!in_pool) continue;
      const double d2 = value_of(r, d) - mean;
      ss += d2 * d2;
    }
    sd = count > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
  };

  std::map<std::pair<uint64_t, int>, double> out;
  for (const Rollout& r : rollouts) {
    const GroupKey key = assignment.at(r.rollout_uid);
    for (int d = 0; d < dims; ++d) {
      double mean = 0.0, sd = 0.0;
      int count = 0;
      if (key.level == GroupLevel::RolloutSingleton)
        pool_stats(key, d, true, static_cast<uint64_t>(r.question_id), mean, sd, count);
      else
        pool_stats(key, d, false, 0, mean, sd, count);
      const double v = value_of(r, d);
      double adv = 0.0;
      if (count >= 2 && sd > 1e-12 * std::max(1.0, std::fabs(mean))) adv = (v - mean) / sd;
      out[{r.rollout_uid, d}] = adv;
    }
  }
  return out;
}

}  // namespace prpolab::oracle
