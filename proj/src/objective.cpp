#include "prpolab/objective.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include "prpolab/error.hpp"
#include "prpolab/rng.hpp"

namespace prpolab {

std::string to_string(AlgoKind k) {
  switch (k) {
    case AlgoKind::Grpo: return "grpo";
    case AlgoKind::RewardPrpo: return "reward-prpo";
    case AlgoKind::DataPrpo: return "data-prpo";
    case AlgoKind::Prpo: return "prpo";
  }
  throw InvariantError("unreachable algo kind");
}

AlgoKind algo_kind_from_string(const std::string& s) {
  if (s == "grpo") return AlgoKind::Grpo;
  if (s == "reward-prpo") return AlgoKind::RewardPrpo;
  if (s == "data-prpo") return AlgoKind::DataPrpo;
  if (s == "prpo") return AlgoKind::Prpo;
  throw ConfigError("unknown algorithm '" + s + "'");
}

void AlgoVariant::validate() const {
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw ConfigError("clip width must lie in (0, 1)");
  if (kl_coeff < 0.0 || !std::isfinite(kl_coeff))
    throw ConfigError("kl coefficient must be >= 0");
  for (double w : lambda_k)
    if (!std::isfinite(w)) throw ConfigError("non-finite reward weight");
  for (double w : lambda_m)
    if (!std::isfinite(w)) throw ConfigError("non-finite partition weight");
  if (!(partition.tau > 0.0)) throw ConfigError("outlier threshold must be positive");
  if (partition.max_iter < 0) throw ConfigError("validation round budget must be >= 0");
}

std::string to_string(RewardPreset p) {
  switch (p) {
    case RewardPreset::Base: return "base";
    case RewardPreset::AccuracyOnly: return "accuracy-only";
    case RewardPreset::FormatOnly: return "format-only";
    case RewardPreset::AccuracyThenFormat: return "accuracy-then-format";
    case RewardPreset::FormatThenAccuracy: return "format-then-accuracy";
  }
  throw InvariantError("unreachable reward preset");
}

RewardPreset reward_preset_from_string(const std::string& s) {
  if (s == "base") return RewardPreset::Base;
  if (s == "accuracy-only") return RewardPreset::AccuracyOnly;
  if (s == "format-only") return RewardPreset::FormatOnly;
  if (s == "accuracy-then-format") return RewardPreset::AccuracyThenFormat;
  if (s == "format-then-accuracy") return RewardPreset::FormatThenAccuracy;
  throw ConfigError("unknown reward preset '" + s + "'");
}

std::vector<int> preset_active_dims(RewardPreset p, int step, int switch_step, int num_dims) {
  if (num_dims < 1) throw InvariantError("preset applied to zero reward dimensions");
  auto parity = [&](int rem) {
    std::vector<int> dims;
    for (int k = rem; k < num_dims; k += 2) dims.push_back(k);
    return dims;
  };
  std::vector<int> dims;
  switch (p) {
    case RewardPreset::Base:
      for (int k = 0; k < num_dims; ++k) dims.push_back(k);
      break;
    case RewardPreset::AccuracyOnly: dims = parity(0); break;
    case RewardPreset::FormatOnly: dims = parity(1); break;
    case RewardPreset::AccuracyThenFormat: dims = step < switch_step ? parity(0) : parity(1); break;
    case RewardPreset::FormatThenAccuracy: dims = step < switch_step ? parity(1) : parity(0); break;
  }
  if (dims.empty())
    throw ConfigError("preset " + to_string(p) + " leaves no active reward dimension (have " +
                      std::to_string(num_dims) + ")");
  return dims;
}

GroupBatch build_batch(const PolicyParams& params, const std::vector<Task>& tasks, int group_size,
                       uint64_t seed, const std::vector<int>& active_dims) {
  if (tasks.empty()) throw InvariantError("sampling a batch with no tasks");
  std::set<int> seen;
  for (const Task& t : tasks)
    if (!seen.insert(t.question_id).second)
      throw InvariantError("duplicate question id " + std::to_string(t.question_id));

  GroupBatch batch;
  for (const Task& task : tasks) {
    std::vector<Rollout> group = sample_rollouts(params, task.question_id, group_size, seed);
    for (Rollout& r : group) {
      r.capability_uid = task.capability_uid;
      const std::vector<double> full = evaluate_rewards(task, r.tokens);
      if (active_dims.empty()) {
        r.rewards = full;
      } else {
        r.rewards.clear();
        for (int k : active_dims) {
          if (k < 0 || k >= static_cast<int>(full.size()))
            throw InvariantError("active dimension " + std::to_string(k) + " out of range");
          r.rewards.push_back(full[k]);
        }
      }
      batch.rollouts.push_back(std::move(r));
    }
  }
  std::sort(batch.rollouts.begin(), batch.rollouts.end(),
            [](const Rollout& a, const Rollout& b) { return a.rollout_uid < b.rollout_uid; });
  batch.num_dims = static_cast<int>(batch.rollouts.front().rewards.size());
  if (active_dims.empty()) {
    for (int k = 0; k < batch.num_dims; ++k) batch.active_dims.push_back(k);
  } else {
    batch.active_dims = active_dims;
  }
  return batch;
}

double clipped_term(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

std::vector<double> resolve_dim_weights(const AlgoVariant& variant, int num_dims) {
  if (variant.lambda_k.empty())
    return std::vector<double>(num_dims, 1.0 / num_dims);
  if (static_cast<int>(variant.lambda_k.size()) != num_dims)
    throw ConfigError("lambda_k has " + std::to_string(variant.lambda_k.size()) +
                      " entries for " + std::to_string(num_dims) + " reward dimensions");
  return variant.lambda_k;
}

std::vector<double> resolve_group_weights(const AlgoVariant& variant, int num_groups) {
  if (variant.lambda_m.empty())
    return std::vector<double>(num_groups, 1.0 / num_groups);
  if (static_cast<int>(variant.lambda_m.size()) != num_groups)
    throw ConfigError("lambda_m has " + std::to_string(variant.lambda_m.size()) +
                      " entries for " + std::to_string(num_groups) + " final groups");
  return variant.lambda_m;
}

int count_dim0_cells(const AdvantageTable& table) {
  int n = 0;
  for (const auto& [key, st] : table.cells)
    if (key.second == 0) ++n;
  return n;
}

}  // namespace

TermBuild build_objective_terms(const AlgoVariant& variant, const GroupBatch& batch) {
  variant.validate();
  if (!variant.lambda_k.empty() &&
      static_cast<int>(variant.lambda_k.size()) != batch.num_dims)
    throw ConfigError("lambda_k has " + std::to_string(variant.lambda_k.size()) +
                      " entries for " + std::to_string(batch.num_dims) + " reward dimensions");

  const std::vector<Rollout>& rollouts = batch.rollouts;
  std::map<uint64_t, int> group_size;  // question -> member count
  for (const Rollout& r : rollouts) ++group_size[static_cast<uint64_t>(r.question_id)];
  const double num_questions = static_cast<double>(group_size.size());

  TermBuild tb;
  switch (variant.kind) {
    case AlgoKind::Grpo: {
      tb.table = question_scalar_advantages(rollouts, variant.lambda_k);
      for (const Rollout& r : rollouts) {
        const double w =
            1.0 / (num_questions * group_size.at(static_cast<uint64_t>(r.question_id)));
        tb.terms.push_back({r.rollout_uid, 0, w, tb.table.advantage(r.rollout_uid, 0)});
      }
      tb.m_final = count_dim0_cells(tb.table);
      break;
    }
    case AlgoKind::RewardPrpo: {
      tb.table = question_per_dim_advantages(rollouts);
      const std::vector<double> lk = resolve_dim_weights(variant, batch.num_dims);
      for (const Rollout& r : rollouts) {
        const double base =
            1.0 / (num_questions * group_size.at(static_cast<uint64_t>(r.question_id)));
        for (int k = 0; k < batch.num_dims; ++k)
          tb.terms.push_back(
              {r.rollout_uid, k, lk[k] * base, tb.table.advantage(r.rollout_uid, k)});
      }
      tb.m_final = count_dim0_cells(tb.table);
      break;
    }
    case AlgoKind::DataPrpo:
    case AlgoKind::Prpo: {
      PartitionConfig pcfg = variant.partition;
      pcfg.weights = variant.lambda_k;
      if (variant.kind == AlgoKind::DataPrpo) pcfg.outlier_rule = OutlierRule::Scalar;
      ValidationResult vr = validate_partitions(rollouts, pcfg);
      tb.pstate = vr.state;
      tb.has_partitions = true;
      const std::map<GroupKey, std::vector<uint64_t>> groups = partition_groups(tb.pstate);
      const std::vector<double> lm =
          resolve_group_weights(variant, static_cast<int>(groups.size()));

      if (variant.kind == AlgoKind::DataPrpo) {
        tb.table = std::move(vr.table);
        int m = 0;
        for (const auto& [key, uids] : groups) {
          const double w = lm[m] / static_cast<double>(uids.size());
          for (uint64_t uid : uids)
            tb.terms.push_back({uid, 0, w, tb.table.advantage(uid, 0)});
          ++m;
        }
      } else {
        tb.table = partition_per_dim_advantages(rollouts, tb.pstate.assignment);
        const std::vector<double> lk = resolve_dim_weights(variant, batch.num_dims);
        int m = 0;
        for (const auto& [key, uids] : groups) {
          const double base = lm[m] / static_cast<double>(uids.size());
          for (uint64_t uid : uids)
            for (int k = 0; k < batch.num_dims; ++k)
              tb.terms.push_back({uid, k, lk[k] * base, tb.table.advantage(uid, k)});
          ++m;
        }
      }
      tb.m_final = tb.pstate.num_partitions();
      break;
    }
  }
  return tb;
}

namespace {

struct ChunkPartial {
  double value = 0.0;
  long clip_events = 0;
  long pairs = 0;
  std::vector<double> grad;
};

struct RolloutTerms {
  const Rollout* rollout = nullptr;
  std::vector<const ObjectiveTerm*> terms;
};

constexpr size_t kChunkRollouts = 32;

void eval_chunk(const PolicyParams& params, const std::vector<RolloutTerms>& items, size_t begin,
                size_t end, double epsilon, bool want_grad, ChunkPartial& out) {
  if (want_grad) out.grad.assign(params.spec.param_count(), 0.0);
  const double lo = 1.0 - epsilon;
  const double hi = 1.0 + epsilon;

  for (size_t i = begin; i < end; ++i) {
    const Rollout& r = *items[i].rollout;
    const int len = static_cast<int>(r.tokens.size());
    const double inv_len = 1.0 / len;

    std::vector<std::vector<double>> lp(len);
    std::vector<double> ratio(len);
    for (int t = 0; t < len; ++t) {
      lp[t] = next_token_log_probs(params, r.question_id, t);
      ratio[t] = std::exp(lp[t][r.tokens[t]] - r.old_logps[t]);
    }

    std::vector<double> coeff(len, 0.0);
    for (const ObjectiveTerm* term : items[i].terms) {
      const double a = term->advantage;
      const double w = term->weight;
      for (int t = 0; t < len; ++t) {
        const double rt = ratio[t];
        const double unclipped = rt * a;
        const double clipped = std::clamp(rt, lo, hi) * a;
        out.value += w * inv_len * std::min(unclipped, clipped);
        ++out.pairs;
        if (unclipped > clipped) ++out.clip_events;
        if (!want_grad) continue;
        // gradient flows through the ratio only while the clip is slack; an
        // exact tie on the clip boundary counts as clipped
        const bool active =
            unclipped < clipped || (unclipped == clipped && lo < rt && rt < hi);
        if (active) coeff[t] += w * inv_len * a * rt;
      }
    }
    if (!want_grad) continue;
    std::vector<double> dlogits(params.spec.vocab_size);
    for (int t = 0; t < len; ++t) {
      if (coeff[t] == 0.0) continue;
      for (int v = 0; v < params.spec.vocab_size; ++v) {
        const double indicator = (v == r.tokens[t]) ? 1.0 : 0.0;
        dlogits[v] = coeff[t] * (indicator - std::exp(lp[t][v]));
      }
      add_logit_grad(params, r.question_id, t, dlogits, out.grad);
    }
  }
}

}  // namespace

SurrogateEval evaluate_surrogate(const PolicyParams& params, const GroupBatch& batch,
                                 const std::vector<ObjectiveTerm>& terms, double epsilon,
                                 bool want_grad, int threads) {
  if (threads < 1) throw ConfigError("thread count must be >= 1");

  std::map<uint64_t, RolloutTerms> by_uid;
  for (const Rollout& r : batch.rollouts) by_uid[r.rollout_uid].rollout = &r;
  for (const ObjectiveTerm& t : terms) {
    auto it = by_uid.find(t.uid);
    if (it == by_uid.end())
      throw InvariantError("objective term references unknown rollout " + std::to_string(t.uid));
    it->second.terms.push_back(&t);
  }
  std::vector<RolloutTerms> items;
  items.reserve(by_uid.size());
  for (auto& [uid, rt] : by_uid) items.push_back(std::move(rt));

  const size_t num_chunks = (items.size() + kChunkRollouts - 1) / kChunkRollouts;
  std::vector<ChunkPartial> partials(num_chunks);

  auto run_chunk = [&](size_t c) {
    const size_t begin = c * kChunkRollouts;
    const size_t end = std::min(items.size(), begin + kChunkRollouts);
    eval_chunk(params, items, begin, end, epsilon, want_grad, partials[c]);
  };

  if (threads == 1 || num_chunks <= 1) {
    for (size_t c = 0; c < num_chunks; ++c) run_chunk(c);
  } else {
    std::atomic<size_t> next{0};
    const size_t workers = std::min<size_t>(threads, num_chunks);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (size_t c = next.fetch_add(1); c < num_chunks; c = next.fetch_add(1)) run_chunk(c);
      });
    for (std::thread& t : pool) t.join();
  }

  // fixed chunk-order reduction keeps results independent of the thread count
  SurrogateEval eval;
  if (want_grad) eval.grad.assign(params.spec.param_count(), 0.0);
  long clip_events = 0, pairs = 0;
  for (size_t c = 0; c < num_chunks; ++c) {
    eval.value += partials[c].value;
    clip_events += partials[c].clip_events;
    pairs += partials[c].pairs;
    if (want_grad)
      for (size_t j = 0; j < eval.grad.size(); ++j) eval.grad[j] += partials[c].grad[j];
  }
  eval.clip_fraction = pairs > 0 ? static_cast<double>(clip_events) / pairs : 0.0;
  return eval;
}

double kl_grid_value(const PolicyParams& now, const PolicyParams& ref) {
  std::vector<double> scratch;
  return kl_grid_value_and_grad(now, ref, scratch);
}

double kl_grid_value_and_grad(const PolicyParams& now, const PolicyParams& ref,
                              std::vector<double>& grad) {
  if (!(now.spec == ref.spec)) throw InvariantError("kl across mismatched policy shapes");
  const PolicySpec& spec = now.spec;
  grad.assign(spec.param_count(), 0.0);
  const double slots = static_cast<double>(spec.num_contexts) * spec.max_len;
  double total = 0.0;
  std::vector<double> dlogits(spec.vocab_size);
  for (int c = 0; c < spec.num_contexts; ++c) {
    for (int t = 0; t < spec.max_len; ++t) {
      const std::vector<double> lp_now = next_token_log_probs(now, c, t);
      const std::vector<double> lp_ref = next_token_log_probs(ref, c, t);
      for (int v = 0; v < spec.vocab_size; ++v) {
        const double q = std::exp(lp_ref[v]);
        total += q * (lp_ref[v] - lp_now[v]);
        dlogits[v] = (std::exp(lp_now[v]) - q) / slots;
      }
      add_logit_grad(now, c, t, dlogits, grad);
    }
  }
  return total / slots;
}

bool StepMetrics::all_finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  if (!(ok(objective_value) && ok(surrogate) && ok(kl_value) && ok(clip_fraction) &&
        ok(grad_norm) && ok(param_norm) && ok(reward_mean_agg) && ok(mean_abs_adv) &&
        ok(response_len_mean)))
    return false;
  for (double v : reward_mean_k)
    if (!ok(v)) return false;
  for (double v : mean_abs_adv_k)
    if (!ok(v)) return false;
  return true;
}

void TrainConfig::validate() const {
  policy.validate();
  algo.validate();
  if (tasks.empty()) throw ConfigError("no tasks configured");
  const size_t dims = tasks.front().reward_spec.size();
  for (const Task& t : tasks) {
    if (t.reward_spec.size() != dims)
      throw ConfigError("tasks disagree on reward dimension count");
    if (static_cast<int>(t.target.size()) != policy.max_len)
      throw ConfigError("task " + std::to_string(t.question_id) + " target length " +
                        std::to_string(t.target.size()) + " != policy max_len " +
                        std::to_string(policy.max_len));
    for (int tok : t.target)
      if (tok < 0 || tok >= policy.vocab_size)
        throw ConfigError("task " + std::to_string(t.question_id) +
                          " target token outside policy vocabulary");
    if (t.question_id < 0 || t.question_id >= policy.num_contexts)
      throw ConfigError("task " + std::to_string(t.question_id) +
                        " has no policy context (num_contexts = " +
                        std::to_string(policy.num_contexts) + ")");
  }
  if (group_size < 2) throw ConfigError("group size must be >= 2");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (inner_updates < 1) throw ConfigError("inner updates must be >= 1");
  if (!(init_scale >= 0.0)) throw ConfigError("init scale must be >= 0");
  if (threads < 1) throw ConfigError("thread count must be >= 1");
  const int sw = switch_step < 0 ? steps / 2 : switch_step;
  if (sw < 0 || sw > steps) throw ConfigError("switch step outside [0, steps]");
  // fail fast if the preset would strip every dimension in either phase
  preset_active_dims(preset, 0, sw, static_cast<int>(dims));
  preset_active_dims(preset, steps - 1, sw, static_cast<int>(dims));
}

StepOutcome train_step(PolicyParams& params, const TrainConfig& cfg, int step) {
  const int sw = cfg.switch_step < 0 ? cfg.steps / 2 : cfg.switch_step;
  const int full_dims = static_cast<int>(cfg.tasks.front().reward_spec.size());
  const std::vector<int> act = preset_active_dims(cfg.preset, step, sw, full_dims);
  const uint64_t step_seed = derive_seed(cfg.seed, 2, static_cast<uint64_t>(step));

  StepOutcome out;
  out.batch = build_batch(params, cfg.tasks, cfg.group_size, step_seed, act);

  // full-dimension reward means come from re-scoring, so masking never hides them
  std::map<int, const Task*> task_by_q;
  for (const Task& t : cfg.tasks) task_by_q[t.question_id] = &t;
  std::vector<double> reward_sum_k(full_dims, 0.0);
  double agg_sum = 0.0, len_sum = 0.0;
  for (const Rollout& r : out.batch.rollouts) {
    const std::vector<double> full = evaluate_rewards(*task_by_q.at(r.question_id), r.tokens);
    for (int k = 0; k < full_dims; ++k) reward_sum_k[k] += full[k];
    agg_sum += scalarize(full, {});
    len_sum += static_cast<double>(r.tokens.size());
  }

  TermBuild tb = build_objective_terms(cfg.algo, out.batch);

  const PolicyParams frozen = params;
  StepMetrics& m = out.metrics;
  for (int u = 0; u < cfg.inner_updates; ++u) {
    SurrogateEval ev =
        evaluate_surrogate(params, out.batch, tb.terms, cfg.algo.epsilon, true, cfg.threads);
    std::vector<double> grad = std::move(ev.grad);
    double kl = 0.0;
    if (cfg.algo.kl_coeff > 0.0) {
      std::vector<double> kl_grad;
      kl = kl_grid_value_and_grad(params, frozen, kl_grad);
      for (size_t j = 0; j < grad.size(); ++j) grad[j] -= cfg.algo.kl_coeff * kl_grad[j];
    }
    if (u == 0) {
      m.surrogate = ev.value;
      m.kl_value = kl;
      m.objective_value = ev.value - cfg.algo.kl_coeff * kl;
      m.clip_fraction = ev.clip_fraction;
      double g2 = 0.0;
      for (double g : grad) g2 += g * g;
      m.grad_norm = std::sqrt(g2);
    }
    for (size_t j = 0; j < params.theta.size(); ++j) params.theta[j] += cfg.lr * grad[j];
  }

  const double n = static_cast<double>(out.batch.rollouts.size());
  m.step = step;
  double p2 = 0.0;
  for (double p : params.theta) p2 += p * p;
  m.param_norm = std::sqrt(p2);
  m.reward_mean_agg = agg_sum / n;
  for (int k = 0; k < full_dims; ++k) m.reward_mean_k.push_back(reward_sum_k[k] / n);
  m.mean_abs_adv_k.assign(tb.table.num_dims, 0.0);
  std::vector<int> dim_counts(tb.table.num_dims, 0);
  double abs_sum = 0.0;
  int abs_count = 0, degenerate = 0;
  for (const auto& [key, e] : tb.table.entries) {
    abs_sum += std::fabs(e.value);
    ++abs_count;
    if (e.degenerate) ++degenerate;
    m.mean_abs_adv_k[key.second] += std::fabs(e.value);
    ++dim_counts[key.second];
  }
  for (int k = 0; k < tb.table.num_dims; ++k)
    if (dim_counts[k] > 0) m.mean_abs_adv_k[k] /= dim_counts[k];
  m.mean_abs_adv = abs_count > 0 ? abs_sum / abs_count : 0.0;
  m.degenerate_entries = degenerate;
  m.m_final = tb.m_final;
  m.relegations = tb.has_partitions ? static_cast<int>(tb.pstate.relegated.size()) : 0;
  m.response_len_mean = len_sum / n;
  m.active_dims = act;

  out.table = std::move(tb.table);
  out.pstate = std::move(tb.pstate);
  out.has_partitions = tb.has_partitions;
  return out;
}

TrainResult run_training(const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  PolicyParams params = init_policy(cfg.policy, derive_seed(cfg.seed, 1, 0), cfg.init_scale);
  TrainResult result;
  result.history.reserve(static_cast<size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    StepOutcome out = train_step(params, cfg, step);
    if (!out.metrics.all_finite())
      throw InvariantError("non-finite training metric at step " + std::to_string(step));
    result.history.push_back(out.metrics);
    if (on_step) on_step(out, params);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace prpolab
