#include "prpolab/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "prpolab/advantage.hpp"
#include "prpolab/config.hpp"
#include "prpolab/envs.hpp"
#include "prpolab/error.hpp"
#include "prpolab/objective.hpp"
#include "prpolab/oracle.hpp"
#include "prpolab/partition.hpp"
#include "prpolab/policy.hpp"
#include "prpolab/rng.hpp"

namespace prpolab {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// "" on success, reason on failure
std::string expect_close(double got, double want, double tol, const std::string& what) {
  if (std::fabs(got - want) <= tol) return "";
  return what + ": got " + num(got) + ", want " + num(want) + " (tol " + num(tol) + ")";
}

std::string expect_true(bool ok, const std::string& what) { return ok ? "" : what; }

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (size_t j = 0; j < got.size(); ++j) {
    const double scale = std::max(1.0, std::fabs(want[j]));
    worst = std::max(worst, std::fabs(got[j] - want[j]) / scale);
  }
  return worst;
}

struct Fixture {
  std::vector<Task> tasks;
  PolicyParams params;
  GroupBatch batch;
};

Fixture make_fixture(int group_size = 12) {
  SuiteConfig scfg;
  scfg.kind = SuiteKind::Basic;
  scfg.sizes = {2, 2};
  scfg.vocab_size = 3;
  scfg.max_len = 3;
  scfg.dims = 2;
  scfg.seed = 11;
  Fixture f{make_task_suite(scfg), PolicyParams{}, GroupBatch{}};
  PolicySpec spec;
  spec.vocab_size = 3;
  spec.max_len = 3;
  spec.num_contexts = static_cast<int>(f.tasks.size());
  f.params = init_policy(spec, 5, 0.5);
  f.batch = build_batch(f.params, f.tasks, group_size, 99);
  return f;
}

Rollout synthetic(uint64_t uid, int question, int capability, std::vector<double> rewards) {
  Rollout r;
  r.rollout_uid = uid;
  r.question_id = question;
  r.capability_uid = capability;
  r.rewards = std::move(rewards);
  return r;
}

std::string check_rng() {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i)
    if (a.uniform() != b.uniform()) return "uniform streams diverge at draw " + std::to_string(i);
  Rng c(7), d(7);
  for (int i = 0; i < 100; ++i)
    if (c.gaussian() != d.gaussian()) return "gaussian streams diverge";
  if (derive_seed(1, 2, 3) == derive_seed(1, 2, 4)) return "derived seeds collide";
  Rng e(9);
  for (int i = 0; i < 1000; ++i) {
    const double u = e.uniform();
    if (!(u >= 0.0 && u < 1.0)) return "uniform outside [0,1)";
  }
  return "";
}

std::string check_distributions() {
  const Fixture f = make_fixture(4);
  for (int c = 0; c < f.params.spec.num_contexts; ++c)
    for (int t = 0; t < f.params.spec.max_len; ++t) {
      const std::vector<double> lp = next_token_log_probs(f.params, c, t);
      double sum = 0.0;
      for (double l : lp) sum += std::exp(l);
      if (std::string e = expect_close(sum, 1.0, 1e-12, "probability mass"); !e.empty()) return e;
    }
  return "";
}

std::string check_logprob_gradient() {
  const Fixture f = make_fixture(4);
  const TokenSequence seq = {2, 0, 1};
  const int context = 1;
  auto value = [&](const std::vector<double>& theta) {
    PolicyParams p = f.params;
    p.theta = theta;
    double total = 0.0;
    for (double lp : log_prob(p, context, seq)) total += lp;
    return total;
  };
  const std::vector<double> fd = oracle::finite_diff_gradient(value, f.params.theta);
  const std::vector<double> an = grad_log_prob(f.params, context, seq);
  const double err = max_rel_err(an, fd);
  return expect_true(err < 1e-6, "log-prob gradient error " + num(err));
}

std::string check_group_stats() {
  const std::vector<double> vals = {0.0, 1.0, 10.0, 11.0};
  const GroupStats s = group_stats(vals);
  if (std::string e = expect_close(s.mean, 5.5, 1e-12, "mean"); !e.empty()) return e;
  if (std::string e = expect_close(s.stddev, std::sqrt(101.0 / 3.0), 1e-12, "sample stddev");
      !e.empty())
    return e;
  const GroupStats p = group_stats(vals, StdMode::Population);
  if (std::string e = expect_close(p.stddev, std::sqrt(101.0 / 4.0), 1e-12, "population stddev");
      !e.empty())
    return e;
  if (!group_stats({3.0}).degenerate) return "singleton group not flagged";
  if (!group_stats({2.0, 2.0, 2.0}).degenerate) return "zero-spread group not flagged";
  if (standardize(5.0, group_stats({2.0, 2.0}))) return "degenerate group leaked a value";
  return "";
}

std::string check_invariance() {
  const Fixture f = make_fixture(6);
  const AdvantageTable base = question_scalar_advantages(f.batch.rollouts);
  std::vector<Rollout> moved = f.batch.rollouts;
  for (Rollout& r : moved)
    for (double& v : r.rewards) v = v * 3.0 + 7.0;
  const AdvantageTable shifted = question_scalar_advantages(moved);
  for (const auto& [key, e] : base.entries) {
    const double other = shifted.advantage(key.first, key.second);
    if (std::fabs(e.value - other) > 1e-9)
      return "advantage moved under affine reward change: " + num(e.value) + " vs " + num(other);
  }
  return "";
}

std::string check_zero_mean() {
  const Fixture f = make_fixture(6);
  const AdvantageTable table = question_per_dim_advantages(f.batch.rollouts);
  std::map<std::pair<GroupKey, int>, double> sums;
  for (const auto& [key, e] : table.entries)
    if (!e.degenerate) sums[{e.cell, key.second}] += e.value;
  for (const auto& [cell, sum] : sums)
    if (std::fabs(sum) > 1e-9)
      return "cell " + cell.first.to_string() + " advantage sum " + num(sum);
  return "";
}

std::string check_partition_oracle() {
  const Fixture f = make_fixture(8);
  std::map<uint64_t, GroupKey> assignment;
  for (const Rollout& r : f.batch.rollouts)
    assignment[r.rollout_uid] =
        GroupKey{GroupLevel::Capability, static_cast<uint64_t>(r.capability_uid)};
  const AdvantageTable table = partition_scalar_advantages(f.batch.rollouts, assignment);
  const auto ref = oracle::reference_advantages(f.batch.rollouts, assignment, false);
  for (const auto& [key, e] : table.entries) {
    const double want = ref.at(key);
    if (std::fabs(e.value - want) > 1e-12)
      return "pooled advantage mismatch at uid " + std::to_string(key.first);
  }
  return "";
}

std::string check_relegation() {
  // 14 same-capability rollouts, one extreme value: its pooled standardized
  // advantage is 13/sqrt(14) > 3, everything else sits far below
  std::vector<Rollout> rollouts;
  for (int q = 0; q < 7; ++q)
    for (int i = 0; i < 2; ++i) {
      const uint64_t uid = static_cast<uint64_t>(q) * 2 + i;
      const double reward = (q == 0 && i == 1) ? 1000.0 : 0.0;
      rollouts.push_back(synthetic(uid, q, 0, {reward}));
    }
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  cfg.tau = 3.0;
  const ValidationResult vr = validate_partitions(rollouts, cfg);
  if (!vr.state.converged) return "validation did not converge";
  if (vr.state.iteration != 1) return "expected one round, ran " + std::to_string(vr.state.iteration);
  if (vr.state.relegated != std::set<uint64_t>{1}) return "wrong rollout relegated";
  if (vr.state.num_partitions() != 2)
    return "expected 2 final groups, got " + std::to_string(vr.state.num_partitions());
  // the split-out rollout falls back to its own question's statistics
  if (std::string e = expect_close(vr.table.advantage(1, 0), 1.0 / std::sqrt(2.0), 1e-12,
                                   "fallback advantage");
      !e.empty())
    return e;
  const auto again = detect_outliers(vr.table, vr.state, cfg.tau);
  if (!again.empty()) return "fixed point violated: outliers remain after convergence";
  if (partition_audit_text(vr.state).find("status=converged") == std::string::npos)
    return "audit text misses final status";
  return "";
}

std::string check_surrogate_gradient() {
  const Fixture f = make_fixture(4);
  AlgoVariant variant;  // defaults: grpo, eps 0.2
  const TermBuild tb = build_objective_terms(variant, f.batch);

  // at the sampling point every ratio is exactly 1, far from the kinks
  auto value_at = [&](const std::vector<double>& theta) {
    PolicyParams p = f.params;
    p.theta = theta;
    return evaluate_surrogate(p, f.batch, tb.terms, variant.epsilon, false).value;
  };
  const std::vector<double> fd = oracle::finite_diff_gradient(value_at, f.params.theta);
  const std::vector<double> an =
      evaluate_surrogate(f.params, f.batch, tb.terms, variant.epsilon, true).grad;
  const double err = max_rel_err(an, fd);
  if (err >= 1e-5) return "gradient error at sampling point " + num(err);

  // same check away from the sampling point, clip range widened so the
  // objective stays smooth everywhere
  PolicyParams moved = f.params;
  Rng rng(123);
  for (double& th : moved.theta) th += 0.05 * rng.gaussian();
  auto value_moved = [&](const std::vector<double>& theta) {
    PolicyParams p = moved;
    p.theta = theta;
    return evaluate_surrogate(p, f.batch, tb.terms, 10.0, false).value;
  };
  const std::vector<double> fd2 = oracle::finite_diff_gradient(value_moved, moved.theta);
  const std::vector<double> an2 = evaluate_surrogate(moved, f.batch, tb.terms, 10.0, true).grad;
  const double err2 = max_rel_err(an2, fd2);
  if (err2 >= 1e-5) return "gradient error off the sampling point " + num(err2);
  return "";
}

std::string check_kl() {
  const Fixture f = make_fixture(4);
  if (std::string e = expect_close(kl_grid_value(f.params, f.params), 0.0, 1e-14, "kl(p, p)");
      !e.empty())
    return e;
  PolicyParams moved = f.params;
  Rng rng(77);
  for (double& th : moved.theta) th += 0.1 * rng.gaussian();
  if (kl_grid_value(moved, f.params) <= 0.0) return "kl of distinct policies not positive";
  auto value_at = [&](const std::vector<double>& theta) {
    PolicyParams p = moved;
    p.theta = theta;
    return kl_grid_value(p, f.params);
  };
  const std::vector<double> fd = oracle::finite_diff_gradient(value_at, moved.theta);
  std::vector<double> an;
  kl_grid_value_and_grad(moved, f.params, an);
  const double err = max_rel_err(an, fd);
  return expect_true(err < 1e-5, "kl gradient error " + num(err));
}

std::string check_thread_invariance() {
  const Fixture f = make_fixture(12);  // 48 rollouts, several reduction chunks
  AlgoVariant variant;
  variant.kind = AlgoKind::Prpo;
  const TermBuild tb = build_objective_terms(variant, f.batch);
  PolicyParams moved = f.params;
  Rng rng(3);
  for (double& th : moved.theta) th += 0.05 * rng.gaussian();
  const SurrogateEval one = evaluate_surrogate(moved, f.batch, tb.terms, 0.2, true, 1);
  const SurrogateEval four = evaluate_surrogate(moved, f.batch, tb.terms, 0.2, true, 4);
  if (one.value != four.value) return "values differ across thread counts";
  for (size_t j = 0; j < one.grad.size(); ++j)
    if (one.grad[j] != four.grad[j]) return "gradients differ at parameter " + std::to_string(j);
  return "";
}

TrainConfig small_train_config(AlgoKind kind) {
  SuiteConfig scfg;
  scfg.kind = SuiteKind::Basic;
  scfg.sizes = {2};
  scfg.vocab_size = 3;
  scfg.max_len = 3;
  scfg.dims = 2;
  scfg.seed = 4;
  TrainConfig tc;
  tc.tasks = make_task_suite(scfg);
  tc.policy.vocab_size = 3;
  tc.policy.max_len = 3;
  tc.policy.num_contexts = static_cast<int>(tc.tasks.size());
  tc.algo.kind = kind;
  tc.group_size = 6;
  tc.steps = 3;
  tc.seed = 21;
  return tc;
}

std::string check_training_reproducible() {
  const TrainConfig tc = small_train_config(AlgoKind::DataPrpo);
  const TrainResult a = run_training(tc);
  const TrainResult b = run_training(tc);
  for (size_t j = 0; j < a.params.theta.size(); ++j)
    if (a.params.theta[j] != b.params.theta[j])
      return "parameter " + std::to_string(j) + " differs between identical runs";
  for (size_t s = 0; s < a.history.size(); ++s)
    if (a.history[s].objective_value != b.history[s].objective_value)
      return "objective differs at step " + std::to_string(s);
  return "";
}

std::string check_reduction() {
  // one capability, one reward dimension, per-question pooling, no
  // relegation: the partitioned variant must collapse onto the baseline
  SuiteConfig scfg;
  scfg.kind = SuiteKind::Basic;
  scfg.sizes = {2};
  scfg.vocab_size = 3;
  scfg.max_len = 3;
  scfg.dims = 1;
  scfg.seed = 8;
  const std::vector<Task> tasks = make_task_suite(scfg);
  PolicySpec spec;
  spec.vocab_size = 3;
  spec.max_len = 3;
  spec.num_contexts = static_cast<int>(tasks.size());
  const PolicyParams params = init_policy(spec, 31, 0.5);
  const GroupBatch batch = build_batch(params, tasks, 6, 17);

  AlgoVariant grpo;
  AlgoVariant prpo;
  prpo.kind = AlgoKind::Prpo;
  prpo.partition.mode = PartitionMode::Question;
  prpo.partition.tau = std::numeric_limits<double>::infinity();
  const TermBuild tg = build_objective_terms(grpo, batch);
  const TermBuild tp = build_objective_terms(prpo, batch);

  for (const Rollout& r : batch.rollouts) {
    const double a = tg.table.advantage(r.rollout_uid, 0);
    const double b = tp.table.advantage(r.rollout_uid, 0);
    if (std::fabs(a - b) > 1e-12)
      return "advantages diverge at uid " + std::to_string(r.rollout_uid);
  }
  PolicyParams moved = params;
  Rng rng(41);
  for (double& th : moved.theta) th += 0.05 * rng.gaussian();
  const SurrogateEval eg = evaluate_surrogate(moved, batch, tg.terms, 0.2, true);
  const SurrogateEval ep = evaluate_surrogate(moved, batch, tp.terms, 0.2, true);
  if (std::fabs(eg.value - ep.value) > 1e-12)
    return "surrogate values diverge: " + num(eg.value) + " vs " + num(ep.value);
  for (size_t j = 0; j < eg.grad.size(); ++j)
    if (std::fabs(eg.grad[j] - ep.grad[j]) > 1e-10)
      return "gradients diverge at parameter " + std::to_string(j);
  return "";
}

std::string check_config_roundtrip() {
  ExperimentConfig cfg;
  cfg.name = "roundtrip";
  cfg.parameterization = Parameterization::LinearFeatures;
  cfg.env.kind = SuiteKind::Mixed;
  cfg.env.sizes = {3, 2};
  cfg.env.dims = 2;
  cfg.algo.kind = AlgoKind::Prpo;
  cfg.algo.lambda_k = {0.75, 0.25};
  cfg.algo.partition.tau = std::numeric_limits<double>::infinity();
  cfg.lr = 0.05;
  const std::string text = serialize_config(cfg);
  const ExperimentConfig back = parse_config(text);
  if (serialize_config(back) != text) return "serialize/parse/serialize is not a fixed point";
  return "";
}

std::string check_suite_roundtrip() {
  SuiteConfig scfg;
  scfg.kind = SuiteKind::Mixed;
  scfg.sizes = {2, 3};
  scfg.dims = 2;
  scfg.seed = 13;
  const std::vector<Task> tasks = make_task_suite(scfg);
  const std::string text = serialize_suite(tasks);
  const std::vector<Task> back = parse_suite(text);
  if (serialize_suite(back) != text) return "suite serialization is not a fixed point";
  if (suite_hash(back) != suite_hash(tasks)) return "suite digest unstable";
  return "";
}

std::string check_enumeration() {
  PolicySpec spec;
  spec.vocab_size = 3;
  spec.max_len = 3;
  spec.num_contexts = 2;
  PolicyParams uniform;
  uniform.spec = spec;
  uniform.theta.assign(spec.param_count(), 0.0);

  const double mass =
      oracle::enumerate_expectation(uniform, 0, [](const TokenSequence&) { return 1.0; });
  if (std::string e = expect_close(mass, 1.0, 1e-12, "total probability"); !e.empty()) return e;

  const TokenSequence target = {0, 1, 2};
  const double match = oracle::enumerate_expectation(uniform, 0, [&](const TokenSequence& seq) {
    int hits = 0;
    for (size_t t = 0; t < seq.size(); ++t)
      if (seq[t] == target[t]) ++hits;
    return hits / 3.0;
  });
  return expect_close(match, 1.0 / 3.0, 1e-12, "uniform-policy match rate");
}

}  // namespace

std::vector<VerifyCheck> run_verification() {
  std::vector<VerifyCheck> checks;
  auto add = [&](const std::string& name, const std::function<std::string()>& fn) {
    VerifyCheck c;
    c.name = name;
    try {
      c.detail = fn();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = e.what();
    }
    checks.push_back(std::move(c));
  };

  add("rng streams repeat under a fixed seed", check_rng);
  add("token distributions normalize", check_distributions);
  add("log-prob gradient matches finite differences", check_logprob_gradient);
  add("group statistics match hand values", check_group_stats);
  add("advantages ignore affine reward changes", check_invariance);
  add("per-group advantages sum to zero", check_zero_mean);
  add("pooled advantages match a plain re-derivation", check_partition_oracle);
  add("relegation reaches a clean fixed point", check_relegation);
  add("surrogate gradient matches finite differences", check_surrogate_gradient);
  add("kl value and gradient check out", check_kl);
  add("reductions are thread-count invariant", check_thread_invariance);
  add("training is bitwise reproducible", check_training_reproducible);
  add("single-group single-dim variants coincide", check_reduction);
  add("config text round-trips", check_config_roundtrip);
  add("task suites round-trip", check_suite_roundtrip);
  add("exact enumeration agrees with closed forms", check_enumeration);
  return checks;
}

std::string verification_report(const std::vector<VerifyCheck>& checks) {
  std::ostringstream out;
  size_t passed = 0;
  for (const VerifyCheck& c : checks) {
    out << (c.passed ? "PASS" : "FAIL") << "  " << c.name;
    if (!c.passed) out << "  [" << c.detail << "]";
    out << '\n';
    if (c.passed) ++passed;
  }
  out << passed << "/" << checks.size() << " checks passed\n";
  return out.str();
}

}  // namespace prpolab
