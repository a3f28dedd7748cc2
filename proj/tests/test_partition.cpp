#include <cmath>
#include <limits>

#include "doctest.h"
#include "prpolab/error.hpp"
#include "prpolab/partition.hpp"

using namespace prpolab;

namespace {

Rollout make_rollout(uint64_t uid, int qid, int cap, std::vector<double> rewards) {
  Rollout r;
  r.rollout_uid = uid;
  r.question_id = qid;
  r.capability_uid = cap;
  r.tokens = {0};
  r.old_logps = {-1.0};
  r.rewards = std::move(rewards);
  return r;
}

// 7 questions x 2 rollouts, one capability; uid = 100*q + i, reward 0 except
// the listed overrides
std::vector<Rollout> planted_batch(const std::map<uint64_t, double>& overrides) {
  std::vector<Rollout> batch;
  for (int q = 0; q < 7; ++q)
    for (int i = 0; i < 2; ++i) {
      const uint64_t uid = static_cast<uint64_t>(100 * q + i);
      auto it = overrides.find(uid);
      batch.push_back(make_rollout(uid, q, 0, {it == overrides.end() ? 0.0 : it->second}));
    }
  return batch;
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("initial assignment follows the configured mode") {
  std::vector<Rollout> batch;
  batch.push_back(make_rollout(1, 0, 0, {0.0}));
  batch.push_back(make_rollout(2, 0, 0, {1.0}));
  batch.push_back(make_rollout(3, 1, 1, {2.0}));
  batch.push_back(make_rollout(4, 1, 1, {3.0}));

  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  PartitionState cap = assign_initial_partitions(batch, cfg);
  CHECK(cap.num_partitions() == 2);
  CHECK(cap.assignment.at(1) == GroupKey{GroupLevel::Capability, 0});
  CHECK(cap.assignment.at(4) == GroupKey{GroupLevel::Capability, 1});

  cfg.mode = PartitionMode::Global;
  PartitionState glob = assign_initial_partitions(batch, cfg);
  CHECK(glob.num_partitions() == 1);
  CHECK(glob.assignment.at(3) == GroupKey{GroupLevel::Batch, 0});

  cfg.mode = PartitionMode::Question;
  PartitionState per_q = assign_initial_partitions(batch, cfg);
  CHECK(per_q.num_partitions() == 2);
  CHECK(per_q.assignment.at(3) == GroupKey{GroupLevel::Question, 1});
}

TEST_CASE("configuration errors are rejected up front") {
  std::vector<Rollout> batch;
  batch.push_back(make_rollout(1, 0, 0, {0.0}));
  PartitionConfig cfg;
  CHECK_THROWS_AS(assign_initial_partitions({}, cfg), InvariantError);
  cfg.tau = 0.0;
  CHECK_THROWS_AS(assign_initial_partitions(batch, cfg), ConfigError);
  cfg.tau = 3.0;
  cfg.max_iter = -1;
  CHECK_THROWS_AS(assign_initial_partitions(batch, cfg), ConfigError);
}

TEST_CASE("detection uses a strict threshold") {
  // values {0,0,0,3}: the extreme standardizes to exactly 1.5
  std::vector<Rollout> batch;
  batch.push_back(make_rollout(1, 0, 0, {0.0}));
  batch.push_back(make_rollout(2, 0, 0, {0.0}));
  batch.push_back(make_rollout(3, 0, 0, {0.0}));
  batch.push_back(make_rollout(4, 0, 0, {3.0}));

  PartitionConfig cfg;
  cfg.mode = PartitionMode::Question;
  cfg.tau = 1.5;
  const ValidationResult at_tau = validate_partitions(batch, cfg);
  CHECK(at_tau.state.converged);
  CHECK(at_tau.state.relegated.empty());
  CHECK(at_tau.table.advantage(4) == 1.5);  // binary-exact inputs

  cfg.tau = 1.4999;
  const ValidationResult below = validate_partitions(batch, cfg);
  CHECK(below.state.converged);
  CHECK(below.state.relegated.size() == 1);
  CHECK(below.state.relegated.count(4) == 1);
  CHECK(below.state.iteration == 1);
  // the singleton's value falls back to its own question group
  CHECK(below.table.advantage(4) == 1.5);
}

TEST_CASE("planted extremes are split out over successive rounds") {
  // twelve 0s plus 100 and 1000 in one capability pool: only the 1000 clears
  // tau=3 in round one, the 100 clears it in round two
  std::map<uint64_t, double> overrides;
  overrides[1] = 1000.0;
  overrides[101] = 100.0;
  const std::vector<Rollout> batch = planted_batch(overrides);

  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  const ValidationResult res = validate_partitions(batch, cfg);
  CHECK(res.state.converged);
  CHECK_FALSE(res.state.exhausted);
  CHECK(res.state.iteration == 2);
  REQUIRE(res.state.history.size() == 2);
  REQUIRE(res.state.history[0].size() == 1);
  CHECK(res.state.history[0][0].rollout_uid == 1);
  CHECK(res.state.history[0][0].iteration == 1);
  CHECK(res.state.history[0][0].from == GroupKey{GroupLevel::Capability, 0});
  CHECK(res.state.history[0][0].advantage > 3.0);
  REQUIRE(res.state.history[1].size() == 1);
  CHECK(res.state.history[1][0].rollout_uid == 101);
  CHECK(res.state.relegated.size() == 2);
  CHECK(res.state.num_partitions() == 3);  // pool + two singletons

  // final pass is clean: every survivor sits inside the threshold
  for (const auto& [uid, key] : res.state.assignment)
    if (key.level != GroupLevel::RolloutSingleton)
      CHECK(std::fabs(res.table.advantage(uid)) <= 3.0);

  // relegated rollouts standardize within their own question groups
  CHECK(res.table.advantage(1) == doctest::Approx(0.7071067811865475).epsilon(1e-14));
  CHECK(res.table.advantage(101) == doctest::Approx(0.7071067811865475).epsilon(1e-14));
}

TEST_CASE("a single extreme among equals trips at thirteen-plus members") {
  // pooled z of the lone extreme is (n-1)/sqrt(n); at n=14 that is 13/sqrt(14)
  std::map<uint64_t, double> overrides;
  overrides[1] = 1000.0;
  const std::vector<Rollout> batch = planted_batch(overrides);
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;

  PartitionState probe = assign_initial_partitions(batch, cfg);
  const AdvantageTable table = partition_scalar_advantages(batch, probe.assignment);
  CHECK(table.advantage(1) == doctest::Approx(3.474396144861517).epsilon(1e-14));

  const ValidationResult res = validate_partitions(batch, cfg);
  CHECK(res.state.converged);
  CHECK(res.state.iteration == 1);
  CHECK(res.state.relegated.count(1) == 1);
}

TEST_CASE("round budget exhaustion is reported, not hidden") {
  std::map<uint64_t, double> overrides;
  overrides[1] = 1000.0;
  const std::vector<Rollout> batch = planted_batch(overrides);
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  cfg.max_iter = 0;
  const ValidationResult res = validate_partitions(batch, cfg);
  CHECK(res.state.exhausted);
  CHECK_FALSE(res.state.converged);
  CHECK(res.state.iteration == 0);
  CHECK(res.state.relegated.empty());
}

TEST_CASE("an infinite threshold disables relegation") {
  std::map<uint64_t, double> overrides;
  overrides[1] = 1e9;
  const std::vector<Rollout> batch = planted_batch(overrides);
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  cfg.tau = std::numeric_limits<double>::infinity();
  const ValidationResult res = validate_partitions(batch, cfg);
  CHECK(res.state.converged);
  CHECK(res.state.iteration == 0);
  CHECK(res.state.relegated.empty());
  CHECK(res.state.num_partitions() == 1);
}

TEST_CASE("per-dimension detection catches what the scalar sum hides") {
  // dim0 = -dim1 everywhere, so the scalar sum is constant, yet dim1 carries
  // one planted extreme
  std::vector<Rollout> batch;
  for (int q = 0; q < 7; ++q)
    for (int i = 0; i < 2; ++i) {
      const uint64_t uid = static_cast<uint64_t>(100 * q + i);
      const double v = uid == 1 ? 1000.0 : 0.0;
      batch.push_back(make_rollout(uid, q, 0, {-v, v}));
    }

  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  const ValidationResult scalar = validate_partitions(batch, cfg);
  CHECK(scalar.state.converged);
  CHECK(scalar.state.relegated.empty());

  cfg.outlier_rule = OutlierRule::AnyDim;
  const ValidationResult per_dim = validate_partitions(batch, cfg);
  CHECK(per_dim.state.converged);
  CHECK(per_dim.state.relegated.count(1) == 1);
}

TEST_CASE("small question groups cannot produce relegations at tau 3") {
  // max standardized residual at n=4 is 1.5, well under the default threshold
  std::vector<Rollout> batch;
  for (int q = 0; q < 3; ++q)
    for (int i = 0; i < 4; ++i)
      batch.push_back(make_rollout(static_cast<uint64_t>(100 * q + i), q, 0,
                                   {static_cast<double>(i * i) + q}));
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Question;
  const ValidationResult res = validate_partitions(batch, cfg);
  CHECK(res.state.converged);
  CHECK(res.state.iteration == 0);
  CHECK(res.state.relegated.empty());
}

TEST_CASE("double relegation is an invariant violation") {
  std::map<uint64_t, double> overrides;
  overrides[1] = 1000.0;
  const std::vector<Rollout> batch = planted_batch(overrides);
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  ValidationResult res = validate_partitions(batch, cfg);
  REQUIRE(res.state.relegated.count(1) == 1);
  CHECK_THROWS_AS(relegate(res.state, {1}, res.table), InvariantError);
}

TEST_CASE("group listing and audit text reflect the final state") {
  std::map<uint64_t, double> overrides;
  overrides[1] = 1000.0;
  overrides[101] = 100.0;
  const std::vector<Rollout> batch = planted_batch(overrides);
  PartitionConfig cfg;
  cfg.mode = PartitionMode::Capability;
  const ValidationResult res = validate_partitions(batch, cfg);

  const auto groups = partition_groups(res.state);
  REQUIRE(groups.size() == 3);
  CHECK(groups.at(GroupKey{GroupLevel::Capability, 0}).size() == 12);
  CHECK(groups.at(GroupKey{GroupLevel::RolloutSingleton, 1}).size() == 1);

  const std::string audit = partition_audit_text(res.state);
  CHECK(audit.find("mode=capability") != std::string::npos);
  CHECK(audit.find("round 1: 1 relegated") != std::string::npos);
  CHECK(audit.find("round 2: 1 relegated") != std::string::npos);
  CHECK(audit.find("uid=1 ") != std::string::npos);
  CHECK(audit.find("status=converged rounds=2 partitions=3 relegated=2") != std::string::npos);
}

}  // TEST_SUITE
