import os
import sys

import pytest

# the CMake build exports the module dir and the package dir; fall back to an
# installed package when they are absent
for var in ("PRPOLAB_MODULE_DIR", "PRPOLAB_PKG_DIR"):
    path = os.environ.get(var)
    if path and path not in sys.path:
        sys.path.insert(0, path)

pl = pytest.importorskip("prpolab")


def small_suite():
    cfg = pl.SuiteConfig()
    cfg.kind = pl.SuiteKind.Basic
    cfg.sizes = [2, 2]
    cfg.vocab_size = 3
    cfg.max_len = 3
    cfg.dims = 2
    cfg.seed = 11
    return pl.make_task_suite(cfg)


def small_policy(tasks, seed=5):
    spec = pl.PolicySpec()
    spec.vocab_size = 3
    spec.max_len = 3
    spec.num_contexts = len(tasks)
    return pl.init_policy(spec, seed, 0.4)


def test_suite_round_trip():
    tasks = small_suite()
    assert len(tasks) == 4
    assert [t.capability_uid for t in tasks] == [0, 0, 1, 1]
    again = pl.parse_suite(pl.serialize_suite(tasks))
    assert pl.suite_hash(again) == pl.suite_hash(tasks)


def test_rewards_are_in_range():
    tasks = small_suite()
    rewards = pl.evaluate_rewards(tasks[0], tasks[0].target)
    assert len(rewards) == 2
    for rule, r in zip(tasks[0].reward_spec, rewards):
        assert rule.range_lo() <= r <= rule.range_hi()


def test_advantages_match_reference():
    tasks = small_suite()
    params = small_policy(tasks)
    batch = pl.build_batch(params, tasks, 6, 99)
    table = pl.question_scalar_advantages(batch.rollouts)
    assignment = pl.assign_initial_partitions(batch.rollouts, pl.PartitionConfig()).assignment
    ref = pl.reference_advantages(batch.rollouts, assignment, False)
    pooled = pl.partition_scalar_advantages(batch.rollouts, assignment)
    for (uid, dim), value in ref.items():
        assert pooled.advantage(uid, dim) == pytest.approx(value, abs=1e-12)
    assert len(table.entries) == len(batch.rollouts)


def test_surrogate_centered_and_differentiable():
    tasks = small_suite()
    params = small_policy(tasks)
    batch = pl.build_batch(params, tasks, 6, 42)
    variant = pl.AlgoVariant()
    variant.kind = pl.AlgoKind.Prpo
    variant.lambda_k = [0.75, 0.25]
    build = pl.build_objective_terms(variant, batch)
    center = pl.evaluate_surrogate(params, batch, build.terms, variant.epsilon, False)
    assert abs(center.value) < 1e-9

    moved = pl.PolicyParams()
    moved.spec = params.spec
    moved.theta = [t + 0.05 * (i % 3 - 1) for i, t in enumerate(params.theta)]
    ev = pl.evaluate_surrogate(moved, batch, build.terms, variant.epsilon, True)

    def f(theta):
        p = pl.PolicyParams()
        p.spec = params.spec
        p.theta = list(theta)
        return pl.evaluate_surrogate(p, batch, build.terms, variant.epsilon, False).value

    fd = pl.finite_diff_gradient(f, moved.theta)
    worst = max(abs(a - b) for a, b in zip(ev.grad, fd))
    assert worst < 1e-6


def test_training_is_reproducible():
    tasks = small_suite()
    cfg = pl.TrainConfig()
    spec = pl.PolicySpec()
    spec.vocab_size = 3
    spec.max_len = 3
    spec.num_contexts = len(tasks)
    cfg.policy = spec
    cfg.tasks = tasks
    cfg.steps = 3
    cfg.group_size = 4
    cfg.lr = 0.2
    cfg.seed = 7
    a = pl.run_training(cfg)
    b = pl.run_training(cfg)
    assert a.params.theta == b.params.theta
    assert [m.surrogate for m in a.history] == [m.surrogate for m in b.history]
    assert all(m.all_finite() for m in a.history)


def test_config_round_trip_and_validation():
    cfg = pl.ExperimentConfig()
    cfg.env.kind = pl.SuiteKind.Interference
    cfg.env.sizes = [3]
    cfg.env.dims = 2
    cfg.algo.kind = pl.AlgoKind.DataPrpo
    cfg.steps = 5
    again = pl.parse_config(pl.serialize_config(cfg))
    assert pl.serialize_config(again) == pl.serialize_config(cfg)

    bad = pl.ExperimentConfig()
    bad.algo.epsilon = 1.5
    with pytest.raises(pl.ConfigError):
        bad.validate()
