import copy

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nestedagents import harness
from nestedagents.config import ExperimentConfig
from nestedagents.errors import TrainingError
from nestedagents.frameworks import build_system
from nestedagents.harness import (
    CurvePoint,
    LearningCurve,
    aggregate,
    curves_csv,
    eval_points,
    evaluate,
    make_arena,
    run_experiment,
    run_trial,
    trial_rng,
    write_results,
)


def small(**kw):
    base = dict(episodes=12, eval_every=4, trials=2, max_steps=40, warmup=40, seed=3)
    base.update(kw)
    return ExperimentConfig().replace(**base)


def curve(trial, scores, episodes=None, failed=False):
    episodes = episodes or [30 * (i + 1) for i in range(len(scores))]
    pts = [CurvePoint(e, s, 0.5, 0.5) for e, s in zip(episodes, scores)]
    return LearningCurve(trial, "nested", "line", pts, failed=failed)


def test_eval_points():
    assert len(eval_points(3000, 30)) == 100
    assert eval_points(3000, 30)[-1] == 3000
    assert eval_points(100, 30) == [30, 60, 90, 100]
    assert eval_points(5, 30) == [5]


def test_aggregate_single_trial():
    rows = aggregate([curve(0, [210, 220])])
    assert [(r.mean, r.std, r.trials_used) for r in rows] == [(210, 0, 1), (220, 0, 1)]


def test_aggregate_two_trials():
    (row,) = aggregate([curve(0, [200]), curve(1, [220])])
    assert (row.mean, row.std, row.min, row.max) == (210, 10, 200, 220)


def test_aggregate_excludes_failed():
    rows = aggregate([curve(0, [200]), curve(1, [0], failed=True), curve(2, [220])])
    assert rows[0].trials_used == 2 and rows[0].mean == 210


def test_aggregate_rejects_mismatched_indices():
    with pytest.raises(ValueError):
        aggregate([curve(0, [1, 2]), curve(1, [1, 2], episodes=[30, 61])])


@given(st.lists(st.lists(st.integers(-300, 300), min_size=3, max_size=3), min_size=1, max_size=8), st.randoms())
def test_aggregate_permutation_invariant(score_lists, rnd):
    curves = [curve(i, s) for i, s in enumerate(score_lists)]
    shuffled = curves[:]
    rnd.shuffle(shuffled)
    assert aggregate(curves) == aggregate(shuffled)


def test_protocol_point_count():
    cfg = small(episodes=10, eval_every=3, trials=1)
    c = run_trial(cfg, 0)
    assert c.episodes == [3, 6, 9, 10]


def test_ten_trials_are_averaged():
    res = run_experiment(small(episodes=4, eval_every=2, trials=10))
    assert all(r.trials_used == 10 for r in res.summary)
    for j, row in enumerate(res.summary):
        vals = [c.points[j].score for c in res.curves]
        assert row.mean == pytest.approx(sum(vals) / 10)


def test_trial_streams_are_independent_and_reproducible():
    a = trial_rng(1, 0).random(4)
    assert np.array_equal(a, trial_rng(1, 0).random(4))
    assert not np.array_equal(a, trial_rng(1, 1).random(4))
    assert not np.array_equal(a, trial_rng(2, 0).random(4))


@pytest.mark.parametrize("fw", ["nested", "hierarchical", "flat"])
def test_csv_is_byte_identical_across_runs(fw):
    cfg = small(framework=fw)
    first = curves_csv(run_experiment(cfg).curves)
    second = curves_csv(run_experiment(cfg).curves)
    assert first == second
    assert first.splitlines()[0] == "scenario,framework,trial,episode,score,eps_main,eps_nested"


def test_parallel_jobs_match_serial():
    cfg = small(trials=3)
    serial = curves_csv(run_experiment(cfg).curves)
    parallel = curves_csv(run_experiment(cfg.replace(jobs=2)).curves)
    assert serial == parallel


@pytest.mark.parametrize("fw", ["nested", "hierarchical", "flat"])
def test_evaluation_does_not_touch_learners(fw):
    cfg = small(framework=fw, warmup=32)
    rng = trial_rng(0, 0)
    system = build_system(cfg, rng)
    arena = make_arena(cfg)
    for e in range(5):
        harness.run_episode(system, arena, e, train=True, rng=rng)
    before = [(l.online.theta.copy(), l.target.theta.copy(), len(l.replay), l.optimizer.t) for l in system.learners]
    twin = copy.deepcopy(rng)
    evaluate(system, arena, rng, episodes=3)
    after = [(l.online.theta, l.target.theta, len(l.replay), l.optimizer.t) for l in system.learners]
    for (o1, t1, n1, s1), (o2, t2, n2, s2) in zip(before, after):
        assert np.array_equal(o1, o2) and np.array_equal(t1, t2) and n1 == n2 and s1 == s2
    assert np.array_equal(rng.random(4), twin.random(4))


def test_failed_trial_is_excluded(monkeypatch):
    real = harness.run_episode
    calls = {"n": 0}

    def flaky(system, arena, e, train, rng, greedy=False):
        # the first trial dies in its third training episode
        if train:
            calls["n"] += 1
            if calls["n"] == 3:
                raise TrainingError("non-finite loss")
        return real(system, arena, e, train, rng, greedy)

    monkeypatch.setattr(harness, "run_episode", flaky)
    res = run_experiment(small(trials=3))
    assert res.failed_trials == [0]
    assert all(r.trials_used == 2 for r in res.summary)


def test_write_results(tmp_path):
    results = [run_experiment(small(framework=fw, trials=1)) for fw in ("nested", "flat")]
    curves_path, summary_path = write_results(results, tmp_path)
    lines = curves_path.read_text().splitlines()
    assert lines[0].startswith("scenario,framework")
    assert sum(l.startswith("scenario") for l in lines) == 1
    assert {l.split(",")[1] for l in lines[1:]} == {"nested", "flat"}
    summary = summary_path.read_text().splitlines()
    assert summary[0] == "scenario,framework,episode,mean,std,min,max,trials_used"
    assert len(summary) == 1 + 2 * 3
