import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestedagents.arena import Arena, Material, ShapeSpec, diamond_shape, line_shape, zigzag_shape
from nestedagents.ddqn import EpsilonSchedule
from nestedagents.oracle import (
    MiniArenaSpec,
    TabularQ,
    place_cost,
    plan_actions,
    plan_optimal,
    tabular_q_learn,
)


def shape_of(cells, size=15):
    mask = np.zeros((size, size), dtype=bool)
    for x, y in cells:
        mask[x, y] = True
    return ShapeSpec("custom", mask)


def brute_force_min_steps(shape):
    """Try every placement order with the plain cost model."""
    cells = shape.cells()
    size = shape.size
    start = (size // 2, size // 2)
    best = None
    for perm in itertools.permutations(cells):
        pos, total = start, 0
        for c in perm:
            total += place_cost(pos, c, size)
            pos = c
        best = total if best is None else min(best, total)
    return best


def replay(shape, result, material=Material.STONE, max_steps=500):
    arena = Arena(shape, max_steps)
    arena.set_material(material)
    total = 0
    for a in plan_actions(shape, result):
        _, r, _ = arena.step(a)
        total += r
    return arena, total


@pytest.mark.parametrize("factory", [line_shape, zigzag_shape, diamond_shape])
def test_canonical_shapes_fully_buildable(factory):
    shape = factory()
    res = plan_optimal(shape)
    assert res.proven
    assert res.max_main_reward == 235
    assert res.max_nested_return == shape.cell_count
    assert res.optimal_material is Material.STONE
    arena, total = replay(shape, res)
    assert arena.state.terminal and arena.state.steps_taken == res.min_steps
    assert arena.main_reward() == 235 and total == shape.cell_count


def test_line_step_count():
    # 7 drops up, 7 back down onto the centre, 7 drops down
    assert plan_optimal(line_shape()).min_steps == 21


def test_single_cell():
    res = plan_optimal(shape_of([(7, 8)]))
    assert res.min_steps == 1
    assert res.max_main_reward == 235


def test_cell_under_start_needs_two_steps():
    assert plan_optimal(shape_of([(7, 7)])).min_steps == 2


def test_wood_forced():
    for factory in (line_shape, zigzag_shape, diamond_shape):
        assert plan_optimal(factory(), material=Material.WOOD).max_main_reward == 220


def test_step_cap_limits_build():
    res = plan_optimal(line_shape(), max_steps=7)
    assert res.max_nested_return == 7
    assert res.max_main_reward == 225 - 8 + 10
    arena, total = replay(line_shape(), res, max_steps=7)
    assert total == 7 and arena.state.terminal


def test_budget_exhaustion_is_reported():
    res = plan_optimal(zigzag_shape(), node_budget=5)
    assert not res.proven


@settings(max_examples=40, deadline=None)
@given(st.sets(st.tuples(st.integers(3, 11), st.integers(3, 11)), min_size=1, max_size=6), st.data())
def test_planner_matches_brute_force_and_ignores_order(cells, data):
    shape = shape_of(sorted(cells))
    res = plan_optimal(shape)
    assert res.min_steps == brute_force_min_steps(shape)
    perm = data.draw(st.permutations(range(len(cells))))
    again = plan_optimal(shape, cell_order=perm)
    assert (again.min_steps, again.max_main_reward) == (res.min_steps, res.max_main_reward)
    arena, total = replay(shape, res)
    assert total == len(cells) and arena.state.steps_taken == res.min_steps


def test_q_update_hand_value():
    q = TabularQ(n_actions=1, alpha=0.5, gamma=0.9)
    q.table["next"] = np.array([2.0])
    assert q.update("s", 0, 1.0, "next") == 1.4


def test_alpha_zero_never_changes_table():
    res = tabular_q_learn(MiniArenaSpec(), 200, alpha=0.0, gamma=0.9, seed=1)
    assert all(np.all(row == 0.0) for row in res.q.table.values())


def test_fixed_point_single_state():
    q = TabularQ(n_actions=1, alpha=0.3, gamma=0.0)
    for _ in range(200):
        q.update("s", 0, 1.0, "s")
    assert q.q("s")[0] == pytest.approx(1.0, abs=1e-12)


def test_tabular_reaches_planner_optimum():
    spec = MiniArenaSpec()
    res = tabular_q_learn(spec, 20_000, alpha=0.5, gamma=0.9, schedule=EpsilonSchedule(1.0, 0.01, 10_000), seed=7)
    best = plan_optimal(spec.shape(), spec.max_steps)
    assert res.rollout.nested_return == best.max_nested_return == 3
    assert res.rollout.score == best.max_main_reward == 25 + 10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_greedy_tabular_never_beats_planner(seed):
    spec = MiniArenaSpec(cells=((1, 1), (3, 2), (2, 4)))
    res = tabular_q_learn(spec, 300, alpha=0.5, gamma=0.9, seed=seed)
    best = plan_optimal(spec.shape(), spec.max_steps)
    assert res.rollout.nested_return <= best.max_nested_return
    assert res.rollout.score <= best.max_main_reward


def test_mini_arena_limits():
    with pytest.raises(ValueError):
        MiniArenaSpec(size=9).shape()


def bfs_min_steps(shape):
    """Breadth-first search over raw arena states (position, placed cells)."""
    from collections import deque

    size = shape.size
    target = frozenset(shape.cells())
    start = ((size // 2, size // 2), frozenset())
    seen = {start}
    queue = deque([(start, 0)])
    moves = [(0, 1), (0, -1), (-1, 0), (1, 0)]
    while queue:
        (pos, placed), d = queue.popleft()
        for dx, dy in moves:
            nxt = (min(max(pos[0] + dx, 0), size - 1), min(max(pos[1] + dy, 0), size - 1))
            for drop in (False, True):
                new = placed
                if drop and nxt not in placed:
                    if nxt not in target:
                        continue  # wrong blocks never help
                    new = placed | {nxt}
                if new == target:
                    return d + 1
                state = (nxt, new)
                if state not in seen:
                    seen.add(state)
                    queue.append((state, d + 1))


@settings(max_examples=30, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=4))
def test_planner_matches_state_space_search(cells):
    shape = shape_of(sorted(cells), size=5)
    assert plan_optimal(shape, 50).min_steps == bfs_min_steps(shape)
