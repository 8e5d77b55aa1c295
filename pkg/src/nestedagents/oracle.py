"""Ground truth for small problems: an exact build planner and tabular Q-learning.

Planner cost model. Moving never places anything, so the only question is the
order in which shape cells get filled. Filling cell ``c`` from position ``p``
costs ``|p - c|_1`` steps (the final move is the drop variant), except when
``p == c``: then the agent must step off and back (2 steps), or bump into the
wall beside a border cell (1 step, the move clamps). Wrong placements only
lose score and budget, so optimal plans never make them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .arena import Arena, Material, NestedAction, ShapeSpec
from .ddqn import EpsilonSchedule


@dataclass(frozen=True)
class OracleResult:
    max_main_reward: int
    max_nested_return: int
    min_steps: int
    optimal_material: Material
    proven: bool = True
    order: tuple[tuple[int, int], ...] = ()
    nodes: int = 0


def place_cost(pos: tuple[int, int], cell: tuple[int, int], size: int) -> int:
    d = abs(pos[0] - cell[0]) + abs(pos[1] - cell[1])
    if d:
        return d
    x, y = cell
    return 1 if x in (0, size - 1) or y in (0, size - 1) else 2


def _mst_weight(points: Sequence[tuple[int, int]]) -> int:
    """Prim's algorithm on Manhattan distances."""
    n = len(points)
    if n < 2:
        return 0
    pts = np.asarray(points)
    dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(-1)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = dist[0].copy()
    total = 0
    for _ in range(n - 1):
        cand = np.where(in_tree, np.iinfo(best.dtype).max, best)
        j = int(np.argmin(cand))
        total += int(cand[j])
        in_tree[j] = True
        best = np.minimum(best, dist[j])
    return total


class _Search:
    def __init__(self, cells, start, size, max_steps, node_budget):
        self.cells = list(cells)
        self.n = len(self.cells)
        self.start = start
        self.size = size
        self.max_steps = max_steps
        self.node_budget = node_budget
        self.nodes = 0
        self.exhausted = False
        self.best_count = 0
        self.best_steps = 0
        self.best_order: tuple[int, ...] = ()
        self.seen: dict[tuple[tuple[int, int], int], int] = {}
        self._mst_cache: dict[int, int] = {}

    def mst(self, mask: int) -> int:
        if mask not in self._mst_cache:
            self._mst_cache[mask] = _mst_weight([self.cells[i] for i in range(self.n) if mask >> i & 1])
        return self._mst_cache[mask]

    def better(self, count, steps):
        return count > self.best_count or (count == self.best_count and steps < self.best_steps)

    def run(self):
        self.dfs(self.start, (1 << self.n) - 1, 0, ())
        return self

    def dfs(self, pos, remaining, steps, order):
        self.nodes += 1
        if self.nodes > self.node_budget:
            self.exhausted = True
            return
        count = len(order)
        if self.better(count, steps):
            self.best_count, self.best_steps, self.best_order = count, steps, order
        if not remaining:
            return
        key = (pos, remaining)
        prev = self.seen.get(key)
        if prev is not None and prev <= steps:
            return
        self.seen[key] = steps

        children = []
        for i in range(self.n):
            if remaining >> i & 1:
                c = place_cost(pos, self.cells[i], self.size)
                if steps + c <= self.max_steps:
                    children.append((c, i))
        if not children:
            return
        first = min(c for c, _ in children)
        left = bin(remaining).count("1")
        full_lb = steps + first + self.mst(remaining)
        if full_lb <= self.max_steps:
            ub = count + left
        else:
            ub = count + min(left - 1, self.max_steps - steps - first + 1)
        if ub < self.best_count:
            return
        if ub == self.best_count:
            lb = full_lb if ub == self.n else steps + first + (ub - count - 1)
            if lb >= self.best_steps:
                return
        children.sort()
        for c, i in children:
            self.dfs(self.cells[i], remaining & ~(1 << i), steps + c, order + (i,))
            if self.exhausted:
                return


def plan_optimal(
    shape: ShapeSpec,
    max_steps: int = 500,
    material: Material | None = None,
    cell_order: Sequence[int] | None = None,
    node_budget: int = 2_000_000,
) -> OracleResult:
    """Best achievable build from the arena centre.

    ``material`` forces the material; by default the higher-penalty one is
    used. ``cell_order`` permutes the order in which cells are tried (the
    answer must not depend on it). If the node budget runs out the incumbent
    is returned with ``proven=False``.
    """
    cells = shape.cells()
    if cell_order is not None:
        cells = [cells[i] for i in cell_order]
    size = shape.size
    start = (size // 2, size // 2)
    search = _Search(cells, start, size, max_steps, node_budget).run()
    mat = max(Material, key=lambda m: m.penalty) if material is None else Material(material)
    placed = search.best_count
    reward = size * size - (shape.cell_count - placed) + mat.penalty
    return OracleResult(
        max_main_reward=reward,
        max_nested_return=placed,
        min_steps=search.best_steps,
        optimal_material=mat,
        proven=not search.exhausted,
        order=tuple(cells[i] for i in search.best_order),
        nodes=search.nodes,
    )


def plan_actions(shape: ShapeSpec, result: OracleResult) -> list[NestedAction]:
    """Expand a planned placement order into a concrete action sequence."""
    size = shape.size
    x, y = size // 2, size // 2
    actions: list[NestedAction] = []
    for cx, cy in result.order:
        if (x, y) == (cx, cy):
            if cy == size - 1:
                actions.append(NestedAction.FD)
            elif cy == 0:
                actions.append(NestedAction.BD)
            elif cx == 0:
                actions.append(NestedAction.LD)
            elif cx == size - 1:
                actions.append(NestedAction.RD)
            else:
                actions += [NestedAction.L, NestedAction.RD]
            continue
        moves = []
        moves += [NestedAction.R] * max(cx - x, 0) + [NestedAction.L] * max(x - cx, 0)
        moves += [NestedAction.F] * max(cy - y, 0) + [NestedAction.B] * max(y - cy, 0)
        last = moves.pop()
        actions += moves
        actions.append(_DROP_OF[last])
        x, y = cx, cy
    return actions


_DROP_OF = {
    NestedAction.F: NestedAction.FD,
    NestedAction.B: NestedAction.BD,
    NestedAction.L: NestedAction.LD,
    NestedAction.R: NestedAction.RD,
}


@dataclass
class TabularQ:
    """Q-table over hashable states, updated with the one-step Q-learning rule."""

    n_actions: int
    alpha: float
    gamma: float
    init: float = 0.0
    table: dict = field(default_factory=dict)

    def q(self, s) -> np.ndarray:
        row = self.table.get(s)
        if row is None:
            row = np.full(self.n_actions, self.init)
            self.table[s] = row
        return row

    def update(self, s, a: int, r: float, s_next) -> float:
        row = self.q(s)
        row[a] = row[a] + self.alpha * (r + self.gamma * np.max(self.q(s_next)) - row[a])
        return row[a]

    def greedy(self, s) -> int:
        return int(np.argmax(self.q(s)))


@dataclass(frozen=True)
class MiniArenaSpec:
    size: int = 5
    cells: tuple[tuple[int, int], ...] = ((2, 1), (2, 2), (2, 3))
    max_steps: int = 50
    material: Material = Material.STONE

    def shape(self) -> ShapeSpec:
        if self.size > 7 or len(self.cells) > 5:
            raise ValueError("mini arena is limited to 7x7 and 5 shape cells")
        mask = np.zeros((self.size, self.size), dtype=bool)
        for x, y in self.cells:
            mask[x, y] = True
        return ShapeSpec("mini", mask)


@dataclass
class Rollout:
    nested_return: int
    score: int
    steps: int


@dataclass
class TabularResult:
    q: TabularQ
    rollout: Rollout


def tabular_state(arena: Arena):
    s = arena.state
    return (s.pos[0], s.pos[1], s.blocks_remaining)


def greedy_rollout(q: TabularQ, arena: Arena, material: Material) -> Rollout:
    arena.reset()
    arena.set_material(material)
    total = 0
    done = False
    while not done:
        _, r, done = arena.step(q.greedy(tabular_state(arena)))
        total += r
    return Rollout(total, arena.main_reward(), arena.state.steps_taken)


def tabular_q_learn(
    spec: MiniArenaSpec,
    episodes: int,
    alpha: float,
    gamma: float,
    schedule: EpsilonSchedule | None = None,
    seed: int = 0,
) -> TabularResult:
    """Q-learning on the mini arena with state (x, y, blocks remaining)."""
    rng = np.random.default_rng(seed)
    schedule = schedule or EpsilonSchedule(1.0, 0.01, max(1, episodes // 2))
    arena = Arena(spec.shape(), spec.max_steps)
    q = TabularQ(len(NestedAction), alpha, gamma)
    for e in range(episodes):
        eps = schedule(e)
        arena.reset()
        arena.set_material(spec.material)
        s = tabular_state(arena)
        done = False
        while not done:
            if rng.random() < eps:
                a = int(rng.integers(len(NestedAction)))
            else:
                a = q.greedy(s)
            _, r, done = arena.step(a)
            s_next = tabular_state(arena)
            q.update(s, a, r, s_next)
            s = s_next
    return TabularResult(q, greedy_rollout(q, arena, spec.material))
