"""Nested, hierarchical and flat agent systems for the block-building arena.

Each ``run_episode_*`` function plays one episode from a freshly reset arena.
With ``train=True`` transitions are stored and learners take gradient steps;
with ``greedy=True`` every learner acts with epsilon 0.

Main-agent (and top-level) rewards are the terminal build score, used as a
one-step episodic target. When ``normalize_main_reward`` is on the learner sees
``(score - grid_cells) * main_reward_scale``; the reported score is never
rescaled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arena import Arena, Material, NestedAction
from .config import ExperimentConfig
from .ddqn import DdqnLearner, EpsilonSchedule

MAIN_OBS = 3
N_MATERIALS = len(Material)
N_NESTED = len(NestedAction)


@dataclass
class EpisodeResult:
    score: int
    nested_return: int
    steps: int
    material_chosen: Material | None
    correct: int = 0


@dataclass
class Schedules:
    main: EpsilonSchedule
    nested: EpsilonSchedule

    @classmethod
    def from_config(cls, cfg: ExperimentConfig) -> "Schedules":
        d, n = cfg.ddqn, cfg.harness.episodes
        return cls(
            EpsilonSchedule.over(n, d.eps_main_horizon, d.eps_main_floor, d.eps_start),
            EpsilonSchedule.over(n, d.eps_nested_horizon, d.eps_nested_floor, d.eps_start),
        )


class _System:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.schedules = Schedules.from_config(cfg)
        d = cfg.ddqn
        self._scale = d.main_reward_scale if d.normalize_main_reward else None

    def _learner(self, n_in: int, n_out: int, rng: np.random.Generator, main: bool = False) -> DdqnLearner:
        net, d = self.cfg.approximator, self.cfg.ddqn
        dims = [n_in] + [net.hidden_width] * net.hidden_layers + [n_out]
        return DdqnLearner.create(
            dims,
            rng,
            lr=net.lr,
            gamma=d.gamma,
            tau=d.tau,
            batch_size=d.batch_size,
            warmup=d.main_warmup if main else d.warmup,
            capacity=d.replay_capacity,
            double=d.dqn_target == "eq4",
        )

    def main_learning_reward(self, score: int, arena: Arena) -> float:
        if self._scale is None:
            return float(score)
        return (score - arena.size * arena.size) * self._scale

    @property
    def learners(self) -> list[DdqnLearner]:
        raise NotImplementedError

    def epsilons(self, episode_index: int) -> tuple[float, float]:
        return self.schedules.main(episode_index), self.schedules.nested(episode_index)


class NestedAgentSystem(_System):
    """Main agent picks the material; the nested agent sees it as an extra input."""

    framework = "nested"

    def __init__(self, cfg: ExperimentConfig, rng: np.random.Generator):
        super().__init__(cfg)
        self.main = self._learner(MAIN_OBS, N_MATERIALS, rng, main=True)
        self.nested = self._learner(MAIN_OBS + 1, N_NESTED, rng)

    @property
    def learners(self) -> list[DdqnLearner]:
        return [self.main, self.nested]


class HierarchicalAgentSystem(_System):
    """Top agent selects one of two material-bound low-level agents."""

    framework = "hierarchical"

    def __init__(self, cfg: ExperimentConfig, rng: np.random.Generator):
        super().__init__(cfg)
        self.top = self._learner(MAIN_OBS, N_MATERIALS, rng, main=True)
        self.low = [self._learner(MAIN_OBS, N_NESTED, rng) for _ in Material]

    @property
    def learners(self) -> list[DdqnLearner]:
        return [self.top, *self.low]


class FlatAgentSystem(_System):
    """One learner over materials (indices 0-1) and moves (indices 2-9)."""

    framework = "flat"

    def __init__(self, cfg: ExperimentConfig, rng: np.random.Generator):
        super().__init__(cfg)
        self.agent = self._learner(MAIN_OBS, N_MATERIALS + N_NESTED, rng)
        self.invalid_start = cfg.harness.flat_invalid_score

    @property
    def learners(self) -> list[DdqnLearner]:
        return [self.agent]

    def epsilons(self, episode_index: int) -> tuple[float, float]:
        eps = self.schedules.nested(episode_index)
        return eps, eps


SYSTEMS = {
    "nested": NestedAgentSystem,
    "hierarchical": HierarchicalAgentSystem,
    "flat": FlatAgentSystem,
}


def build_system(cfg: ExperimentConfig, rng: np.random.Generator) -> _System:
    return SYSTEMS[cfg.harness.framework](cfg, rng)


def _build_loop(arena, learner, obs_fn, eps, train, rng):
    """Shared low-level control loop; returns the undiscounted r_N sum."""
    total = 0
    s = obs_fn()
    done = arena.state.terminal
    while not done:
        a = learner.act(s, eps, rng)
        _, r, done = arena.step(a)
        total += r
        s_next = obs_fn()
        if train:
            learner.remember(s, a, r, s_next, done)
            learner.train_step(rng)
        s = s_next
    return total


def _finish_main(sys, learner, arena, s_main, a_main, train, rng) -> int:
    score = arena.main_reward()
    if train:
        learner.remember(s_main, a_main, sys.main_learning_reward(score, arena), arena.observe_main(), True)
        learner.train_step(rng)
    return score


def run_episode_nested(
    sys: NestedAgentSystem,
    arena: Arena,
    episode_index: int,
    train: bool,
    rng: np.random.Generator,
    greedy: bool = False,
) -> EpisodeResult:
    eps_main, eps_nested = (0.0, 0.0) if greedy else sys.epsilons(episode_index)
    s_main = arena.observe_main()
    a_main = sys.main.act(s_main, eps_main, rng)
    material = Material(a_main)
    arena.set_material(material)
    nested_return = _build_loop(
        arena, sys.nested, lambda: arena.observe_nested(material), eps_nested, train, rng
    )
    score = _finish_main(sys, sys.main, arena, s_main, a_main, train, rng)
    return EpisodeResult(score, nested_return, arena.state.steps_taken, material, arena.correct_placements())


def run_episode_hierarchical(
    sys: HierarchicalAgentSystem,
    arena: Arena,
    episode_index: int,
    train: bool,
    rng: np.random.Generator,
    greedy: bool = False,
) -> EpisodeResult:
    eps_top, eps_low = (0.0, 0.0) if greedy else sys.epsilons(episode_index)
    s_top = arena.observe_main()
    choice = sys.top.act(s_top, eps_top, rng)
    material = Material(choice)
    arena.set_material(material)
    nested_return = _build_loop(arena, sys.low[choice], arena.observe_main, eps_low, train, rng)
    score = _finish_main(sys, sys.top, arena, s_top, choice, train, rng)
    return EpisodeResult(score, nested_return, arena.state.steps_taken, material, arena.correct_placements())


def run_episode_flat(
    sys: FlatAgentSystem,
    arena: Arena,
    episode_index: int,
    train: bool,
    rng: np.random.Generator,
    greedy: bool = False,
) -> EpisodeResult:
    """Flat agent over the combined action set.

    A first action that is not a material ends the episode at once. Material
    actions after that are no-ops that still spend a step.
    """
    eps = 0.0 if greedy else sys.epsilons(episode_index)[1]
    agent = sys.agent
    s = arena.observe_main()
    a = agent.act(s, eps, rng)
    if a >= N_MATERIALS:
        score = 0 if sys.invalid_start == "zero" else arena.indicator_sum()
        if train:
            agent.remember(s, a, sys.main_learning_reward(score, arena), s, True)
            agent.train_step(rng)
        return EpisodeResult(score, 0, 1, None, 0)

    material = Material(a)
    arena.set_material(material)
    # the material pick itself changes nothing observable
    if train:
        agent.remember(s, a, 0.0, s, False)
        agent.train_step(rng)
    nested_return = 0
    done = arena.state.terminal
    while not done:
        a = agent.act(s, eps, rng)
        if a < N_MATERIALS:
            _, r, done = arena.idle()
        else:
            _, r, done = arena.step(a - N_MATERIALS)
        nested_return += r
        s_next = arena.observe_main()
        if train:
            learn_r = float(r)
            if done:
                learn_r += sys.main_learning_reward(arena.main_reward(), arena)
            agent.remember(s, a, learn_r, s_next, done)
            agent.train_step(rng)
        s = s_next
    score = arena.main_reward()
    return EpisodeResult(score, nested_return, arena.state.steps_taken + 1, material, arena.correct_placements())


RUNNERS = {
    "nested": run_episode_nested,
    "hierarchical": run_episode_hierarchical,
    "flat": run_episode_flat,
}


def run_episode(sys: _System, arena: Arena, episode_index: int, train: bool, rng, greedy: bool = False) -> EpisodeResult:
    arena.reset()
    return RUNNERS[sys.framework](sys, arena, episode_index, train, rng, greedy)
