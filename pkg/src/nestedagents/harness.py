"""Multi-trial training runs with periodic greedy evaluation."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .arena import Arena, get_shape
from .config import ExperimentConfig
from .errors import TrainingError
from .frameworks import build_system, run_episode

log = logging.getLogger(__name__)

CURVE_HEADER = ("scenario", "framework", "trial", "episode", "score", "eps_main", "eps_nested")
SUMMARY_HEADER = ("scenario", "framework", "episode", "mean", "std", "min", "max", "trials_used")


@dataclass
class CurvePoint:
    episode: int
    score: float
    eps_main: float
    eps_nested: float


@dataclass
class LearningCurve:
    trial: int
    framework: str
    scenario: str
    points: list[CurvePoint] = field(default_factory=list)
    failed: bool = False
    error: str | None = None

    @property
    def episodes(self) -> list[int]:
        return [p.episode for p in self.points]

    @property
    def scores(self) -> list[float]:
        return [p.score for p in self.points]


@dataclass
class SummaryRow:
    episode: int
    mean: float
    std: float
    min: float
    max: float
    trials_used: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curves: list[LearningCurve]
    summary: list[SummaryRow]

    @property
    def failed_trials(self) -> list[int]:
        return [c.trial for c in self.curves if c.failed]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for each (seed, trial) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def eval_points(episodes: int, eval_every: int) -> list[int]:
    pts = list(range(eval_every, episodes + 1, eval_every))
    if not pts or pts[-1] != episodes:
        pts.append(episodes)
    return pts


def scenario_name(cfg: ExperimentConfig) -> str:
    if cfg.arena.shape_file:
        return Path(cfg.arena.shape_file).stem
    return cfg.arena.scenario


def make_arena(cfg: ExperimentConfig) -> Arena:
    shape = get_shape(cfg.arena.scenario, cfg.arena.shape_file)
    return Arena(shape, cfg.arena.max_steps, cfg.arena.front_cell_drop)


def evaluate(system, arena: Arena, rng: np.random.Generator, episodes: int = 1) -> float:
    """Mean greedy score over ``episodes`` rollouts; learners are not touched."""
    scores = [run_episode(system, arena, 0, train=False, rng=rng, greedy=True).score for _ in range(episodes)]
    return math.fsum(scores) / len(scores)


def run_trial(cfg: ExperimentConfig, trial: int) -> LearningCurve:
    h = cfg.harness
    rng = trial_rng(h.seed, trial)
    arena = make_arena(cfg)
    system = build_system(cfg, rng)
    curve = LearningCurve(trial, h.framework, scenario_name(cfg))
    checkpoints = set(eval_points(h.episodes, h.eval_every))
    try:
        for e in range(h.episodes):
            run_episode(system, arena, e, train=True, rng=rng)
            if e + 1 in checkpoints:
                eps_main, eps_nested = system.epsilons(e)
                score = evaluate(system, arena, rng, h.eval_episodes)
                curve.points.append(CurvePoint(e + 1, score, eps_main, eps_nested))
    except TrainingError as exc:
        log.warning("trial %d failed: %s", trial, exc)
        curve.failed = True
        curve.error = str(exc)
    return curve


def _run_trial_args(args):
    return run_trial(*args)


def aggregate(curves: Sequence[LearningCurve]) -> list[SummaryRow]:
    """Per-episode mean, population std, min and max over surviving trials."""
    alive = [c for c in curves if not c.failed]
    if not alive:
        return []
    index = alive[0].episodes
    for c in alive[1:]:
        if c.episodes != index:
            raise ValueError(f"trial {c.trial} has episode indices that differ from trial {alive[0].trial}")
    rows = []
    for j, ep in enumerate(index):
        vals = sorted(c.points[j].score for c in alive)
        n = len(vals)
        mean = math.fsum(vals) / n
        var = math.fsum((v - mean) ** 2 for v in vals) / n
        rows.append(SummaryRow(ep, mean, math.sqrt(var), vals[0], vals[-1], n))
    return rows


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cfg.validate()
    h = cfg.harness
    jobs = [(cfg, t) for t in range(h.trials)]
    if h.jobs > 1 and h.trials > 1:
        with ProcessPoolExecutor(max_workers=h.jobs) as pool:
            curves = list(pool.map(_run_trial_args, jobs))
    else:
        curves = [run_trial(*j) for j in jobs]
    return ExperimentResult(cfg, curves, aggregate(curves))


def _fmt(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return format(x, ".10g")


def curves_csv(curves: Iterable[LearningCurve]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for c in sorted(curves, key=lambda c: c.trial):
        for p in c.points:
            w.writerow((c.scenario, c.framework, c.trial, p.episode, _fmt(p.score), _fmt(p.eps_main), _fmt(p.eps_nested)))
    return out.getvalue()


def summary_csv(results: Iterable[ExperimentResult]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for res in results:
        scen, fw = scenario_name(res.config), res.config.harness.framework
        for r in res.summary:
            w.writerow((scen, fw, r.episode, _fmt(r.mean), _fmt(r.std), _fmt(r.min), _fmt(r.max), r.trials_used))
    return out.getvalue()


def write_results(results: Sequence[ExperimentResult], out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves_path = out_dir / "curves.csv"
    summary_path = out_dir / "summary.csv"
    text = "".join(
        curves_csv(r.curves) if i == 0 else curves_csv(r.curves).split("\n", 1)[1]
        for i, r in enumerate(results)
    )
    curves_path.write_text(text)
    summary_path.write_text(summary_csv(results))
    return curves_path, summary_path


def read_curves(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CURVE_HEADER:
            raise ValueError(f"{path}: not a curves file (header {reader.fieldnames})")
        return list(reader)


def final_window_mean(curve: LearningCurve, window: int = 10) -> float:
    tail = curve.scores[-window:]
    return math.fsum(tail) / len(tail)
