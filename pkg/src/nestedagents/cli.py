"""Command-line front end: ``nested-agents {train,compare,oracle,plot,gradcheck}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .approximator import gradient_check
from .arena import get_shape
from .config import FRAMEWORKS, ExperimentConfig
from .errors import ConfigError
from .harness import final_window_mean, read_curves, run_experiment, write_results
from .oracle import plan_optimal
from .plot import mean_curves, render_svg

log = logging.getLogger("nestedagents")

# config keys settable from the command line (flag = key with '-' for '_')
FLAG_KEYS = (
    "scenario",
    "framework",
    "episodes",
    "eval_every",
    "trials",
    "seed",
    "jobs",
    "shape_file",
    "gamma",
    "tau",
    "lr",
    "eps_main_floor",
    "eps_nested_floor",
    "eps_main_horizon",
    "eps_nested_horizon",
    "dqn_target",
    "front_cell_drop",
    "max_steps",
    "replay_capacity",
    "batch_size",
    "warmup",
    "hidden_width",
    "hidden_layers",
    "eps_start",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _default(key: str):
    cfg = ExperimentConfig()
    return getattr(getattr(cfg, config_mod.section_of(key)), key)


def _add_experiment_flags(p: argparse.ArgumentParser, with_framework: bool = True):
    def add(flag, key, **kw):
        kw.setdefault("help", "")
        kw["help"] += f" (default: {_default(key)})"
        p.add_argument(flag, dest=key, default=None, **kw)

    add("--scenario", "scenario", choices=["line", "zigzag", "diamond"], help="built-in design")
    if with_framework:
        add("--framework", "framework", choices=FRAMEWORKS, help="agent architecture")
    add("--episodes", "episodes", type=int, help="training episodes per trial")
    add("--eval-every", "eval_every", type=int, help="episodes between greedy evaluations")
    add("--trials", "trials", type=int, help="independent trials")
    add("--seed", "seed", type=int, help="base seed")
    add("--jobs", "jobs", type=int, help="trials run in parallel")
    add("--shape-file", "shape_file", help="custom 15x15 mask file ('#' and '.')")
    add("--gamma", "gamma", type=float, help="discount factor")
    add("--tau", "tau", type=int, help="learner steps between target-network syncs")
    add("--lr", "lr", type=float, help="Adam learning rate")
    add("--eps-main-floor", "eps_main_floor", type=float, help="main/top agent epsilon floor")
    add("--eps-nested-floor", "eps_nested_floor", type=float, help="nested/low/flat agent epsilon floor")
    add("--eps-main-horizon", "eps_main_horizon", type=float, help="main decay horizon, fraction of episodes")
    add("--eps-nested-horizon", "eps_nested_horizon", type=float, help="nested decay horizon, fraction of episodes")
    add("--dqn-target", "dqn_target", choices=["eq3", "eq4"], help="eq3 = DQN max target, eq4 = double DQN")
    add("--max-steps", "max_steps", type=int, help="episode step cap")
    add("--replay-capacity", "replay_capacity", type=int, help="replay memory length")
    add("--batch-size", "batch_size", type=int, help="minibatch size")
    add("--warmup", "warmup", type=int, help="transitions stored before the first gradient step")
    add("--hidden-width", "hidden_width", type=int, help="units per hidden layer")
    add("--hidden-layers", "hidden_layers", type=int, help="number of tanh hidden layers")
    add("--eps-start", "eps_start", type=float, help="initial epsilon for every agent")
    add(
        "--front-cell-drop",
        "front_cell_drop",
        action=argparse.BooleanOptionalAction,
        help="place blocks in the cell ahead (+y) instead of the agent's cell",
    )
    p.add_argument("--config", type=Path, help="key = value config file; flags override it")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output directory (default: runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nested-agents", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one framework on one scenario")
    _add_experiment_flags(p)

    p = sub.add_parser("compare", help="train all three frameworks on one scenario")
    _add_experiment_flags(p, with_framework=False)

    p = sub.add_parser("oracle", help="print planner bounds for a scenario")
    p.add_argument("--scenario", default=None, choices=["line", "zigzag", "diamond"], help="(default: line)")
    p.add_argument("--shape-file", dest="shape_file", default=None)
    p.add_argument("--config", type=Path)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=None, help="(default: 500)")

    p = sub.add_parser("plot", help="render a curves CSV as an SVG line chart")
    p.add_argument("curves", type=Path)
    p.add_argument("--out", type=Path, default=None, help="output SVG (default: next to the CSV)")
    p.add_argument("--title", default="Score throughout training")

    p = sub.add_parser("gradcheck", help="backprop vs finite differences on random nets")
    p.add_argument("--trials", type=int, default=100, help="(default: 100)")
    p.add_argument("--seed", type=int, default=0, help="(default: 0)")
    p.add_argument("--tol", type=float, default=1e-4, help="(default: 0.0001)")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {}
    for key in FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    cfg = cfg.replace(**overrides)
    if cfg.arena.shape_file is not None and not Path(cfg.arena.shape_file).is_file():
        raise UsageError(f"shape file not found: {cfg.arena.shape_file}")
    get_shape(cfg.arena.scenario, cfg.arena.shape_file)
    return cfg.validate()


def _report(results):
    for res in results:
        h = res.config.harness
        alive = [c for c in res.curves if not c.failed]
        if alive:
            finals = [final_window_mean(c) for c in alive]
            print(f"{h.framework:>12}: final-10 mean {sum(finals) / len(finals):.2f} over {len(alive)} trials")
        if res.failed_trials:
            print(f"{h.framework:>12}: failed trials {res.failed_trials}", file=sys.stderr)


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    res = run_experiment(cfg)
    curves, summary = write_results([res], args.out)
    _report([res])
    print(f"wrote {curves} and {summary}")
    return 0


def cmd_compare(args) -> int:
    cfg = resolve_config(args)
    results = [run_experiment(cfg.replace(framework=fw)) for fw in FRAMEWORKS]
    curves, summary = write_results(results, args.out)
    svg = args.out / "curves.svg"
    svg.write_text(render_svg(mean_curves(read_curves(curves)), title=f"Score throughout training ({cfg.arena.scenario})"))
    _report(results)
    print(f"wrote {curves}, {summary} and {svg}")
    return 0


def cmd_oracle(args) -> int:
    cfg = resolve_config(args)
    shape = get_shape(cfg.arena.scenario, cfg.arena.shape_file)
    res = plan_optimal(shape, cfg.arena.max_steps)
    print(f"scenario {shape.name}")
    print(f"shape_cells {shape.cell_count}")
    print(f"max_main_reward {res.max_main_reward}")
    print(f"max_nested_return {res.max_nested_return}")
    print(f"min_steps {res.min_steps}")
    print(f"optimal_material {res.optimal_material.name.lower()}")
    if not res.proven:
        print("bound unproven: search budget exhausted")
    return 0


def cmd_plot(args) -> int:
    if not args.curves.is_file():
        raise UsageError(f"file not found: {args.curves}")
    try:
        rows = read_curves(args.curves)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not rows:
        raise UsageError(f"{args.curves}: no data rows")
    out = args.out or args.curves.with_suffix(".svg")
    out.write_text(render_svg(mean_curves(rows), title=args.title))
    print(f"wrote {out}")
    return 0


def cmd_gradcheck(args) -> int:
    errors = gradient_check(args.trials, args.seed)
    worst = max(errors)
    ok = worst < args.tol
    print(f"{len(errors)} random nets, max relative error {worst:.3e} ({'PASS' if ok else 'FAIL'} at {args.tol:g})")
    return 0 if ok else 1


COMMANDS = {
    "train": cmd_train,
    "compare": cmd_compare,
    "oracle": cmd_oracle,
    "plot": cmd_plot,
    "gradcheck": cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"nested-agents {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
