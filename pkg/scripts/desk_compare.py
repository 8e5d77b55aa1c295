"""Reduced-scale comparison of the three frameworks on the line design.

    python scripts/desk_compare.py --out runs/desk
"""
import argparse
import time
from pathlib import Path

from nestedagents.config import FRAMEWORKS, ExperimentConfig
from nestedagents.harness import final_window_mean, read_curves, run_experiment, write_results
from nestedagents.plot import mean_curves, render_svg


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--scenario", default="line")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("runs/desk"))
    args = p.parse_args()

    base = ExperimentConfig().replace(
        scenario=args.scenario, episodes=args.episodes, trials=args.trials, seed=args.seed, jobs=args.jobs
    )
    results, finals = [], {}
    t0 = time.perf_counter()
    for fw in FRAMEWORKS:
        res = run_experiment(base.replace(framework=fw))
        results.append(res)
        finals[fw] = [final_window_mean(c) for c in res.curves if not c.failed]
        print(f"{fw:>12}: {[round(x, 1) for x in finals[fw]]}  mean {sum(finals[fw]) / len(finals[fw]):.2f}")
    curves, _ = write_results(results, args.out)
    (args.out / "curves.svg").write_text(render_svg(mean_curves(read_curves(curves))))

    wins = sum(n > f for n, f in zip(finals["nested"], finals["flat"]))
    print(f"nested > flat in {wins}/{len(finals['nested'])} paired seeds")
    print(f"elapsed {(time.perf_counter() - t0) / 60:.1f} min, results in {args.out}")


if __name__ == "__main__":
    main()
