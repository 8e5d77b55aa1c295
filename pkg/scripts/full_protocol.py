"""Full-length protocol: every framework on every built-in design, 3000 episodes x 10 trials.

Slow on one core (hours); use --jobs to spread trials over processes.

    python scripts/full_protocol.py --jobs 8 --out runs/full
"""
import argparse
from pathlib import Path

from nestedagents.config import FRAMEWORKS, ExperimentConfig
from nestedagents.harness import read_curves, run_experiment, write_results
from nestedagents.plot import mean_curves, render_svg


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--scenarios", nargs="+", default=["line", "zigzag", "diamond"])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("runs/full"))
    args = p.parse_args()

    for scenario in args.scenarios:
        base = ExperimentConfig().replace(scenario=scenario, seed=args.seed, jobs=args.jobs)
        results = [run_experiment(base.replace(framework=fw)) for fw in FRAMEWORKS]
        out = args.out / scenario
        curves, summary = write_results(results, out)
        (out / "curves.svg").write_text(
            render_svg(mean_curves(read_curves(curves)), title=f"Score throughout training ({scenario})")
        )
        print(f"{scenario}: wrote {curves} and {summary}")


if __name__ == "__main__":
    main()
