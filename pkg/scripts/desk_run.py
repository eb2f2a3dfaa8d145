"""Hermetic desk run: default configuration, mock oracles, then the CSV report.

Usage: python scripts/desk_run.py [--out runs/desk] [--seed 0] [--samples 1000]
"""

import argparse
import time

from gemevo.config import RunConfig
from gemevo.report import write_report
from gemevo.runio import start_run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=1000, help="novelty baseline samples per task")
    ap.add_argument("--multi-objective", action="store_true", help="drag and lift instead of frontal area")
    args = ap.parse_args()

    cfg = RunConfig(seed=args.seed, novelty_baseline_samples=args.samples)
    if args.multi_objective:
        cfg = cfg.replace(objective_mode="multi_objective", physical_objectives=("drag_proxy", "lift_proxy"),
                          maximize={"airplane": ("lift_proxy",)})
    t0 = time.perf_counter()
    res = start_run(cfg, args.out, hv_baseline=True)
    print(f"{len(res.records)} evaluations in {time.perf_counter() - t0:.1f} s")
    for k, e in sorted(res.archive.items()):
        print(f"task {k}: best combined cost {e.combined_cost:.4f} (generation {e.generation}) {e.individual.genotype.prompt}")
    for name, path in write_report(args.out).items():
        print(f"\n{path}\n{path.read_text().rstrip()}")


if __name__ == "__main__":
    main()
