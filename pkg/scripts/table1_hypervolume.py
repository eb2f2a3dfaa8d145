"""Hypervolume of evolved runs vs equal-budget random-descriptor sampling over many seeds.

Multi-objective mock runs (drag and lift proxies, airplane maximizes lift).
Prints one line per seed and the number of seeds where the run wins on
every task.

Usage: python scripts/table1_hypervolume.py [--seeds 20] [--generations 20] [--workers 4]
"""

import argparse
from concurrent.futures import ProcessPoolExecutor

from gemevo.config import RunConfig
from gemevo.emt import run_evolution
from gemevo.report import hypervolumes
from gemevo.runio import hv_baseline, make_oracles


def one(args):
    seed, generations = args
    cfg = RunConfig(seed=seed, max_generations=generations, objective_mode="multi_objective",
                    physical_objectives=("drag_proxy", "lift_proxy"), maximize={"airplane": ("lift_proxy",)},
                    novelty_baseline_samples=0)
    oracles = make_oracles(cfg)
    res = run_evolution(cfg, oracles)
    return seed, hypervolumes(res.records, hv_baseline(cfg, oracles), cfg)[1:]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--generations", type=int, default=20)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()
    wins = 0
    print("seed  task      run_hv  base_hv  run_pts  base_pts")
    with ProcessPoolExecutor(args.workers) as ex:
        for seed, rows in ex.map(one, [(s, args.generations) for s in range(args.seeds)]):
            ok = all(r[2] != "" and r[2] > r[3] for r in rows)
            wins += ok
            for r in rows:
                print(f"{seed:4d}  {r[1]:<8} {r[2]:7.4f}  {r[3]:7.4f}  {r[4]:7d}  {r[5]:8d}  {'win' if r[2] > r[3] else 'loss'}")
    print(f"run beats baseline on every task for {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
