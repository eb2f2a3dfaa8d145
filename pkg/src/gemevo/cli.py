"""Command line: ``gemevo run | resume | report | baseline | hv``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .core import GemError, make_tasks
from .metrics import hypervolume_2d
from .report import write_report
from .runio import load_or_build_baseline, make_oracles, resume_run, start_run

log = logging.getLogger("gemevo")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        changes["novelty_baseline_samples"] = args.samples
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _config(args)
    res = start_run(cfg, args.out, args.oracles, stop_after=args.stop_after, hv_baseline=args.hv_baseline)
    print(f"run {res.run_id}: {len(res.records)} evaluations, generation "
          f"{res.generation_stats[-1]['generation']}/{cfg.max_generations} -> {args.out}")
    for k, e in sorted(res.archive.items()):
        print(f"  task {k} best combined cost {e.combined_cost:.4f}: {e.individual.genotype.prompt}")
    return 0


def cmd_resume(args) -> int:
    res = resume_run(args.out, args.oracles, stop_after=args.stop_after)
    if res is None:
        print(f"{args.out}: run already complete")
    else:
        print(f"resumed {res.run_id}: {len(res.records)} new evaluations")
    return 0


def cmd_report(args) -> int:
    for name, path in write_report(args.out).items():
        print(path)
    return 0


def cmd_baseline(args) -> int:
    cfg = _config(args)
    tasks = {t.domain_phrase: t for t in cfg.task_list}
    task = tasks.get(args.task) or make_tasks([args.task])[0]
    B = args.samples if args.samples is not None else cfg.novelty_baseline_samples
    b, reused = load_or_build_baseline(args.out, make_oracles(cfg, args.oracles), task, B, cfg.seed)
    print(f"{'reused' if reused else 'built'} baseline for {b.task_label!r}: mean {b.baseline_mean:.6f} over {B} samples")
    return 0


def cmd_hv(args) -> int:
    pts = []
    with open(args.points, newline="") as fh:
        for row in csv.reader(fh):
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                continue  # header or blank line
    print(repr(hypervolume_2d(pts, tuple(args.ref))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gemevo", description="Multitask prompt evolution for 3D shape design.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="YAML run configuration (defaults apply when omitted)")
            sp.add_argument("--seed", type=int, help="override the configured seed")
            sp.add_argument("--samples", type=int, help="novelty baseline samples B")
        sp.add_argument("--out", required=True, help="run output directory")
        sp.add_argument("--oracles", choices=("mock", "remote"), default="mock")

    r = sub.add_parser("run", help="run evolution")
    common(r)
    r.add_argument("--workers", type=int)
    r.add_argument("--hv-baseline", action="store_true", help="also sample an equal-budget random-descriptor baseline")
    r.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    r.set_defaults(func=cmd_run)

    rs = sub.add_parser("resume", help="continue an interrupted run")
    common(rs, config=False)
    rs.add_argument("--stop-after", type=int, help=argparse.SUPPRESS)
    rs.set_defaults(func=cmd_resume)

    rp = sub.add_parser("report", help="write CSV reports for a finished run")
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_report)

    b = sub.add_parser("baseline", help="build or reuse a novelty baseline")
    common(b)
    b.add_argument("--task", required=True, help="domain phrase, e.g. car")
    b.set_defaults(func=cmd_baseline)

    h = sub.add_parser("hv", help="hypervolume of a CSV of 2-D points")
    h.add_argument("points")
    h.add_argument("--ref", type=float, nargs=2, default=(1.0, 1.0))
    h.set_defaults(func=cmd_hv)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GemError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
