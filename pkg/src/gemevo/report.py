"""CSV reports derived from a finished run's log stream.

Every number here is recomputed from ``log.jsonl`` (plus the optional
``hv_baseline.json``), so reports are reproducible from the log alone.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from .config import load_config
from .core import GemError
from .evaluators import combined_cost
from .metrics import hypervolume_2d, normalize_fronts, vocabulary_overlap
from .runio import CONFIG, HV_BASELINE, read_log

log = logging.getLogger(__name__)


class IncompleteRun(GemError):
    pass


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def final_costs(records, config) -> list:
    """Combined cost of every record re-scaled with the min-max ranges of the whole log.

    The engine's normalizers observe every evaluated phenotype, so these
    ranges equal its final state; costs logged at evaluation time used the
    narrower ranges known back then and are not comparable across generations.
    """
    out = []
    if not records:
        return out
    raw = np.asarray([r["phys_raw"] for r in records], dtype=float)
    for r in records:
        t = config.task_list[r["task_index"] - 1]
        sign = np.where([s == "maximize" for s in config.senses(t)], -1.0, 1.0)
        o = raw * sign
        lo, hi = o.min(0), o.max(0)
        x = np.asarray(r["phys_raw"]) * sign
        norm = np.where(hi > lo, (x - lo) / np.where(hi > lo, hi - lo, 1.0), 0.5)
        out.append(combined_cost(norm, r["visual_score"], config.alpha))
    return out


def fitness_trend(records, config) -> list:
    """Per-generation mean and population variance of combined cost for generations 1..G.

    Costs are re-scaled with :func:`final_costs` so generations share one scale.
    """
    tasks = config.task_list
    by = defaultdict(list)
    for r, c in zip(records, final_costs(records, config)):
        by[(r["generation"], r["task_index"])].append(c)
    header = ["generation"]
    for t in tasks:
        header += [f"task_{t.index}_mean", f"task_{t.index}_var"]
    rows = [header]
    for g in range(1, config.max_generations + 1):
        row = [g]
        for t in tasks:
            v = by.get((g, t.index))
            row += [float(np.mean(v)), float(np.var(v))] if v else ["", ""]
        rows.append(row)
    return rows


def novelty_fractions(records, tasks) -> list:
    rows = [["task_index", "domain", "scored", "novel", "fraction"]]
    for t in tasks:
        ns = [r["novelty_score"] for r in records if r["task_index"] == t.index and r.get("novelty_score") is not None]
        novel = sum(1 for x in ns if x > 0)
        rows.append([t.index, t.domain_phrase, len(ns), novel, novel / len(ns) if ns else ""])
    return rows


def _feasible_for(row, k, config) -> bool:
    return config.visual_lower <= row["visual_scores"][k] <= config.visual_upper


def hypervolumes(records, baseline, config) -> list:
    """Run vs baseline hypervolume per task, reference (1, 1).

    Both point sets hold the designs tagged to the task whose visual score
    against it lies within the visual bounds; infeasible designs would not
    count as designs of that task. The two sets are normalized jointly over
    the physical objectives.
    """
    rows = [["task_index", "domain", "run_hypervolume", "baseline_hypervolume", "run_points", "baseline_points", "note"]]
    if baseline is None:
        return rows + [["", "", "", "", "", "", "warning: no baseline sample set; hypervolume omitted"]]
    if len(config.physical_objectives) != 2:
        return rows + [["", "", "", "", "", "", "warning: hypervolume needs exactly two physical objectives"]]
    for k, t in enumerate(config.task_list):
        run = [r["phys_raw"] for r in records if r["task_index"] == t.index and _feasible_for(r, k, config)]
        base = [b["phys_raw"] for b in baseline["rows"] if b["task_index"] == t.index and _feasible_for(b, k, config)]
        if not run or not base:
            rows.append([t.index, t.domain_phrase, "", "", len(run), len(base), "warning: no feasible points"])
            continue
        mx = tuple(s == "maximize" for s in config.senses(t))
        r_n, b_n = normalize_fronts(run, base, maximize=mx)
        rows.append([t.index, t.domain_phrase, hypervolume_2d(r_n), hypervolume_2d(b_n), len(run), len(base), ""])
    return rows


def write_report(out_dir) -> dict:
    """Write fitness_trend.csv, hypervolume.csv, novelty.csv and vocabulary.csv under ``<out>/report``.

    Raises:
        IncompleteRun: the log holds fewer generations than the config asks for.
    """
    out = Path(out_dir)
    if not (out / CONFIG).is_file():
        raise IncompleteRun(f"{out} is not a run directory")
    config = load_config(out / CONFIG)
    records = read_log(out)
    gens = {r["generation"] for r in records}
    if not records or max(gens) < config.max_generations:
        raise IncompleteRun(f"run in {out} stopped at generation {max(gens, default=-1)} of {config.max_generations}")
    tasks = config.task_list
    hv_path = out / HV_BASELINE
    baseline = json.loads(hv_path.read_text(encoding="utf-8")) if hv_path.is_file() else None
    if baseline is None:
        log.warning("no %s in %s; hypervolume section omitted", HV_BASELINE, out)

    by_task = {t.index: [r["descriptor"] for r in records if r["task_index"] == t.index] for t in tasks}
    vocab_rows = [["mode", "overlap"]]
    if len(tasks) >= 2:
        for mode in ("jaccard", "min"):
            vocab_rows.append([mode, vocabulary_overlap(by_task, mode=mode)])

    files = {
        "fitness_trend.csv": fitness_trend(records, config),
        "hypervolume.csv": hypervolumes(records, baseline, config),
        "novelty.csv": novelty_fractions(records, tasks),
        "vocabulary.csv": vocab_rows,
    }
    rep = out / "report"
    rep.mkdir(exist_ok=True)
    for name, rows in files.items():
        (rep / name).write_text(_csv(rows), encoding="utf-8")
    return {name: rep / name for name in files}
