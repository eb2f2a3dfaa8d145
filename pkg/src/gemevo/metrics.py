"""Novelty score, 2-D hypervolume and vocabulary overlap."""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import GemError, PhenotypeMesh, Task
from .evaluators import visual_score
from .seeding import derive_seed
from .tables import stopwords as shipped_stopwords
from .tables import suffix_rules

log = logging.getLogger(__name__)


class TaskMismatch(GemError):
    pass


class EmptyInput(GemError):
    pass


class InsufficientTasks(GemError):
    pass


# ----------------------------------------------------------------------------
# novelty


@dataclass(frozen=True)
class NoveltyBaseline:
    task_index: int
    task_label: str
    baseline_mean: float
    sample_count: int
    scores: tuple = field(default=(), repr=False)
    generator: str = ""
    visual: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("a baseline needs at least one sample")

    @property
    def cache_key(self) -> tuple:
        return (self.task_label, self.generator, self.visual, self.sample_count, self.seed)

    def to_dict(self) -> dict:
        return {"task_index": self.task_index, "task_label": self.task_label, "baseline_mean": self.baseline_mean,
                "sample_count": self.sample_count, "scores": list(self.scores), "generator": self.generator,
                "visual": self.visual, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "NoveltyBaseline":
        return cls(int(d["task_index"]), d["task_label"], float(d["baseline_mean"]), int(d["sample_count"]),
                   tuple(float(s) for s in d.get("scores", ())), d.get("generator", ""), d.get("visual", ""),
                   int(d.get("seed", 0)))


def build_novelty_baseline(generator, vlm, task: Task, B: Optional[int] = None, seed: int = 0,
                           executor=None) -> NoveltyBaseline:
    """Mean visual score of ``B`` designs generated from the bare task label (default B=1000)."""
    B = 1000 if B is None else int(B)
    if B < 1:
        raise ValueError("B must be >= 1")
    label = task.task_label

    def sample(i):
        mesh = generator.generate(label, derive_seed(seed, "novelty-baseline", task.index, i))
        return visual_score(vlm, mesh, label)

    if executor is None or getattr(generator, "serial", False) or getattr(vlm, "serial", False):
        scores = [sample(i) for i in range(B)]
    else:
        scores = list(executor.map(sample, range(B)))
    return NoveltyBaseline(task.index, label, float(np.mean(scores)), B, tuple(scores),
                           generator.name, vlm.name, int(seed))


def novelty_score(x: PhenotypeMesh, task: Task, vlm, baseline: NoveltyBaseline) -> float:
    """Visual score against the task label minus the baseline mean; positive means novel."""
    if baseline.task_index != task.index:
        raise TaskMismatch(f"baseline is for task {baseline.task_index}, not {task.index}")
    return visual_score(vlm, x, task.task_label) - baseline.baseline_mean


def is_novel(ns: float) -> bool:
    return ns > 0


# ----------------------------------------------------------------------------
# hypervolume


def hypervolume_2d(points, ref=(1.0, 1.0)) -> float:
    """Area dominated by ``points`` (minimization) and bounded by ``ref``.

    Points beyond the reference in either coordinate are dropped with a warning.

    Raises:
        EmptyInput: nothing is left after dropping.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    r = np.asarray(ref, dtype=float)
    bad = (p > r).any(axis=1)
    if bad.any():
        log.warning("dropping %d point(s) outside the reference point %s", int(bad.sum()), tuple(r))
        p = p[~bad]
    if len(p) == 0:
        raise EmptyInput("no points left for the hypervolume")
    p = p[np.lexsort((p[:, 1], p[:, 0]))]
    area, best_y = 0.0, r[1]
    for i, (x, y) in enumerate(p):
        if y < best_y:
            nxt = r[0]
            # the strip ends where the next point with a lower y begins
            for x2, y2 in p[i + 1:]:
                if y2 < y:
                    nxt = x2
                    break
            area += (nxt - x) * (r[1] - y)
            best_y = y
    return float(area)


def normalize_fronts(*sets, maximize=(False, False)):
    """Jointly min-max scale several (n, 2) point sets to [0, 1]; maximized columns are negated first."""
    arrays = [np.asarray(s, dtype=float).reshape(-1, 2) * np.where(maximize, -1.0, 1.0) for s in sets]
    allp = np.concatenate(arrays)
    lo, hi = allp.min(0), allp.max(0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return [(a - lo) / span for a in arrays]


# ----------------------------------------------------------------------------
# vocabulary overlap

_LETTERS = re.compile(r"[a-z]+")


def base_form(word: str) -> str:
    """Strip one inflectional suffix using the shipped rule table."""
    rules, keep = suffix_rules()
    if word in keep:
        return word
    for suffix, repl, min_stem in rules:
        if word.endswith(suffix) and len(word) - len(suffix) >= min_stem:
            if suffix == "s" and word.endswith(("ss", "us", "is")):
                continue
            return word[: len(word) - len(suffix)] + repl
    return word


def vocabulary(prompts: Iterable[str], stopwords=None) -> set[str]:
    stop = shipped_stopwords() if stopwords is None else frozenset(stopwords)
    out = set()
    for p in prompts:
        for w in _LETTERS.findall(p.lower()):
            if w not in stop:
                out.add(base_form(w))
    return out


def vocabulary_overlap(prompts_by_task: Mapping, stopwords=None, mode: str = "jaccard") -> float:
    """Overlap between per-task vocabularies, averaged over task pairs.

    ``mode="jaccard"`` is |A & B| / |A | B|; ``mode="min"`` divides by the
    smaller set instead.
    """
    groups = [list(v) for v in prompts_by_task.values()]
    if len(groups) < 2 or any(not g for g in groups):
        raise InsufficientTasks("need at least two tasks with at least one prompt each")
    if mode not in ("jaccard", "min"):
        raise ValueError(f"unknown overlap mode {mode!r}")
    vocabs = [vocabulary(g, stopwords) for g in groups]
    vals = []
    for a, b in itertools.combinations(vocabs, 2):
        denom = len(a | b) if mode == "jaccard" else min(len(a), len(b))
        vals.append(len(a & b) / denom if denom else 1.0)
    return float(np.mean(vals))
