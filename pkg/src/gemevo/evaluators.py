"""Physical and visual evaluation, normalization, and objective aggregation."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .core import GemError, OracleFailure, PhenotypeMesh, RawEvaluation
from .geometry import FLOW_AXIS, UP_AXIS, drag_proxy, fit_unit_cube, lift_proxy, projected_frontal_area
from .meshio import write_mesh
from .remote import env_endpoint, post_json
from .tables import domain_tags

MINIMIZE, MAXIMIZE = "minimize", "maximize"
# The geometric backend is a heuristic stand-in for a flow solver.
PHYSICAL_BACKEND = "geometric-heuristic"


class AlphaOutOfRange(GemError):
    pass


class BoundsInvalid(GemError):
    pass


# ----------------------------------------------------------------------------
# visual oracles


class VisualOracle(Protocol):
    name: str

    def score(self, mesh: PhenotypeMesh, target: str) -> float: ...


_WORD_RE = re.compile(r"[a-z]+")
_ARTICLES = {"a", "an", "the"}


@dataclass(frozen=True)
class TagOverlapVisualOracle:
    """Deterministic stand-in for a vision-language scorer.

    score = 0.8 * overlap + 0.2 * proportion conformity, where overlap is the
    fraction of the phenotype's provenance tags found in the target domain's
    tag set and conformity is ``exp(-L1 distance)`` between the log bounding-box
    ratios (width/length, height/length) and the domain prototype. Unknown
    domains get conformity 0.5.
    """

    name: str = "tag-overlap"
    tag_weight: float = 0.8
    serial: bool = False

    def _domain(self, target: str):
        words = [w for w in _WORD_RE.findall(target.lower()) if w not in _ARTICLES]
        table = domain_tags()
        tags, proto = set(words), None
        for w in words:
            if w in table:
                ratios, wtags = table[w]
                tags |= wtags
                proto = proto or ratios
        return tags, proto

    def score(self, mesh: PhenotypeMesh, target: str) -> float:
        mesh.require_valid()
        dtags, proto = self._domain(target)
        tags = set(mesh.provenance.tags)
        overlap = len(tags & dtags) / len(tags) if tags else 0.0
        if proto is None:
            conformity = 0.5
        else:
            ext = np.ptp(mesh.vertices, axis=0)
            ratios = ext[1:] / max(ext[0], 1e-12)
            conformity = float(np.exp(-np.abs(np.log(np.maximum(ratios, 1e-12) / np.asarray(proto))).sum()))
        s = self.tag_weight * overlap + (1.0 - self.tag_weight) * conformity
        return float(min(1.0, max(0.0, s)))


@dataclass
class RemoteVisualOracle:
    """HTTP/JSON visual scorer.

    Request ``{"task_label", "mesh_obj", "mesh_sha256"}``, response ``{"score"}``.
    Endpoint and key come from ``GEM_VLM_ENDPOINT`` / ``GEM_VLM_KEY`` unless given.
    """

    endpoint: str | None = None
    key: str | None = None
    timeout: float = 120.0
    name: str = "remote-vlm"
    serial: bool = False
    deterministic: bool = False

    def __post_init__(self):
        if self.endpoint is None:
            self.endpoint, self.key = env_endpoint("GEM_VLM_ENDPOINT", "GEM_VLM_KEY")

    def score(self, mesh: PhenotypeMesh, target: str) -> float:
        obj = write_mesh(mesh, "obj")
        reply = post_json(
            self.endpoint,
            {"task_label": target, "mesh_obj": obj.decode("ascii"), "mesh_sha256": hashlib.sha256(obj).hexdigest()},
            self.key,
            self.timeout,
        )
        try:
            s = float(reply["score"])
        except (KeyError, TypeError, ValueError):
            raise OracleFailure(f"malformed visual response: {reply!r}") from None
        if not np.isfinite(s):
            raise OracleFailure("visual score is not finite")
        return min(1.0, max(0.0, s))


def visual_score(oracle: VisualOracle, mesh: PhenotypeMesh, task) -> float:
    """Score of ``mesh`` against a Task (its domain phrase) or a free text label, clamped to [0, 1]."""
    target = task if isinstance(task, str) else task.domain_phrase
    s = float(oracle.score(mesh, target))
    return min(1.0, max(0.0, s))


# ----------------------------------------------------------------------------
# physics


def physical_raw(mesh: PhenotypeMesh, objectives, resolution: int = 512) -> tuple[float, ...]:
    """Raw geometric scores of ``mesh`` after fitting it into the unit cube."""
    unit, _ = fit_unit_cube(mesh)
    area = None
    out = []
    for name in objectives:
        if name in ("frontal_area", "drag_proxy") and area is None:
            area = projected_frontal_area(unit, FLOW_AXIS, resolution)
        if name == "frontal_area":
            out.append(area)
        elif name == "drag_proxy":
            out.append(drag_proxy(unit, FLOW_AXIS, resolution, frontal_area=area))
        elif name == "lift_proxy":
            out.append(lift_proxy(unit, FLOW_AXIS, UP_AXIS))
        else:
            raise ValueError(f"unknown physical objective {name!r}")
    return tuple(float(x) for x in out)


def evaluate_raw(mesh: PhenotypeMesh, objectives, visual: VisualOracle, tasks, resolution: int = 512) -> RawEvaluation:
    """Physics once per mesh, visual score once per task."""
    phys = physical_raw(mesh, objectives, resolution)
    vis = tuple(visual_score(visual, mesh, t) for t in tasks)
    return RawEvaluation(phys, vis)


def mean_raw(evals) -> RawEvaluation:
    evals = list(evals)
    phys = tuple(float(x) for x in np.mean([e.physical_raw for e in evals], axis=0))
    vis = tuple(float(x) for x in np.mean([e.visual_scores for e in evals], axis=0))
    return RawEvaluation(phys, vis)


# ----------------------------------------------------------------------------
# normalization


@dataclass
class RunningMinMax:
    lo: float = np.inf
    hi: float = -np.inf

    @property
    def seen(self) -> bool:
        return self.lo <= self.hi

    def observe(self, values) -> None:
        v = np.asarray(list(values) if not np.isscalar(values) else [values], dtype=float)
        if v.size:
            self.lo = min(self.lo, float(v.min()))
            self.hi = max(self.hi, float(v.max()))

    def __call__(self, value: float) -> float:
        if not self.seen:
            raise ValueError("normalizer has not seen any value")
        if self.hi == self.lo:
            return 0.5
        return float(min(1.0, max(0.0, (value - self.lo) / (self.hi - self.lo))))


@dataclass
class PhysicalObjectiveSpec:
    """One physical objective of one task. Maximized objectives are negated before scaling."""

    name: str
    sense: str = MINIMIZE
    normalizer: RunningMinMax = field(default_factory=RunningMinMax)

    def __post_init__(self):
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"bad sense {self.sense!r}")

    def oriented(self, raw: float) -> float:
        return -raw if self.sense == MAXIMIZE else raw

    def observe(self, raws) -> None:
        self.normalizer.observe([self.oriented(r) for r in raws])


def normalize(raw: float, spec: PhysicalObjectiveSpec) -> float:
    """Running min-max scaling into [0, 1]; 0.5 when every value seen so far is equal."""
    return spec.normalizer(spec.oriented(raw))


class ObjectiveNormalizers:
    """Per-(task, objective) running min-max state.

    Updated only at generation barriers; everything evaluated so far is then
    re-normalized against the new ranges.
    """

    def __init__(self, config):
        self.specs = {
            t.index: [PhysicalObjectiveSpec(name, sense) for name, sense in zip(config.physical_objectives, config.senses(t))]
            for t in config.task_list
        }

    def observe(self, raws) -> None:
        raws = [tuple(r) for r in raws]
        for specs in self.specs.values():
            for m, spec in enumerate(specs):
                spec.observe([r[m] for r in raws])

    def normalized(self, raw, task_index: int) -> tuple[float, ...]:
        return tuple(normalize(x, spec) for x, spec in zip(raw, self.specs[task_index]))

    def state(self) -> dict:
        return {str(k): [[s.name, s.sense, s.normalizer.lo, s.normalizer.hi] for s in v] for k, v in self.specs.items()}

    def load_state(self, state: dict) -> None:
        for k, rows in state.items():
            self.specs[int(k)] = [PhysicalObjectiveSpec(n, sense, RunningMinMax(float(lo), float(hi))) for n, sense, lo, hi in rows]


# ----------------------------------------------------------------------------
# aggregation


def combined_cost(phys_norm, vis: float, alpha: float) -> float:
    """``(1 - alpha) * phys + alpha * (1 - vis)``; a vector ``phys_norm`` is reduced by its mean."""
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha={alpha} outside [0, 1]")
    phys = float(np.mean(phys_norm)) if not np.isscalar(phys_norm) else float(phys_norm)
    return (1.0 - alpha) * phys + alpha * (1.0 - vis)


def constrained_objectives(phys_norm, vis: float, lower: float, upper: float):
    """Objective vector plus feasibility of ``lower <= vis <= upper`` (closed bounds).

    Returns:
        (objectives, feasible, violation) with violation the distance of vis
        outside the bounds.
    """
    if not 0.0 <= lower <= upper <= 1.0:
        raise BoundsInvalid(f"need 0 <= {lower} <= {upper} <= 1")
    violation = max(0.0, lower - vis) + max(0.0, vis - upper)
    objectives = (float(phys_norm),) if np.isscalar(phys_norm) else tuple(float(x) for x in phys_norm)
    return objectives, violation == 0.0, violation
