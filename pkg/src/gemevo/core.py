"""Shared domain types for prompt-driven evolutionary multitasking.

A genotype is a templated sentence ``A <domain> in the shape of <descriptor>.``
tagged with the task it belongs to. Phenotypes are indexed triangle meshes.
All types here are immutable once constructed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

import numpy as np


class GemError(Exception):
    """Base class for engine errors."""


class EmptyDescriptor(GemError):
    pass


class TokenBudgetExceeded(GemError):
    pass


class InvalidMesh(GemError):
    pass


class DegenerateMesh(InvalidMesh):
    pass


class OracleFailure(GemError):
    """An oracle adapter could not produce an answer."""


TEMPLATE_MIDDLE = " in the shape of "
_PROMPT_RE = re.compile(r"^\s*an?\s+(.+?)\s+in\s+the\s+shape\s+of\s+(.+?)\s*\.?\s*$", re.IGNORECASE | re.DOTALL)
_WS_RE = re.compile(r"\s+")

# Reference text-to-3D generator context window.
DEFAULT_MAX_TOKENS = 77


class Tokenizer(Protocol):
    max_prompt_tokens: int

    def count_tokens(self, text: str) -> int: ...


@dataclass(frozen=True)
class WhitespaceTokenizer:
    """Counts whitespace-separated words; stand-in for a real BPE tokenizer."""

    max_prompt_tokens: int = DEFAULT_MAX_TOKENS
    vocab_size: int = 50_000

    def count_tokens(self, text: str) -> int:
        return len(text.split())


@dataclass(frozen=True)
class Task:
    index: int
    domain_phrase: str

    def __post_init__(self):
        if not self.domain_phrase.strip():
            raise ValueError("domain_phrase must be non-empty")
        if self.index < 1:
            raise ValueError("task index is 1-based")

    @property
    def task_label(self) -> str:
        return f"A {self.domain_phrase}"


def make_tasks(domains) -> tuple[Task, ...]:
    tasks = tuple(Task(i + 1, d) for i, d in enumerate(domains))
    if not tasks:
        raise ValueError("at least one task is required")
    return tasks


def normalize_text(text: str) -> str:
    return _WS_RE.sub(" ", text.strip()).lower()


@dataclass(frozen=True)
class Genotype:
    task_index: int
    descriptor: str
    prompt: str
    token_count: int

    @property
    def key(self) -> str:
        return genotype_key(self)


def render_prompt(task: Task, descriptor: str, tokenizer: Optional[Tokenizer] = None) -> Genotype:
    """Render ``A <domain> in the shape of <descriptor>.`` for ``task``.

    The article is always "A", also before vowel-initial domains.

    Raises:
        EmptyDescriptor: descriptor is blank.
        TokenBudgetExceeded: the rendered prompt exceeds the generator budget.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    descriptor = _WS_RE.sub(" ", descriptor.strip()).rstrip(".").strip()
    if not descriptor:
        raise EmptyDescriptor(f"empty descriptor for task {task.domain_phrase!r}")
    prompt = f"A {task.domain_phrase}{TEMPLATE_MIDDLE}{descriptor}."
    n = tokenizer.count_tokens(prompt)
    if n > tokenizer.max_prompt_tokens:
        raise TokenBudgetExceeded(f"{n} tokens > limit {tokenizer.max_prompt_tokens}: {prompt!r}")
    return Genotype(task.index, descriptor, prompt, n)


def parse_prompt(prompt: str) -> Optional[tuple[str, str]]:
    """Split a rendered prompt into ``(domain_phrase, descriptor)``; None if it does not match."""
    m = _PROMPT_RE.match(prompt)
    if m is None:
        return None
    return m.group(1).strip(), m.group(2).strip()


def genotype_key(g) -> str:
    """Case-folded, whitespace-collapsed prompt. Accepts a Genotype or a plain string."""
    prompt = g.prompt if isinstance(g, Genotype) else g
    return normalize_text(prompt)


@dataclass(frozen=True)
class Provenance:
    genotype_id: str = ""
    generation: int = 0
    generator_seed: int = 0
    generator: str = ""
    tags: tuple[str, ...] = ()
    scale_factor: float = 1.0


@dataclass(frozen=True, eq=False)
class PhenotypeMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise InvalidMesh("non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise InvalidMesh("triangle index out of range")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def require_valid(self) -> "PhenotypeMesh":
        if self.n_triangles == 0:
            raise DegenerateMesh("mesh has no triangles")
        return self

    def with_provenance(self, **changes) -> "PhenotypeMesh":
        from dataclasses import replace

        return PhenotypeMesh(self.vertices, self.triangles, replace(self.provenance, **changes))

    def same_geometry(self, other: "PhenotypeMesh", atol: float = 0.0) -> bool:
        return (
            self.vertices.shape == other.vertices.shape
            and np.array_equal(self.triangles, other.triangles)
            and np.allclose(self.vertices, other.vertices, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True)
class RawEvaluation:
    """Unnormalized scores for one phenotype: physics per objective, visual per task."""

    physical_raw: tuple[float, ...]
    visual_scores: tuple[float, ...]


@dataclass(frozen=True)
class FitnessRecord:
    physical_raw: tuple[float, ...]
    physical_norm: tuple[float, ...]
    visual_score: float
    combined_cost: float
    factorial_costs: tuple[float, ...]
    factorial_ranks: tuple[int, ...]
    scalar_fitness: int
    feasible: bool
    constraint_violation: float

    def __post_init__(self):
        if self.factorial_ranks and self.scalar_fitness != min(self.factorial_ranks):
            raise ValueError("scalar fitness must equal the minimum factorial rank")
        if not 0.0 <= self.visual_score <= 1.0:
            raise ValueError(f"visual score {self.visual_score} outside [0, 1]")
        if any(not 0.0 <= x <= 1.0 for x in self.physical_norm):
            raise ValueError("normalized physical scores must lie in [0, 1]")
        if self.feasible != (self.constraint_violation == 0):
            raise ValueError("feasible flag disagrees with constraint violation")


class Origin(str, Enum):
    INITIAL = "initial"
    SELF_MATE = "self_mate"
    SAME_DOMAIN = "same_domain"
    CROSS_DOMAIN = "cross_domain"
    SURVIVOR = "survivor"


@dataclass(frozen=True)
class Individual:
    id: str
    genotype: Genotype
    origin: Origin
    generation_created: int
    phenotype: Optional[PhenotypeMesh] = None
    raw: Optional[RawEvaluation] = None
    fitness: Optional[FitnessRecord] = None

    def __post_init__(self):
        if self.fitness is not None and self.phenotype is None:
            raise ValueError("an evaluated individual must carry its phenotype")

    @property
    def key(self) -> str:
        return genotype_key(self.genotype)

    @property
    def task_index(self) -> int:
        return self.genotype.task_index
