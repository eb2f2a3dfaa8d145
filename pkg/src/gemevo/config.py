"""Run configuration and its YAML file form.

Keys in the file mirror the dataclass field names; ``tasks`` is a list of
domain phrases and ``oracle_selection`` a nested mapping.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .core import Task, make_tasks

SINGLE_OBJECTIVE = "single_objective"
MULTI_OBJECTIVE = "multi_objective"
PHYSICAL_OBJECTIVES = ("frontal_area", "drag_proxy", "lift_proxy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OracleSelection:
    language: str = "scripted"
    generator: str = "procedural"
    visual: str = "tag-overlap"
    physical: str = "geometric"


@dataclass(frozen=True)
class RunConfig:
    tasks: tuple[str, ...] = ("car", "airplane")
    population_size: int = 20
    max_generations: int = 20
    alpha: float = 0.55
    visual_lower: float = 0.5
    visual_upper: float = 1.0
    objective_mode: str = SINGLE_OBJECTIVE
    self_mating_probability: float = 0.2
    cross_domain_probability: float = 0.3
    tournament_size: int = 2
    seed: int = 0
    oracle_selection: OracleSelection = field(default_factory=OracleSelection)
    novelty_baseline_samples: int = 1000
    # beyond the core fields
    physical_objectives: tuple[str, ...] = ("frontal_area",)
    maximize: dict = field(default_factory=dict)
    raster_resolution: int = 512
    phenotype_samples: int = 1
    reevaluate_survivors: bool = False
    workers: int = 1
    max_attempts: int = 3

    def __post_init__(self):
        tasks = tuple(self.tasks)
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "physical_objectives", tuple(self.physical_objectives))
        object.__setattr__(
            self, "maximize", {str(k): tuple(v) for k, v in dict(self.maximize).items()}
        )
        if not tasks or any(not str(t).strip() for t in tasks):
            raise ConfigError("tasks must be a non-empty list of domain phrases")
        if len(set(tasks)) != len(tasks):
            raise ConfigError("task domain phrases must be unique")
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        if self.max_generations < 1:
            raise ConfigError("max_generations must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0.0 <= self.visual_lower <= self.visual_upper <= 1.0:
            raise ConfigError("need 0 <= visual_lower <= visual_upper <= 1")
        if self.objective_mode not in (SINGLE_OBJECTIVE, MULTI_OBJECTIVE):
            raise ConfigError(f"unknown objective_mode {self.objective_mode!r}")
        p, q = self.self_mating_probability, self.cross_domain_probability
        if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0 and p + q <= 1.0 + 1e-12):
            raise ConfigError("mating probabilities must be in [0, 1] and sum to <= 1")
        if self.tournament_size < 2:
            raise ConfigError("tournament_size must be >= 2")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        if self.novelty_baseline_samples < 0:
            raise ConfigError("novelty_baseline_samples must be >= 0")
        if not self.physical_objectives:
            raise ConfigError("at least one physical objective is required")
        for name in self.physical_objectives:
            if name not in PHYSICAL_OBJECTIVES:
                raise ConfigError(f"unknown physical objective {name!r}")
        for dom, names in self.maximize.items():
            if dom not in tasks:
                raise ConfigError(f"maximize refers to unknown task {dom!r}")
            for name in names:
                if name not in self.physical_objectives:
                    raise ConfigError(f"maximize names unused objective {name!r}")
        if self.raster_resolution < 8:
            raise ConfigError("raster_resolution too small")
        if self.phenotype_samples < 1 or self.workers < 1 or self.max_attempts < 1:
            raise ConfigError("phenotype_samples, workers and max_attempts must be >= 1")

    @property
    def task_list(self) -> tuple[Task, ...]:
        return make_tasks(self.tasks)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def senses(self, task: Task) -> tuple[str, ...]:
        """Optimization sense of every physical objective for ``task``."""
        maxed = self.maximize.get(task.domain_phrase, ())
        return tuple("maximize" if name in maxed else "minimize" for name in self.physical_objectives)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["tasks"] = list(self.tasks)
        d["physical_objectives"] = list(self.physical_objectives)
        d["maximize"] = {k: list(v) for k, v in self.maximize.items()}
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        sel = data.pop("oracle_selection", None) or {}
        if not isinstance(sel, dict):
            raise ConfigError("oracle_selection must be a mapping")
        try:
            oracle = OracleSelection(**sel)
        except TypeError as exc:
            raise ConfigError(f"bad oracle_selection: {exc}") from None
        return cls(oracle_selection=oracle, **data)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with path.open() as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return RunConfig.from_dict(data or {})


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True)
