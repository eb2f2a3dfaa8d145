"""Run directories: config snapshot, log stream, population files, archive and checkpoint.

Layout of an output directory::

    config.yaml              config snapshot
    log.jsonl                one record per evaluated individual
    populations/gen_XXX.json survivors after each generation barrier
    archive.json, archive/   best-ever individual per task (+ OBJ mesh)
    checkpoint.json          state at the last completed barrier
    baselines/<key>.json     cached novelty baselines
    hv_baseline.json         optional equal-budget random-descriptor sample
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig, dump_config, load_config
from .core import (
    FitnessRecord,
    GemError,
    Genotype,
    Individual,
    Origin,
    PhenotypeMesh,
    Provenance,
    RawEvaluation,
)
from .emt import ArchiveEntry, Oracles, RunObserver, RunState, random_descriptor_baseline, run_evolution
from .evaluators import RemoteVisualOracle, TagOverlapVisualOracle
from .meshio import save_mesh
from .metrics import NoveltyBaseline, build_novelty_baseline
from .phenogen import ProceduralGenerator
from .prompts import RemoteLanguageOracle, ScriptedLanguageOracle

CHECKPOINT = "checkpoint.json"
LOG = "log.jsonl"
CONFIG = "config.yaml"
HV_BASELINE = "hv_baseline.json"


class CorruptCheckpoint(GemError):
    pass


def make_oracles(config: RunConfig, mode: str = "mock") -> Oracles:
    """Mock oracles are deterministic; remote ones read endpoints from the environment."""
    if mode == "mock":
        return Oracles(ScriptedLanguageOracle(), ProceduralGenerator(), TagOverlapVisualOracle())
    if mode == "remote":
        return Oracles(RemoteLanguageOracle(), ProceduralGenerator(), RemoteVisualOracle())
    raise ValueError(f"unknown oracle mode {mode!r}")


# ----------------------------------------------------------------------------
# (de)serialization


def _json_dump(obj, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path)


def mesh_to_dict(m: PhenotypeMesh) -> dict:
    p = m.provenance
    return {"vertices": m.vertices.tolist(), "triangles": m.triangles.tolist(),
            "provenance": {"genotype_id": p.genotype_id, "generation": p.generation,
                           "generator_seed": p.generator_seed, "generator": p.generator,
                           "tags": list(p.tags), "scale_factor": p.scale_factor}}


def mesh_from_dict(d: dict) -> PhenotypeMesh:
    p = dict(d["provenance"])
    p["tags"] = tuple(p["tags"])
    return PhenotypeMesh(np.asarray(d["vertices"], float), np.asarray(d["triangles"], int), Provenance(**p))


def individual_to_dict(ind: Individual) -> dict:
    g, f = ind.genotype, ind.fitness
    return {
        "id": ind.id, "origin": ind.origin.value, "generation_created": ind.generation_created,
        "genotype": {"task_index": g.task_index, "descriptor": g.descriptor, "prompt": g.prompt,
                     "token_count": g.token_count},
        "phenotype": mesh_to_dict(ind.phenotype) if ind.phenotype is not None else None,
        "raw": None if ind.raw is None else {"physical_raw": list(ind.raw.physical_raw),
                                             "visual_scores": list(ind.raw.visual_scores)},
        "fitness": None if f is None else {
            "physical_raw": list(f.physical_raw), "physical_norm": list(f.physical_norm),
            "visual_score": f.visual_score, "combined_cost": f.combined_cost,
            "factorial_costs": list(f.factorial_costs), "factorial_ranks": list(f.factorial_ranks),
            "scalar_fitness": f.scalar_fitness, "feasible": f.feasible,
            "constraint_violation": f.constraint_violation},
    }


def individual_from_dict(d: dict) -> Individual:
    raw = d.get("raw")
    fit = d.get("fitness")
    if fit is not None:
        fit = dict(fit)
        for k in ("physical_raw", "physical_norm", "factorial_costs", "factorial_ranks"):
            fit[k] = tuple(fit[k])
        fit = FitnessRecord(**fit)
    return Individual(
        d["id"], Genotype(**d["genotype"]), Origin(d["origin"]), int(d["generation_created"]),
        mesh_from_dict(d["phenotype"]) if d.get("phenotype") else None,
        RawEvaluation(tuple(raw["physical_raw"]), tuple(raw["visual_scores"])) if raw else None,
        fit,
    )


def state_to_dict(state: RunState) -> dict:
    return {
        "generation": state.generation,
        "population": [individual_to_dict(p) for p in state.population],
        "normalizer_state": state.normalizer_state,
        "archive": {str(k): {"individual": individual_to_dict(e.individual), "combined_cost": e.combined_cost,
                             "generation": e.generation} for k, e in state.archive.items()},
        "archive_history": state.archive_history,
        "generation_stats": state.generation_stats,
        "n_records": state.n_records,
        "evaluations": state.evaluations,
    }


def state_from_dict(d: dict) -> RunState:
    archive = {int(k): ArchiveEntry(int(k), individual_from_dict(v["individual"]), float(v["combined_cost"]),
                                    int(v["generation"])) for k, v in d["archive"].items()}
    return RunState(int(d["generation"]), [individual_from_dict(p) for p in d["population"]],
                    d["normalizer_state"], archive, list(d["archive_history"]), list(d["generation_stats"]),
                    int(d["n_records"]), int(d["evaluations"]))


# ----------------------------------------------------------------------------
# writer


class RunWriter(RunObserver):
    """Persists a run as it progresses; the log is appended by this single writer."""

    def __init__(self, out_dir, config: RunConfig, fresh: bool = True):
        self.out = Path(out_dir)
        self.config = config
        (self.out / "populations").mkdir(parents=True, exist_ok=True)
        (self.out / "archive").mkdir(exist_ok=True)
        if fresh:
            (self.out / CONFIG).write_text(dump_config(config), encoding="utf-8")
            (self.out / LOG).write_bytes(b"")

    def on_records(self, records: list) -> None:
        with (self.out / LOG).open("a", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    def on_barrier(self, state: RunState, joint: list, survivors: list) -> None:
        g = state.generation
        _json_dump({"generation": g, "stats": state.generation_stats[-1],
                    "population": [{k: v for k, v in individual_to_dict(p).items() if k != "phenotype"}
                                   for p in survivors]},
                   self.out / "populations" / f"gen_{g:03d}.json")
        arch = {}
        for k, e in sorted(state.archive.items()):
            name = f"task_{k}.obj"
            save_mesh(e.individual.phenotype, self.out / "archive" / name, "obj")
            arch[str(k)] = {"individual_id": e.individual.id, "prompt": e.individual.genotype.prompt,
                            "combined_cost": e.combined_cost, "generation": e.generation, "mesh": f"archive/{name}"}
        _json_dump({"best": arch, "history": state.archive_history}, self.out / "archive.json")
        _json_dump(state_to_dict(state), self.out / CHECKPOINT)


# ----------------------------------------------------------------------------
# baselines


def baseline_key(task_label: str, generator: str, visual: str, B: int, seed: int) -> str:
    blob = json.dumps([task_label, generator, visual, int(B), int(seed)]).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def load_or_build_baseline(out_dir, oracles: Oracles, task, B: int, seed: int) -> tuple[NoveltyBaseline, bool]:
    """Return a cached baseline with a matching key, building and persisting it otherwise.

    Returns:
        (baseline, reused)
    """
    key = baseline_key(task.task_label, oracles.generator.name, oracles.visual.name, B, seed)
    path = Path(out_dir) / "baselines" / f"{key}.json"
    if path.is_file():
        b = NoveltyBaseline.from_dict(json.loads(path.read_text(encoding="utf-8")))
        if b.cache_key == (task.task_label, oracles.generator.name, oracles.visual.name, B, seed):
            return b, True
    b = build_novelty_baseline(oracles.generator, oracles.visual, task, B, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    _json_dump(b.to_dict(), path)
    return b, False


def hv_baseline(config: RunConfig, oracles: Oracles) -> dict:
    """Equal-budget random-descriptor sample set in the layout of ``hv_baseline.json``."""
    rows = random_descriptor_baseline(config, oracles)
    return {"objectives": list(config.physical_objectives),
            "rows": [{"task_index": k, "phys_raw": list(p), "visual_scores": list(v)} for k, p, v in rows]}


def write_hv_baseline(out_dir, config: RunConfig, oracles: Oracles) -> Path:
    path = Path(out_dir) / HV_BASELINE
    _json_dump(hv_baseline(config, oracles), path)
    return path


# ----------------------------------------------------------------------------
# run / resume


def start_run(config: RunConfig, out_dir, mode: str = "mock", stop_after: Optional[int] = None,
              hv_baseline: bool = False, oracles: Optional[Oracles] = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    oracles = oracles or make_oracles(config, mode)
    writer = RunWriter(out, config)
    baselines = _baselines(out, config, oracles)
    if hv_baseline:
        write_hv_baseline(out, config, oracles)
    return run_evolution(config, oracles, observer=writer, baselines=baselines, stop_after=stop_after)


def _baselines(out: Path, config: RunConfig, oracles: Oracles) -> dict:
    if config.novelty_baseline_samples < 1:
        return {}
    return {t.index: load_or_build_baseline(out, oracles, t, config.novelty_baseline_samples, config.seed)[0]
            for t in config.task_list}


def load_checkpoint(out_dir) -> RunState:
    path = Path(out_dir) / CHECKPOINT
    if not path.is_file() or not (Path(out_dir) / CONFIG).is_file():
        raise CorruptCheckpoint(f"no checkpoint in {out_dir}")
    try:
        return state_from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"unreadable checkpoint {path}: {exc}") from None


def resume_run(out_dir, mode: str = "mock", stop_after: Optional[int] = None, oracles: Optional[Oracles] = None):
    """Continue a run from its last barrier. Returns None when the run had already completed."""
    out = Path(out_dir)
    state = load_checkpoint(out)
    config = load_config(out / CONFIG)
    if state.generation >= config.max_generations:
        return None
    log_path = out / LOG
    lines = log_path.read_bytes().splitlines(keepends=True) if log_path.is_file() else []
    if len(lines) < state.n_records:
        raise CorruptCheckpoint(f"log has {len(lines)} records, checkpoint expects {state.n_records}")
    log_path.write_bytes(b"".join(lines[: state.n_records]))
    oracles = oracles or make_oracles(config, mode)
    baselines = _baselines(out, config, oracles)
    writer = RunWriter(out, config, fresh=False)
    return run_evolution(config, oracles, observer=writer, state=state, baselines=baselines, stop_after=stop_after)


def read_log(out_dir) -> list[dict]:
    path = Path(out_dir) / LOG
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
