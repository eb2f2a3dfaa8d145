"""Multitask evolutionary loop: evaluation, factorial ranking, dedup and survival.

One generation runs reflect -> offspring -> phenotypes -> evaluation -> join
-> dedup -> rank -> survive. Evaluation fans out over an optional thread pool;
everything that orders or selects individuals runs single-threaded at the
generation barrier, so results do not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .config import MULTI_OBJECTIVE, RunConfig
from .core import FitnessRecord, GemError, Individual, Origin, Task
from .evaluators import (
    PHYSICAL_BACKEND,
    ObjectiveNormalizers,
    VisualOracle,
    combined_cost,
    constrained_objectives,
    evaluate_raw,
    mean_raw,
)
from .phenogen import GeneratorOracle
from .prompts import (
    InstructionBundle,
    LanguageOracle,
    child_from_output,
    generate_offspring,
    initialize_population,
    objective_phrase,
    problem_description,
    reflect,
    render_instruction,
)
from .seeding import derive_seed, stream

log = logging.getLogger(__name__)


class MissingFitness(GemError):
    pass


class MissingObjectives(GemError):
    pass


# ----------------------------------------------------------------------------
# ranking


def factorial_ranks(costs) -> np.ndarray:
    """1-based rank of every row within each column; ties go to the earlier row.

    Args:
        costs: (N, K) factorial costs, or a sequence of evaluated Individuals.
    """
    if len(costs) and isinstance(costs[0], Individual):
        if any(ind.fitness is None for ind in costs):
            raise MissingFitness("every individual needs factorial costs before ranking")
        costs = [ind.fitness.factorial_costs for ind in costs]
    c = np.asarray(costs, dtype=float)
    if c.ndim != 2 or np.isnan(c).any():
        raise MissingFitness("factorial costs must be a complete (N, K) matrix")
    ranks = np.empty(c.shape, dtype=int)
    for k in range(c.shape[1]):
        order = np.argsort(c[:, k], kind="stable")
        ranks[order, k] = np.arange(1, len(order) + 1)
    return ranks


def scalar_fitness(ranks) -> np.ndarray:
    return np.asarray(ranks).min(axis=1)


def non_dominated_fronts(points) -> list[list[int]]:
    """Pareto fronts (minimization) as lists of row indices, best front first."""
    p = np.asarray(points, dtype=float)
    n = len(p)
    le = (p[:, None, :] <= p[None, :, :]).all(-1)
    lt = (p[:, None, :] < p[None, :, :]).any(-1)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(0)
    fronts, current = [], [i for i in range(n) if count[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def crowding_distance(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    n, m = p.shape
    d = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        order = np.argsort(p[:, j], kind="stable")
        span = p[order[-1], j] - p[order[0], j]
        d[order[0]] = d[order[-1]] = np.inf
        if span > 0:
            d[order[1:-1]] += (p[order[2:], j] - p[order[:-2], j]) / span
    return d


def per_task_mo_cost(objectives, violations=None) -> np.ndarray:
    """Scalar ordering cost for one task in multi-objective mode.

    Feasible rows get ``front index + 0.5 / (1 + crowding distance)``, so a
    better front always wins and wider spacing breaks ties within a front.
    Infeasible rows are placed after every feasible row, ordered by violation.
    """
    obj = np.asarray(objectives, dtype=float)
    if obj.ndim != 2 or obj.shape[1] == 0 or np.isnan(obj).any():
        raise MissingObjectives("need an (N, M) objective matrix")
    n = len(obj)
    viol = np.zeros(n) if violations is None else np.asarray(violations, dtype=float)
    feas = np.flatnonzero(viol == 0)
    cost = np.empty(n)
    for f, front in enumerate(non_dominated_fronts(obj[feas]), start=1):
        rows = feas[front]
        cost[rows] = f + 0.5 / (1.0 + crowding_distance(obj[rows]))
    infeas = viol > 0
    cost[infeas] = n + 2 + viol[infeas]
    return cost


# ----------------------------------------------------------------------------
# dedup and survival


def dedup(parents: Sequence[Individual], offspring: Sequence[Individual]) -> list[Individual]:
    """Joint population (parents, then offspring) with one member per genotype key.

    A key found among the offspring keeps its first offspring copy; keys only
    present among the parents keep their first parent copy.
    """
    off_keys = {}
    for o in offspring:
        off_keys.setdefault(o.key, o)
    seen, out = set(), []
    for p in parents:
        if p.key not in off_keys and p.key not in seen:
            seen.add(p.key)
            out.append(p)
    for o in offspring:
        if o.key not in seen:
            seen.add(o.key)
            out.append(o)
    return out


def survival_key(ind: Individual, index: int, multi_objective: bool):
    f = ind.fitness
    return ((not f.feasible) if multi_objective else False, f.scalar_fitness, f.combined_cost, index)


def _tournaments(pool: list[int], n: int, size: int, rng, key) -> list[int]:
    pool, won = list(pool), []
    while len(won) < n:
        k = min(size, len(pool))
        picks = rng.choice(len(pool), size=k, replace=False)
        best = min(picks, key=lambda i: key(pool[i]))
        won.append(pool.pop(int(best)))
    return won


def tournament_survival(joint: Sequence[Individual], n: int, tournament_size: int, seed,
                        multi_objective: bool = False) -> list[Individual]:
    """Pick ``n`` survivors by repeated tournaments; winners leave the pool.

    In multi-objective mode feasible members are selected first: when at least
    ``n`` are feasible only they compete, otherwise all of them survive and the
    remaining slots go to tournaments among the infeasible ones. Survivors are
    returned in joint-population order.
    """
    if any(ind.fitness is None for ind in joint):
        raise MissingFitness("survival needs evaluated individuals")
    if len(joint) <= n:
        return list(joint)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def key(i):
        return survival_key(joint[i], i, multi_objective)

    idx = list(range(len(joint)))
    if multi_objective:
        feas = [i for i in idx if joint[i].fitness.feasible]
        infeas = [i for i in idx if not joint[i].fitness.feasible]
        if len(feas) >= n:
            chosen = _tournaments(feas, n, tournament_size, rng, key)
        else:
            chosen = feas + _tournaments(infeas, n - len(feas), tournament_size, rng, key)
    else:
        chosen = _tournaments(idx, n, tournament_size, rng, key)
    return [joint[i] for i in sorted(chosen)]


# ----------------------------------------------------------------------------
# evaluation


@dataclass
class Oracles:
    language: LanguageOracle
    generator: GeneratorOracle
    visual: VisualOracle
    physical: str = PHYSICAL_BACKEND

    def names(self) -> dict:
        """Adapter names as logged; ``deterministic`` is False when any adapter gives no replay guarantee."""
        det = all(getattr(o, "deterministic", True) for o in (self.language, self.generator, self.visual))
        return {"language": self.language.name, "generator": self.generator.name,
                "visual": self.visual.name, "physical": self.physical, "deterministic": det}

    @property
    def serial(self) -> bool:
        return any(getattr(o, "serial", False) for o in (self.language, self.generator, self.visual))


def generator_seed(run_seed: int, ind_id: str, sample: int = 0) -> int:
    return derive_seed(run_seed, "phenotype", ind_id, sample)


def evaluate_one(ind: Individual, oracles: Oracles, config: RunConfig, tasks: Sequence[Task], generation: int,
                 salt: str = "") -> Individual:
    """Generate the phenotype(s) of ``ind`` and score them; fitness is assigned later at the barrier."""
    evals, mesh = [], None
    for s in range(config.phenotype_samples):
        gseed = generator_seed(config.seed, ind.id + salt, s)
        m = oracles.generator.generate(ind.genotype, gseed, genotype_id=ind.id, generation=generation)
        m.require_valid()
        mesh = mesh or m
        evals.append(evaluate_raw(m, config.physical_objectives, oracles.visual, tasks, config.raster_resolution))
    raw = evals[0] if len(evals) == 1 else mean_raw(evals)
    return replace(ind, phenotype=mesh, raw=raw, fitness=None)


def evaluate_all(inds, oracles, config, tasks, generation, executor=None, salt=""):
    if executor is None or oracles.serial:
        return [evaluate_one(i, oracles, config, tasks, generation, salt) for i in inds]
    return list(executor.map(lambda i: evaluate_one(i, oracles, config, tasks, generation, salt), inds))


def assign_fitness(inds: Sequence[Individual], normalizers: ObjectiveNormalizers, config: RunConfig,
                   tasks: Sequence[Task]) -> list[Individual]:
    """Normalize, aggregate and rank ``inds`` against every task.

    Single-objective mode ranks by the combined cost against each task;
    multi-objective mode ranks by :func:`per_task_mo_cost` with the visual
    bounds as the feasibility constraint.
    """
    mo = config.objective_mode == MULTI_OBJECTIVE
    n, K = len(inds), len(tasks)
    pos = {t.index: k for k, t in enumerate(tasks)}
    norm = np.empty((n, K, len(config.physical_objectives)))
    cc = np.empty((n, K))
    viol = np.empty((n, K))
    for i, ind in enumerate(inds):
        for k, t in enumerate(tasks):
            norm[i, k] = normalizers.normalized(ind.raw.physical_raw, t.index)
            vis = ind.raw.visual_scores[k]
            cc[i, k] = combined_cost(norm[i, k], vis, config.alpha)
            _, _, viol[i, k] = constrained_objectives(tuple(norm[i, k]), vis, config.visual_lower, config.visual_upper)
    if mo:
        fc = np.column_stack([per_task_mo_cost(norm[:, k], viol[:, k]) for k in range(K)])
    else:
        fc = cc
    ranks = factorial_ranks(fc) if n else np.empty((0, K), dtype=int)
    out = []
    for i, ind in enumerate(inds):
        k = pos[ind.task_index]
        rec = FitnessRecord(
            physical_raw=tuple(ind.raw.physical_raw),
            physical_norm=tuple(float(x) for x in norm[i, k]),
            visual_score=float(ind.raw.visual_scores[k]),
            combined_cost=float(cc[i, k]),
            factorial_costs=tuple(float(x) for x in fc[i]),
            factorial_ranks=tuple(int(r) for r in ranks[i]),
            scalar_fitness=int(ranks[i].min()),
            feasible=bool(viol[i, k] == 0),
            constraint_violation=float(viol[i, k]),
        )
        out.append(replace(ind, fitness=rec))
    return out


# ----------------------------------------------------------------------------
# archive and run state


@dataclass
class ArchiveEntry:
    task_index: int
    individual: Individual
    combined_cost: float
    generation: int


@dataclass
class RunState:
    """Everything needed to continue a run from a generation barrier."""

    generation: int
    population: list
    normalizer_state: dict
    archive: dict
    archive_history: list
    generation_stats: list
    n_records: int
    evaluations: int


@dataclass
class RunResult:
    config: RunConfig
    run_id: str
    population: list
    archive: dict
    archive_history: list
    generation_stats: list
    records: list = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return bool(self.generation_stats) and self.generation_stats[-1]["generation"] == self.config.max_generations


def run_id_for(config: RunConfig) -> str:
    # the worker count changes scheduling only, never results
    d = {k: v for k, v in config.to_dict().items() if k != "workers"}
    blob = json.dumps(d, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _update_archive(archive: dict, history: list, pop: Sequence[Individual], generation: int, tasks) -> None:
    for t in tasks:
        members = [p for p in pop if p.task_index == t.index]
        if members:
            best = min(members, key=lambda p: p.fitness.combined_cost)
            cur = archive.get(t.index)
            if cur is None or best.fitness.combined_cost < cur.combined_cost:
                archive[t.index] = ArchiveEntry(t.index, best, best.fitness.combined_cost, generation)
        if t.index in archive:
            history.append({"generation": generation, "task_index": t.index,
                            "best_combined_cost": archive[t.index].combined_cost,
                            "individual_id": archive[t.index].individual.id})


def log_record(ind: Individual, run_id: str, generation: int, oracles: Oracles, config: RunConfig,
               ranked: bool = True, novelty: Optional[float] = None, origin: Optional[str] = None) -> dict:
    f = ind.fitness
    return {
        "run_id": run_id,
        "generation": generation,
        "individual_id": ind.id,
        "task_index": ind.task_index,
        "origin": origin or ind.origin.value,
        "prompt": ind.genotype.prompt,
        "descriptor": ind.genotype.descriptor,
        "phys_raw": list(f.physical_raw),
        "phys_norm": list(f.physical_norm),
        "visual_score": f.visual_score,
        "visual_scores": list(ind.raw.visual_scores),
        "combined_cost": f.combined_cost,
        "factorial_costs": list(f.factorial_costs),
        "factorial_ranks": list(f.factorial_ranks) if ranked else None,
        "phi": f.scalar_fitness if ranked else None,
        "feasible": f.feasible,
        "constraint_violation": f.constraint_violation,
        "novelty_score": novelty,
        "oracles": oracles.names(),
        "seeds": {"run": config.seed, "generator": ind.phenotype.provenance.generator_seed},
    }


class RunObserver:
    """Hooks called by :func:`run_evolution`; the default does nothing."""

    def on_records(self, records: list) -> None:
        pass

    def on_barrier(self, state: RunState, joint: list, survivors: list) -> None:
        pass


def _novelty(ind: Individual, baselines, tasks) -> Optional[float]:
    if not baselines or ind.task_index not in baselines:
        return None
    k = [t.index for t in tasks].index(ind.task_index)
    return float(ind.raw.visual_scores[k] - baselines[ind.task_index].baseline_mean)


def run_evolution(config: RunConfig, oracles: Oracles, *, observer: Optional[RunObserver] = None,
                  state: Optional[RunState] = None, baselines: Optional[dict] = None,
                  stop_after: Optional[int] = None) -> RunResult:
    """Evolve all tasks together for ``config.max_generations`` generations.

    Args:
        config: run parameters.
        oracles: language, generator and visual adapters.
        observer: receives log records and barrier snapshots (persistence).
        state: continue from this barrier instead of initializing.
        baselines: task index -> NoveltyBaseline; enables novelty scores in the log.
        stop_after: stop after this generation barrier (for interruption tests).

    Returns:
        RunResult with the final population, elite archive and the records
        emitted by this call.
    """
    observer = observer or RunObserver()
    tasks = config.task_list
    mo = config.objective_mode == MULTI_OBJECTIVE
    run_id = run_id_for(config)
    records: list = []
    executor = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    def emit(recs):
        records.extend(recs)
        observer.on_records(recs)

    try:
        normalizers = ObjectiveNormalizers(config)
        if state is None:
            n_per = [config.population_size // len(tasks) + (1 if i < config.population_size % len(tasks) else 0)
                     for i in range(len(tasks))]
            if min(n_per) < 1:
                raise ValueError("population_size must be at least the number of tasks")
            genos = initialize_population(oracles.language, tasks, n_per, derive_seed(config.seed, "init"),
                                          problem=problem_description(tasks, objective_phrase(config)))
            pop = [Individual(f"g000-i{i:03d}", g, Origin.INITIAL, 0) for i, g in enumerate(genos)]
            pop = evaluate_all(pop, oracles, config, tasks, 0, executor)
            normalizers.observe(p.raw.physical_raw for p in pop)
            pop = assign_fitness(pop, normalizers, config, tasks)
            emit([log_record(p, run_id, 0, oracles, config, novelty=_novelty(p, baselines, tasks)) for p in pop])
            archive, history = {}, []
            _update_archive(archive, history, pop, 0, tasks)
            stats = [{"generation": 0, "joint_size": len(pop), "joint_feasible": sum(p.fitness.feasible for p in pop),
                      "survivors_infeasible": sum(not p.fitness.feasible for p in pop)}]
            state = RunState(0, pop, normalizers.state(), archive, history, stats, len(records), len(pop))
            observer.on_barrier(state, pop, pop)
        else:
            normalizers.load_state(state.normalizer_state)

        problem = problem_description(tasks, objective_phrase(config))
        while state.generation < config.max_generations:
            if stop_after is not None and state.generation >= stop_after:
                break
            g = state.generation + 1
            pop = state.population
            context = tuple((p.genotype.prompt, p.fitness.combined_cost) for p in pop)
            reflection = reflect(oracles.language, InstructionBundle(
                "reflect", problem, context, tuple(t.domain_phrase for t in tasks)),
                derive_seed(config.seed, "reflect", g))
            offspring = generate_offspring(oracles.language, pop, config, g, config.seed, tasks=tasks,
                                           reflection=reflection, executor=executor)
            offspring = evaluate_all(offspring, oracles, config, tasks, g, executor)
            parents = pop
            if config.reevaluate_survivors:
                parents = evaluate_all(pop, oracles, config, tasks, g, executor, salt=f"@{g}")
            normalizers.observe(o.raw.physical_raw for o in offspring)
            if config.reevaluate_survivors:
                normalizers.observe(p.raw.physical_raw for p in parents)

            joint = dedup(parents, offspring)
            ranked = {ind.id: ind for ind in assign_fitness(joint, normalizers, config, tasks)}
            # evaluated members that dedup removed are still logged, with costs but no ranks
            evaluated = (list(parents) if config.reevaluate_survivors else []) + list(offspring)
            stray = [e for e in evaluated if e.id not in ranked]
            stray = {ind.id: ind for ind in assign_fitness(stray, normalizers, config, tasks)} if stray else {}
            recs = []
            for e in evaluated:
                ind = ranked.get(e.id) or stray[e.id]
                origin = Origin.SURVIVOR.value if e.generation_created < g else None
                recs.append(log_record(ind, run_id, g, oracles, config, ranked=e.id in ranked, origin=origin,
                                       novelty=_novelty(ind, baselines, tasks)))
            emit(recs)

            joint = [ranked[j.id] for j in joint]
            survivors = tournament_survival(joint, config.population_size, config.tournament_size,
                                            stream(config.seed, "survival", g), mo)
            _update_archive(state.archive, state.archive_history, survivors, g, tasks)
            state.generation_stats.append({
                "generation": g,
                "joint_size": len(joint),
                "joint_feasible": sum(j.fitness.feasible for j in joint),
                "survivors_infeasible": sum(not s.fitness.feasible for s in survivors),
            })
            state = RunState(g, survivors, normalizers.state(), state.archive, state.archive_history,
                             state.generation_stats, state.n_records + len(recs), state.evaluations + len(recs))
            observer.on_barrier(state, joint, survivors)
    finally:
        if executor is not None:
            executor.shutdown()

    return RunResult(config, run_id, state.population, state.archive, state.archive_history,
                     state.generation_stats, records)


def random_descriptor_baseline(config: RunConfig, oracles: Oracles, budget: Optional[int] = None,
                               seed: Optional[int] = None) -> list:
    """Equal-budget no-evolution reference: random descriptors, evaluated once each.

    The budget (default ``N + N * G``) is split over the tasks like the
    initial population. Like the engine, every phenotype is scored against
    every task. Returns ``(task_index, phys_raw, visual_scores)`` rows.
    """
    tasks = config.task_list
    seed = config.seed if seed is None else seed
    budget = budget or config.population_size * (config.max_generations + 1)
    n_per = [budget // len(tasks) + (1 if i < budget % len(tasks) else 0) for i in range(len(tasks))]
    rows = []
    for t, n in zip(tasks, n_per):
        bundle = InstructionBundle("initialize", problem_description(tasks, objective_phrase(config)), task_targets=(t.domain_phrase,),
                                   requested_count=n)
        text = oracles.language.complete(bundle, render_instruction(bundle), derive_seed(seed, "random-baseline", t.index))
        lines = [ln for ln in text.splitlines() if ln.strip()][:n]
        for i, line in enumerate(lines):
            g = child_from_output(line, t)
            mesh = oracles.generator.generate(g, derive_seed(seed, "random-baseline", t.index, i))
            raw = evaluate_raw(mesh, config.physical_objectives, oracles.visual, tasks, config.raster_resolution)
            rows.append((t.index, raw.physical_raw, raw.visual_scores))
    return rows
