"""Language-oracle driven population initialization and mating operators.

Every operator renders an :class:`InstructionBundle` into instruction text
(templates in ``data/instructions``), asks the oracle for a completion and
parses the answer back into a :class:`~gemevo.core.Genotype`. The scripted
oracle works from the structured bundle and ignores the rendered text; a
remote oracle sees only the text.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import Executor
from dataclasses import dataclass, field
from string import Template
from typing import Optional, Protocol, Sequence

import numpy as np

from .core import (
    EmptyDescriptor,
    GemError,
    Genotype,
    Individual,
    OracleFailure,
    Origin,
    Task,
    TokenBudgetExceeded,
    Tokenizer,
    WhitespaceTokenizer,
    genotype_key,
    parse_prompt,
    render_prompt,
)
from .remote import env_endpoint, post_json
from .seeding import derive_seed, stream
from .tables import instruction_template, stopwords, synonym_table, vocabulary

KINDS = ("initialize", "reflect", "self_mate", "same_domain_mate", "cross_domain_mate")
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'-]*")


class MalformedOracleOutput(GemError):
    pass


class MixedDomainParents(GemError):
    pass


class SingleDomainParents(GemError):
    pass


@dataclass(frozen=True)
class InstructionBundle:
    kind: str
    problem_description: str
    population_context: tuple = ()
    task_targets: tuple = ()
    requested_count: int = 1
    parents: tuple = ()
    reflection: str = ""
    child_task: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind {self.kind!r}")
        if self.kind != "initialize" and not self.population_context:
            raise ValueError(f"{self.kind} instructions need population context")


_OBJECTIVE_PHRASES = {"frontal_area": "projected frontal area", "drag_proxy": "drag", "lift_proxy": "lift"}


def objective_phrase(config) -> str:
    """Readable physical criterion of a run, e.g. ``drag (minimize), lift (maximize for airplane)``."""
    names = config.physical_objectives
    if len(names) == 1 and not config.maximize:
        return _OBJECTIVE_PHRASES.get(names[0], names[0])
    parts = []
    for i, name in enumerate(names):
        up = [t.domain_phrase for t in config.task_list if config.senses(t)[i] == "maximize"]
        sense = f"maximize for {', '.join(up)}, otherwise minimize" if up else "minimize"
        parts.append(f"{_OBJECTIVE_PHRASES.get(name, name)} ({sense})")
    return ", ".join(parts)


def problem_description(tasks: Sequence[Task], physical: str = "projected frontal area") -> str:
    targets = ", ".join(f'"{t.domain_phrase}"' for t in tasks)
    return Template(instruction_template("problem")).substitute(task_targets=targets, physical=physical).strip()


def render_instruction(bundle: InstructionBundle) -> str:
    population = "\n".join(f"- {p} :: {c:.4f}" for p, c in bundle.population_context)
    parents = "\n".join(f"- {p}" for p in bundle.parents)
    return Template(instruction_template(bundle.kind)).substitute(
        problem_description=bundle.problem_description,
        population=population,
        reflection=bundle.reflection or "(none)",
        parents=parents,
        task_targets=", ".join(bundle.task_targets),
        requested_count=bundle.requested_count,
        child_task=bundle.child_task,
    )


class LanguageOracle(Protocol):
    name: str
    max_context_tokens: int
    context_vocab_size: int
    deterministic: bool

    def complete(self, bundle: InstructionBundle, instruction: str, seed: int) -> str: ...


# ----------------------------------------------------------------------------
# scripted oracle


def _article_for(word: str) -> str:
    return "an" if word[:1].lower() in "aeiou" else "a"


def content_words(descriptor: str) -> list[str]:
    stop = stopwords()
    return [w.lower() for w in _WORD_RE.findall(descriptor) if w.lower() not in stop]


def _dedup(words):
    seen, out = set(), []
    for w in words:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


@dataclass
class ScriptedLanguageOracle:
    """Deterministic rule-based stand-in for an LLM.

    * initialize: ``a <adjective> [<adjective>] <shape noun>`` from the shipped word pools.
    * reflect: names the best and worst prompt (by cost) of the context.
    * self mate: replaces one word that has an entry in the synonym dictionary;
      which word and which synonym are seeded draws. Without any such word a
      pool adjective is inserted instead.
    * same-domain mate: alternates the parents' content words, then mutates
      with ``mutation_probability``.
    * cross-domain mate: concatenates the parents' content words in parent
      order, then mutates with ``mutation_probability``.

    Recombined descriptors drop repeated words and keep at most
    ``max_descriptor_words`` content words.
    """

    synonyms: Optional[dict] = None
    mutation_probability: float = 0.5
    max_descriptor_words: int = 8
    name: str = "scripted"
    max_context_tokens: int = 16_000
    context_vocab_size: int = 50_000
    deterministic: bool = True
    serial: bool = False

    def __post_init__(self):
        if self.synonyms is None:
            self.synonyms = dict(synonym_table())

    def complete(self, bundle: InstructionBundle, instruction: str, seed: int) -> str:
        rng = np.random.default_rng(seed)
        kind = bundle.kind
        if kind == "initialize":
            return self._initialize(bundle, rng)
        if kind == "reflect":
            return self._reflect(bundle)
        descs = []
        for p in bundle.parents:
            parsed = parse_prompt(p)
            descs.append(parsed[1] if parsed else p)
        if kind == "self_mate":
            desc = self.mutate(descs[0], rng)
        elif kind == "same_domain_mate":
            desc = self._recombine(self.interleave(descs), rng)
        else:
            desc = self._recombine(self.union(descs), rng)
        return f"A {bundle.child_task} in the shape of {desc}."

    # -- rules

    def interleave(self, descriptors) -> list[str]:
        lists = [content_words(d) for d in descriptors]
        out = []
        for i in range(max(map(len, lists), default=0)):
            out.extend(ws[i] for ws in lists if i < len(ws))
        return _dedup(out)

    def union(self, descriptors) -> list[str]:
        return _dedup(w for d in descriptors for w in content_words(d))

    def _recombine(self, words, rng) -> str:
        words = words[: self.max_descriptor_words] or ["shape"]
        desc = f"{_article_for(words[0])} {' '.join(words)}"
        if rng.random() < self.mutation_probability:
            desc = self.mutate(desc, rng)
        return desc

    def mutate(self, descriptor: str, rng) -> str:
        tokens = descriptor.split()
        stop = stopwords()
        cands = [i for i, t in enumerate(tokens) if t.lower().strip(".,") in self.synonyms]
        if cands:
            i = cands[int(rng.integers(len(cands)))]
            subs = self.synonyms[tokens[i].lower().strip(".,")]
            present = {t.lower() for t in tokens}
            subs = [s for s in subs if s not in present] or list(subs)
            tokens[i] = subs[int(rng.integers(len(subs)))]
        else:
            pool = vocabulary()["adjectives"]
            word = pool[int(rng.integers(len(pool)))]
            content = [i for i, t in enumerate(tokens) if t.lower() not in stop]
            if len(content) < self.max_descriptor_words:
                at = content[-1] if content else len(tokens)
                tokens.insert(at, word)
                i = at
            else:
                i = content[int(rng.integers(len(content)))]
                tokens[i] = word
        if i > 0 and tokens[i - 1].lower() in ("a", "an"):
            art = _article_for(tokens[i])
            tokens[i - 1] = art.capitalize() if tokens[i - 1][0].isupper() else art
        return " ".join(tokens)

    def _initialize(self, bundle, rng) -> str:
        pools = vocabulary()
        lines = []
        for domain in bundle.task_targets:
            nouns = list(pools["shapes"])
            for w in domain.lower().split():
                nouns += pools.get(w, ())
            adjs = pools["adjectives"]
            for _ in range(bundle.requested_count):
                words = [adjs[int(rng.integers(len(adjs)))]]
                if rng.random() < 0.3:
                    words.append(adjs[int(rng.integers(len(adjs)))])
                words.append(nouns[int(rng.integers(len(nouns)))])
                words = _dedup(words)
                lines.append(f"A {domain} in the shape of {_article_for(words[0])} {' '.join(words)}.")
        return "\n".join(lines)

    def _reflect(self, bundle) -> str:
        ctx = list(bundle.population_context)
        best = min(range(len(ctx)), key=lambda i: (ctx[i][1], i))
        worst = max(range(len(ctx)), key=lambda i: (ctx[i][1], -i))
        return (
            f"best: '{genotype_key(ctx[best][0])}' (cost {ctx[best][1]:.4f}); "
            f"worst: '{genotype_key(ctx[worst][0])}' (cost {ctx[worst][1]:.4f})"
        )


@dataclass
class RemoteLanguageOracle:
    """HTTP/JSON chat-completion adapter; not reproducible across calls.

    Request ``{"instruction_text", "max_tokens", "temperature", "seed"}``,
    response ``{"text"}``. Endpoint and key default to ``GEM_LLM_ENDPOINT`` and
    ``GEM_LLM_KEY``.
    """

    endpoint: Optional[str] = None
    key: Optional[str] = None
    max_tokens: int = 512
    temperature: float = 0.8
    timeout: float = 120.0
    name: str = "remote-llm"
    max_context_tokens: int = 16_000
    context_vocab_size: int = 50_000
    deterministic: bool = False
    serial: bool = False

    def __post_init__(self):
        if self.endpoint is None:
            self.endpoint, self.key = env_endpoint("GEM_LLM_ENDPOINT", "GEM_LLM_KEY")

    def complete(self, bundle: InstructionBundle, instruction: str, seed: int) -> str:
        reply = post_json(
            self.endpoint,
            {"instruction_text": instruction, "max_tokens": self.max_tokens,
             "temperature": self.temperature, "seed": int(seed)},
            self.key,
            self.timeout,
        )
        text = reply.get("text") if isinstance(reply, dict) else None
        if not isinstance(text, str):
            raise OracleFailure(f"malformed language response: {reply!r}")
        return text


# ----------------------------------------------------------------------------
# operators


def _ask(oracle: LanguageOracle, bundle: InstructionBundle, seed: int) -> str:
    return oracle.complete(bundle, render_instruction(bundle), int(seed))


def _domain_of(g: Genotype) -> str:
    parsed = parse_prompt(g.prompt)
    if parsed is None:
        raise MalformedOracleOutput(f"genotype does not follow the template: {g.prompt!r}")
    return parsed[0]


def child_from_output(text: str, task: Task, tokenizer: Optional[Tokenizer] = None) -> Genotype:
    """Parse an oracle answer into a genotype for ``task``.

    The first non-empty line is used. An answer that does not follow the
    template, or names another domain, is repaired once by wrapping its
    descriptor (or the whole line) into the template for ``task``.
    """
    lines = [ln.strip().strip('"').strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MalformedOracleOutput("empty oracle answer")
    line = re.sub(r"^\s*(?:[-*]|\d+[.)])\s*", "", lines[0])
    parsed = parse_prompt(line)
    descriptor = parsed[1] if parsed else re.sub(r"^(?:an?\s+)?", "", line, flags=re.IGNORECASE).rstrip(".")
    if parsed is None:
        descriptor = line.rstrip(".")
    try:
        return render_prompt(task, descriptor, tokenizer)
    except (EmptyDescriptor, TokenBudgetExceeded) as exc:
        raise MalformedOracleOutput(f"cannot repair oracle answer {line!r}: {exc}") from None


def _context_of(parents, context):
    if context:
        return tuple((p, float(c)) for p, c in context)
    return tuple((p.prompt, math.nan) for p in parents)


def initialize_population(oracle: LanguageOracle, tasks: Sequence[Task], n_per_task, seed: int,
                          tokenizer: Optional[Tokenizer] = None, max_retries: int = 3,
                          problem: Optional[str] = None) -> list[Genotype]:
    """Ask the oracle for ``n_per_task`` unique genotypes per task.

    ``n_per_task`` is an int or one count per task. Duplicates (by key, across
    all tasks) are re-requested up to ``max_retries`` times; remaining gaps are
    filled with ``<descriptor> variant <i>`` suffixes of already accepted ones.
    """
    counts = [n_per_task] * len(tasks) if isinstance(n_per_task, int) else list(n_per_task)
    if len(counts) != len(tasks) or min(counts) < 1:
        raise ValueError("n_per_task must be >= 1 for every task")
    tokenizer = tokenizer or WhitespaceTokenizer()
    problem = problem or problem_description(tasks)
    seen: set[str] = set()
    out: list[Genotype] = []
    for task, n in zip(tasks, counts):
        got: list[Genotype] = []
        for attempt in range(max_retries + 1):
            need = n - len(got)
            if need <= 0:
                break
            bundle = InstructionBundle("initialize", problem, task_targets=(task.domain_phrase,), requested_count=need)
            text = _ask(oracle, bundle, derive_seed(seed, "init", task.index, attempt))
            for line in text.splitlines():
                if not line.strip() or len(got) >= n:
                    continue
                try:
                    g = child_from_output(line, task, tokenizer)
                except MalformedOracleOutput:
                    continue
                if g.key not in seen:
                    seen.add(g.key)
                    got.append(g)
        i = 2
        while len(got) < n:
            base = got[(i - 2) % len(got)].descriptor if got else "a plain shape"
            try:
                g = render_prompt(task, f"{base} variant {i}", tokenizer)
            except TokenBudgetExceeded:
                g = render_prompt(task, f"a plain shape variant {i}", tokenizer)
            if g.key not in seen:
                seen.add(g.key)
                got.append(g)
            i += 1
        out.extend(got)
    return out


def reflect(oracle: LanguageOracle, bundle: InstructionBundle, seed: int = 0) -> str:
    if bundle.kind != "reflect":
        raise ValueError("reflect needs a bundle of kind 'reflect'")
    return _ask(oracle, bundle, seed).strip()


def self_mate(oracle: LanguageOracle, parent: Genotype, reflection: str, seed: int, *,
              context=None, problem: str = "", tokenizer: Optional[Tokenizer] = None) -> Genotype:
    domain = _domain_of(parent)
    task = Task(parent.task_index, domain)
    bundle = InstructionBundle("self_mate", problem, _context_of([parent], context), (domain,),
                               parents=(parent.prompt,), reflection=reflection, child_task=domain)
    return child_from_output(_ask(oracle, bundle, seed), task, tokenizer)


def same_domain_mate(oracle: LanguageOracle, parents: Sequence[Genotype], reflection: str, seed: int, *,
                     context=None, problem: str = "", tokenizer: Optional[Tokenizer] = None) -> Genotype:
    if len(parents) < 2:
        raise ValueError("same-domain mating needs at least two parents")
    if len({p.task_index for p in parents}) != 1:
        raise MixedDomainParents("same-domain mating needs parents of a single task")
    domain = _domain_of(parents[0])
    task = Task(parents[0].task_index, domain)
    bundle = InstructionBundle("same_domain_mate", problem, _context_of(parents, context), (domain,),
                               parents=tuple(p.prompt for p in parents), reflection=reflection, child_task=domain)
    return child_from_output(_ask(oracle, bundle, seed), task, tokenizer)


def cross_domain_mate(oracle: LanguageOracle, parents: Sequence[Genotype], child_task: Task, reflection: str,
                      seed: int, *, context=None, problem: str = "", tokenizer: Optional[Tokenizer] = None) -> Genotype:
    if len(parents) < 2:
        raise ValueError("cross-domain mating needs at least two parents")
    if len({p.task_index for p in parents}) < 2:
        raise SingleDomainParents("cross-domain mating needs parents from at least two tasks")
    if child_task.index not in {p.task_index for p in parents}:
        raise ValueError("child task must be one of the parents' tasks")
    targets = tuple(dict.fromkeys(_domain_of(p) for p in parents))
    bundle = InstructionBundle("cross_domain_mate", problem, _context_of(parents, context), targets,
                               parents=tuple(p.prompt for p in parents), reflection=reflection,
                               child_task=child_task.domain_phrase)
    return child_from_output(_ask(oracle, bundle, seed), child_task, tokenizer)


# ----------------------------------------------------------------------------
# offspring generation


def selection_key(ind: Individual, multi_objective: bool):
    f = ind.fitness
    if multi_objective:
        return (f.scalar_fitness, f.combined_cost)
    return (f.combined_cost,)


def tournament(pool: Sequence[Individual], size: int, rng, multi_objective: bool = False) -> Individual:
    """Best of ``size`` distinct random members; ties go to the earlier pool position."""
    k = min(size, len(pool))
    picks = rng.choice(len(pool), size=k, replace=False)
    best = min(picks, key=lambda i: (selection_key(pool[i], multi_objective), i))
    return pool[int(best)]


@dataclass
class OffspringContext:
    oracle: LanguageOracle
    population: Sequence[Individual]
    config: object
    generation: int
    seed: int
    tasks: dict = field(default_factory=dict)
    reflection: str = ""
    problem: str = ""
    tokenizer: Optional[Tokenizer] = None


def draw_operator(rng, config) -> str:
    """One uniform draw picks ``self``, ``cross`` or ``same`` with the configured probabilities."""
    u = rng.random()
    if u < config.self_mating_probability:
        return "self"
    if u < config.self_mating_probability + config.cross_domain_probability:
        return "cross"
    return "same"


def _make_one(ctx: OffspringContext, slot: int) -> Individual:
    cfg = ctx.config
    mo = cfg.objective_mode == "multi_objective"
    pop = list(ctx.population)
    pop_context = tuple((p.genotype.prompt, p.fitness.combined_cost) for p in pop)
    kw = dict(context=pop_context, problem=ctx.problem, tokenizer=ctx.tokenizer)
    ident = f"g{ctx.generation:03d}-o{slot:03d}"

    for attempt in range(cfg.max_attempts):
        rng = stream(ctx.seed, "offspring", ctx.generation, slot, attempt)
        op_seed = derive_seed(ctx.seed, "offspring", ctx.generation, slot, attempt, "llm")
        op = draw_operator(rng, cfg)
        try:
            if op == "self":
                parent = tournament(pop, cfg.tournament_size, rng, mo)
                child = self_mate(ctx.oracle, parent.genotype, ctx.reflection, op_seed, **kw)
                origin = Origin.SELF_MATE
            else:
                p1 = tournament(pop, cfg.tournament_size, rng, mo)
                if op == "cross":
                    pool = [x for x in pop if x.task_index != p1.task_index]
                else:
                    pool = [x for x in pop if x.task_index == p1.task_index and x is not p1]
                if not pool:
                    pool = [x for x in pop if x is not p1] or pop
                p2 = tournament(pool, cfg.tournament_size, rng, mo)
                if p1.task_index == p2.task_index:
                    child = same_domain_mate(ctx.oracle, [p1.genotype, p2.genotype], ctx.reflection, op_seed, **kw)
                    origin = Origin.SAME_DOMAIN
                else:
                    child_idx = (p1.task_index, p2.task_index)[int(rng.integers(2))]
                    child = cross_domain_mate(ctx.oracle, [p1.genotype, p2.genotype], ctx.tasks[child_idx],
                                              ctx.reflection, op_seed, **kw)
                    origin = Origin.CROSS_DOMAIN
            return Individual(ident, child, origin, ctx.generation)
        except (GemError, ValueError):
            continue

    # fallback: self-mate the best member of a random task
    rng = stream(ctx.seed, "offspring", ctx.generation, slot, "fallback")
    present = sorted({p.task_index for p in pop})
    k = present[int(rng.integers(len(present)))]
    members = [p for p in pop if p.task_index == k]
    best = min(range(len(members)), key=lambda i: (selection_key(members[i], mo), i))
    child = self_mate(ctx.oracle, members[best].genotype, ctx.reflection,
                      derive_seed(ctx.seed, "offspring", ctx.generation, slot, "fallback", "llm"), **kw)
    return Individual(ident, child, Origin.SELF_MATE, ctx.generation)


def generate_offspring(oracle: LanguageOracle, population: Sequence[Individual], config, generation: int, seed: int,
                       *, tasks: Optional[Sequence[Task]] = None, reflection: str = "",
                       tokenizer: Optional[Tokenizer] = None, executor: Optional[Executor] = None) -> list[Individual]:
    """Produce exactly ``config.population_size`` offspring.

    Each slot draws u ~ U(0, 1): below ``self_mating_probability`` it self-mates
    one tournament winner; below ``self + cross_domain_probability`` it pairs the
    winner with a tournament winner from another task; otherwise with one from
    the same task. The pair is then mated by the same-domain or cross-domain
    operator according to whether the tasks match. Slot ``i`` only uses seed
    streams derived from ``(seed, generation, i)``, so slots may run in parallel.
    """
    if not population or any(p.fitness is None for p in population):
        raise ValueError("offspring generation needs an evaluated population")
    tasks = tuple(tasks or config.task_list)
    ctx = OffspringContext(oracle, tuple(population), config, generation, seed, {t.index: t for t in tasks},
                           reflection, problem_description(tasks, objective_phrase(config)), tokenizer)
    slots = range(config.population_size)
    if executor is None or getattr(oracle, "serial", False):
        return [_make_one(ctx, i) for i in slots]
    return list(executor.map(lambda i: _make_one(ctx, i), slots))
