"""Phenotype generators: the oracle interface and a procedural stand-in.

The procedural generator reads the prompt's descriptor through a fixed
keyword table (``data/keywords.txt``) into a :class:`PrimitiveRecipe`, then
emits a closed triangulation of that recipe. Words the table does not know
are hashed into a per-axis scale perturbation; together with the seeded
perturbation the total stays within +/-20%.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from typing import Protocol, Union

import numpy as np

from .core import (
    DEFAULT_MAX_TOKENS,
    GemError,
    Genotype,
    PhenotypeMesh,
    Provenance,
    TokenBudgetExceeded,
    genotype_key,
    parse_prompt,
)
from .shapes import box, ellipsoid, merge, wedge
from .tables import keyword_table, stopwords

BASE_SHAPES = ("box", "ellipsoid", "wedge", "fuselage-with-wings")
# (length, width-or-span, height) before modifiers
BASE_PROPORTIONS = {
    "box": (2.0, 1.0, 0.9),
    "wedge": (2.0, 1.0, 0.8),
    "ellipsoid": (2.0, 0.9, 0.8),
    "fuselage-with-wings": (3.0, 3.0, 0.45),
}
MODIFIER_STEP = 1.25
MODIFIER_LIMITS = (0.4, 2.5)
WORD_PERTURBATION = 0.1
SEED_PERTURBATION = 0.1
NOSE_LIMIT = 0.3
PITCH_LIMIT = 0.05
PITCH_STEP = 0.08
PITCH_MAX = 0.4
_AXES = {"x": 0, "y": 1, "z": 2}
_WORD_RE = re.compile(r"[a-z]+")


class GenerationFailure(GemError):
    pass


class GeneratorOracle(Protocol):
    name: str
    max_prompt_tokens: int
    vocab_size: int

    def count_tokens(self, text: str) -> int: ...

    def generate(self, genotype, seed: int, *, genotype_id: str = "", generation: int = 0) -> PhenotypeMesh: ...


@dataclass(frozen=True)
class PrimitiveRecipe:
    base: str
    scale: tuple[float, float, float]
    spoiler: bool = False
    canard: bool = False
    tail: bool = False
    perturbation_seed: int = 0
    tags: tuple[str, ...] = ()
    # fore/aft asymmetry of rounded bodies (see shapes.ellipsoid) and
    # rotation about the y axis in radians; positive pitch raises the lift proxy
    nose: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        if self.base not in BASE_SHAPES:
            raise ValueError(f"unknown base shape {self.base!r}")
        if len(self.scale) != 3 or min(self.scale) <= 0:
            raise ValueError("all scales must be positive")


def _word_offsets(word: str) -> np.ndarray:
    h = zlib.crc32(word.encode("utf-8"))
    parts = np.array([(h >> s) & 0x3FF for s in (0, 10, 20)], dtype=float)
    return parts / 1023.0 * 2.0 - 1.0


def recipe_from_prompt(prompt: str, seed: int) -> PrimitiveRecipe:
    """Map a prompt onto a recipe. Pure in (normalized prompt, seed)."""
    text = genotype_key(prompt)
    parsed = parse_prompt(text)
    if parsed is not None:
        domain, descriptor = parsed
    else:
        domain, descriptor = re.sub(r"^an?\s+", "", text).rstrip("."), ""
    table, stop = keyword_table(), stopwords()
    dwords = _WORD_RE.findall(descriptor)
    domain_words = _WORD_RE.findall(domain)
    # a bare label has no descriptor, so its domain words drive the recipe
    feature_words = dwords if dwords else domain_words

    base = None
    for w in dwords + domain_words:
        feat = table.get(w, "")
        if feat.startswith("base:"):
            base = feat[5:]
            break
    base = base or "box"

    flags, tags, modifiers, plain = set(), {base}, np.zeros(3), []
    pitch_steps = 0
    for w in feature_words:
        feat = table.get(w)
        if feat is None:
            if dwords and w not in stop:
                plain.append(w)
            continue
        kind, _, value = feat.partition(":")
        if kind == "flag":
            flags.add(value)
            tags.update((value, w))
        elif kind == "base":
            tags.add(w)
        elif kind == "scale":
            modifiers[_AXES[value[0]]] += 1 if value[1] == "+" else -1
        elif kind == "pitch":
            pitch_steps += 1 if value == "+" else -1
    tags.update(flags)

    factor = np.clip(MODIFIER_STEP ** modifiers, *MODIFIER_LIMITS)
    word_pert = np.mean([_word_offsets(w) for w in plain], axis=0) if plain else np.zeros(3)
    rng = np.random.default_rng([zlib.crc32(text.encode("utf-8")), int(seed) & 0xFFFFFFFF, int(seed) >> 32])
    seed_pert = rng.uniform(-1.0, 1.0, 3)
    nose = rng.uniform(-NOSE_LIMIT, NOSE_LIMIT)
    pitch = np.clip(PITCH_STEP * pitch_steps + rng.uniform(-PITCH_LIMIT, PITCH_LIMIT), -PITCH_MAX, PITCH_MAX)
    scale = np.asarray(BASE_PROPORTIONS[base]) * factor * (1.0 + WORD_PERTURBATION * word_pert + SEED_PERTURBATION * seed_pert)
    return PrimitiveRecipe(
        base=base,
        scale=tuple(float(s) for s in scale),
        spoiler="spoiler" in flags,
        canard="canard" in flags,
        tail="tail" in flags,
        perturbation_seed=int(seed),
        tags=tuple(sorted(tags)),
        nose=float(nose),
        pitch=float(pitch),
    )


def build_recipe_mesh(recipe: PrimitiveRecipe) -> tuple[np.ndarray, np.ndarray]:
    """Closed triangulation of a recipe; +x forward, z up, body centered on the origin."""
    L, W, H = recipe.scale
    parts = []
    if recipe.base == "box":
        parts.append(box((L, W, H)))
        body_w, top = W, H / 2
    elif recipe.base == "wedge":
        parts.append(wedge((L, W, H)))
        body_w, top = W, H / 2
    elif recipe.base == "ellipsoid":
        parts.append(ellipsoid((L / 2, W / 2, H / 2), nose=recipe.nose))
        body_w, top = W, H / 2
    else:
        # W is the wing span, H the fuselage diameter
        parts.append(ellipsoid((L / 2, H / 2, H / 2), nose=recipe.nose))
        parts.append(box((0.22 * L, W, 0.035 * L), center=(0.05 * L, 0.0, 0.0)))
        body_w, top = H, H / 2
    if recipe.spoiler:
        parts.append(box((0.1 * L, 0.9 * body_w, 0.025 * L), center=(-0.4 * L, 0.0, top + 0.06 * L)))
    if recipe.canard:
        parts.append(box((0.08 * L, 0.6 * max(body_w, W) + 0.2 * L, 0.02 * L), center=(0.32 * L, 0.0, 0.0)))
    if recipe.tail:
        fin_h = 0.15 * L + 0.5 * H
        parts.append(box((0.14 * L, 0.025 * L, fin_h), center=(-0.42 * L, 0.0, fin_h / 2)))
    v, t = merge(parts)
    if recipe.pitch:
        c, s = np.cos(recipe.pitch), np.sin(recipe.pitch)
        # raises the -x end, turning upper surfaces towards +x
        v = v @ np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    return v, t


@dataclass(frozen=True)
class ProceduralGenerator:
    """Deterministic keyword-driven mesh generator; stateless and thread-safe."""

    name: str = "procedural"
    max_prompt_tokens: int = DEFAULT_MAX_TOKENS
    vocab_size: int = 50_000
    serial: bool = False

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def recipe(self, genotype: Union[Genotype, str], seed: int) -> PrimitiveRecipe:
        prompt = genotype.prompt if isinstance(genotype, Genotype) else genotype
        return recipe_from_prompt(prompt, seed)

    def generate(self, genotype: Union[Genotype, str], seed: int, *, genotype_id: str = "", generation: int = 0) -> PhenotypeMesh:
        prompt = genotype.prompt if isinstance(genotype, Genotype) else genotype
        n = self.count_tokens(prompt)
        if n > self.max_prompt_tokens:
            raise TokenBudgetExceeded(f"{n} tokens > {self.max_prompt_tokens}")
        recipe = self.recipe(prompt, seed)
        v, t = build_recipe_mesh(recipe)
        prov = Provenance(genotype_id, generation, int(seed), self.name, recipe.tags, 1.0)
        mesh = PhenotypeMesh(v, t, prov)
        if mesh.n_triangles == 0:
            raise GenerationFailure("empty mesh")
        return mesh
