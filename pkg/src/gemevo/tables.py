"""Loaders for the plain-text tables shipped in ``gemevo/data``."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


def _lines(name: str):
    text = resources.files("gemevo.data").joinpath(name).read_text(encoding="utf-8")
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


@lru_cache(maxsize=None)
def keyword_table() -> dict[str, str]:
    """keyword -> feature string such as ``base:wedge`` or ``scale:y-``."""
    table = {}
    for line in _lines("keywords.txt"):
        word, feature = line.split()
        table[word] = feature
    return table


@lru_cache(maxsize=None)
def synonym_table() -> dict[str, tuple[str, ...]]:
    table = {}
    for line in _lines("synonyms.txt"):
        word, *subs = line.split()
        table[word] = tuple(subs)
    return table


@lru_cache(maxsize=None)
def domain_tags() -> dict[str, tuple[tuple[float, float], frozenset[str]]]:
    """domain word -> ((width/length, height/length), tag set)."""
    table = {}
    for line in _lines("domain_tags.txt"):
        word, w, h, *tags = line.split()
        table[word] = ((float(w), float(h)), frozenset(tags))
    return table


@lru_cache(maxsize=None)
def vocabulary() -> dict[str, tuple[str, ...]]:
    pools = {}
    for line in _lines("vocabulary.txt"):
        name, words = line.split(":", 1)
        pools[name.strip()] = tuple(words.split())
    return pools


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return frozenset(w for line in _lines("stopwords.txt") for w in line.split())


@lru_cache(maxsize=None)
def suffix_rules() -> tuple[tuple[tuple[str, str, int], ...], frozenset[str]]:
    rules, keep = [], set()
    for line in _lines("suffix_rules.txt"):
        parts = line.split()
        if parts[0] == "!keep":
            keep.update(parts[1:])
            continue
        suffix, repl, min_stem = parts
        rules.append((suffix, "" if repl == "-" else repl, int(min_stem)))
    rules.sort(key=lambda r: -len(r[0]))
    return tuple(rules), frozenset(keep)


@lru_cache(maxsize=None)
def instruction_template(kind: str) -> str:
    return resources.files("gemevo.data").joinpath("instructions").joinpath(f"{kind}.txt").read_text(encoding="utf-8")
