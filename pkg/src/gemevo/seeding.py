"""Hierarchical seed streams.

Every random draw in a run comes from ``stream(run_seed, component, ...)``.
Path components may be strings or non-negative ints; strings are hashed with
CRC32 so streams are stable across processes and Python versions.
"""

import zlib

import numpy as np


def _path_ints(path):
    out = []
    for p in path:
        if isinstance(p, str):
            out.append(zlib.crc32(p.encode("utf-8")))
        else:
            p = int(p)
            if p < 0:
                raise ValueError("seed path integers must be non-negative")
            out.append(p)
    return tuple(out)


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=_path_ints(path))


def stream(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *path))


def derive_seed(seed: int, *path) -> int:
    """A 63-bit integer seed for handing to an oracle."""
    state = seed_sequence(seed, *path).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)
