"""Independent reference implementations used to check the engine.

These are deliberately naive (brute force, Monte Carlo, hand-written rules)
and share no code with the package.
"""

import itertools
import math

import numpy as np


def brute_ranks(costs):
    """Rank of row i in column k = 1 + #rows strictly cheaper + #earlier rows with equal cost."""
    n, K = len(costs), len(costs[0])
    out = [[0] * K for _ in range(n)]
    for k in range(K):
        for i in range(n):
            r = 1
            for j in range(n):
                if costs[j][k] < costs[i][k] or (costs[j][k] == costs[i][k] and j < i):
                    r += 1
            out[i][k] = r
    return out


def brute_phi(ranks):
    return [min(row) for row in ranks]


def dominates(a, b):
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def brute_front_index(points):
    """Peel non-dominated layers by exhaustive pairwise checks; returns 1-based layer per point."""
    remaining = set(range(len(points)))
    layer = {}
    f = 1
    while remaining:
        front = {i for i in remaining if not any(dominates(points[j], points[i]) for j in remaining if j != i)}
        for i in front:
            layer[i] = f
        remaining -= front
        f += 1
    return [layer[i] for i in range(len(points))]


def monte_carlo_hv(points, ref=(1.0, 1.0), samples=1_000_000, seed=0, stratified=False):
    """Fraction of uniform samples in [0, ref] dominated by some point, times the box area.

    With ``stratified`` the box is cut into a sqrt(samples)^2 grid and one
    uniform sample is drawn per cell (jittered sampling), which keeps the
    estimator unbiased while shrinking its variance by orders of magnitude.
    """
    rng = np.random.default_rng(seed)
    if stratified:
        m = int(round(math.sqrt(samples)))
        gx, gy = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        cells = np.column_stack([gx.ravel(), gy.ravel()]).astype(float)
        u = (cells + rng.random((m * m, 2))) / m * np.asarray(ref)
    else:
        u = rng.random((samples, 2)) * np.asarray(ref)
    p = np.asarray(points, dtype=float)
    covered = np.zeros(len(u), dtype=bool)
    for x, y in p:
        covered |= (u[:, 0] >= x) & (u[:, 1] >= y)
    return covered.mean() * ref[0] * ref[1]


def inclusion_exclusion_hv(points, ref=(1.0, 1.0)):
    """Union area of the boxes [p, ref] by inclusion-exclusion (small inputs only)."""
    total = 0.0
    for r in range(1, len(points) + 1):
        for combo in itertools.combinations(points, r):
            x = max(p[0] for p in combo)
            y = max(p[1] for p in combo)
            area = max(0.0, ref[0] - x) * max(0.0, ref[1] - y)
            total += (-1) ** (r + 1) * area
    return total


def combined_cost(phys, vis, alpha):
    return (1 - alpha) * phys + alpha * (1 - vis)


def box_surface_area(lx, ly, lz):
    return 2 * (lx * ly + ly * lz + lx * lz)


def drag_formula(frontal, surface):
    return frontal * (1 + surface / (2 * frontal)) - 1


def tetra_volume(vertices, triangles):
    """Signed volume from the divergence theorem, written out per triangle."""
    vol = 0.0
    for a, b, c in triangles:
        p, q, r = vertices[a], vertices[b], vertices[c]
        vol += (p[0] * (q[1] * r[2] - q[2] * r[1])
                - p[1] * (q[0] * r[2] - q[2] * r[0])
                + p[2] * (q[0] * r[1] - q[1] * r[0])) / 6.0
    return vol


def hand_vocab(prompt, stop):
    """Hand tokenizer for the overlap example: letters only, lowercase, stopwords removed, no stemming needed."""
    words = "".join(ch if ch.isalpha() else " " for ch in prompt.lower()).split()
    return {w for w in words if w not in stop}


def disc_area(radius=1.0):
    return math.pi * radius ** 2
