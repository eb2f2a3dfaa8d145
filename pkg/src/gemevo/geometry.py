"""Geometric measures on triangle meshes.

Conventions: flow along +x, up is +z. Meshes are closed and outward-oriented
(counter-clockwise seen from outside) wherever volumes or normals matter.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .core import DegenerateMesh, GemError, PhenotypeMesh

FLOW_AXIS = np.array([1.0, 0.0, 0.0])
UP_AXIS = np.array([0.0, 0.0, 1.0])
DEFAULT_RESOLUTION = 512


class ZeroAxis(GemError):
    pass


def _unit(axis) -> np.ndarray:
    a = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(a)
    if not np.isfinite(n) or n == 0.0:
        raise ZeroAxis("projection axis must be non-zero")
    return a / n


def _corners(mesh: PhenotypeMesh):
    tri = mesh.vertices[mesh.triangles]
    return tri[:, 0], tri[:, 1], tri[:, 2]


def triangle_areas(mesh: PhenotypeMesh) -> np.ndarray:
    a, b, c = _corners(mesh)
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def unit_normals(mesh: PhenotypeMesh) -> np.ndarray:
    a, b, c = _corners(mesh)
    n = np.cross(b - a, c - a)
    length = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, length, out=np.zeros_like(n), where=length > 0)


def surface_area(mesh: PhenotypeMesh) -> float:
    return float(triangle_areas(mesh).sum())


def signed_volume(mesh: PhenotypeMesh) -> float:
    """Sum of signed tetrahedra against the origin; positive for outward winding."""
    a, b, c = _corners(mesh)
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def is_watertight(mesh: PhenotypeMesh) -> bool:
    """Every undirected edge is used by exactly two triangles, once in each direction."""
    if mesh.n_triangles == 0:
        return False
    t = mesh.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    counts = Counter(map(tuple, directed.tolist()))
    for (i, j), n in counts.items():
        if n != 1 or counts.get((j, i), 0) != 1:
            return False
    return True


def projection_basis(axis) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (u, v) spanning the plane perpendicular to ``axis``.

    For the flow axis +x this gives u = +y, v = +z.
    """
    a = _unit(axis)
    up = UP_AXIS if abs(a @ UP_AXIS) < 0.9 else np.array([0.0, 1.0, 0.0])
    v = up - (up @ a) * a
    v /= np.linalg.norm(v)
    u = np.cross(v, a)
    return u, v


def projected_frontal_area(mesh: PhenotypeMesh, axis=FLOW_AXIS, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Silhouette area of ``mesh`` seen along ``axis``.

    Triangles are projected onto the plane perpendicular to the axis and
    scan-converted onto a ``resolution``-square grid spanning the projected
    bounding square; a cell counts when its center lies inside any projected
    triangle, so overlapping triangles are counted once.

    Raises:
        DegenerateMesh: no triangles.
        ZeroAxis: zero-length axis.
    """
    mesh.require_valid()
    u, v = projection_basis(axis)
    pts = np.stack([mesh.vertices @ u, mesh.vertices @ v], axis=1)
    lo = pts.min(axis=0)
    side = float((pts.max(axis=0) - lo).max())
    if side == 0.0:
        return 0.0
    R = int(resolution)
    h = side / R
    # grid coordinates: cell (r, c) has center at (c + 0.5, r + 0.5)
    tri = (pts[mesh.triangles] - lo) / h
    x, y = tri[..., 0], tri[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    keep = np.abs(area2) > 1e-12
    x, y = x[keep], y[keep]
    if len(x) == 0:
        return 0.0

    r_lo = np.clip(np.ceil(y.min(axis=1) - 0.5), 0, R - 1).astype(np.int64)
    r_hi = np.clip(np.floor(y.max(axis=1) - 0.5), 0, R - 1).astype(np.int64)
    span = np.maximum(r_hi - r_lo + 1, 0)
    tri_id = np.repeat(np.arange(len(x)), span)
    if len(tri_id) == 0:
        return 0.0
    offsets = np.arange(len(tri_id)) - np.repeat(np.cumsum(span) - span, span)
    rows = r_lo[tri_id] + offsets
    yc = rows + 0.5

    xl = np.full(len(rows), np.inf)
    xr = np.full(len(rows), -np.inf)
    tx, ty = x[tri_id], y[tri_id]
    for i, j in ((0, 1), (1, 2), (2, 0)):
        y0, y1, x0, x1 = ty[:, i], ty[:, j], tx[:, i], tx[:, j]
        crosses = ((y0 - yc) * (y1 - yc) <= 0) & (y0 != y1)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x0 + (yc - y0) * (x1 - x0) / (y1 - y0)
        xl = np.where(crosses, np.minimum(xl, xi), xl)
        xr = np.where(crosses, np.maximum(xr, xi), xr)

    ok = np.isfinite(xl) & np.isfinite(xr)
    c_lo = np.clip(np.ceil(xl[ok] - 0.5), 0, R).astype(np.int64)
    c_hi = np.clip(np.floor(xr[ok] - 0.5), -1, R - 1).astype(np.int64)
    rows = rows[ok]
    nonempty = c_lo <= c_hi
    rows, c_lo, c_hi = rows[nonempty], c_lo[nonempty], c_hi[nonempty]

    diff = np.zeros((R, R + 1), dtype=np.int32)
    np.add.at(diff, (rows, c_lo), 1)
    np.add.at(diff, (rows, c_hi + 1), -1)
    covered = np.count_nonzero(np.cumsum(diff[:, :R], axis=1) > 0)
    return covered * h * h


def drag_proxy(mesh: PhenotypeMesh, axis=FLOW_AXIS, resolution: int = DEFAULT_RESOLUTION,
               frontal_area: float | None = None) -> float:
    """Geometric drag heuristic, not a flow simulation.

    ``A * (1 + S / (2 A)) - 1`` with A the frontal area and S the wetted
    surface area.
    """
    mesh.require_valid()
    A = projected_frontal_area(mesh, axis, resolution) if frontal_area is None else frontal_area
    if A <= 0.0:
        raise DegenerateMesh("zero frontal area")
    return A * (1.0 + surface_area(mesh) / (2.0 * A)) - 1.0


def lift_proxy(mesh: PhenotypeMesh, axis=FLOW_AXIS, up=UP_AXIS) -> float:
    """Geometric lift heuristic: mean over triangles of area * (n.up) * (n.axis)."""
    mesh.require_valid()
    a, u = _unit(axis), _unit(up)
    n = unit_normals(mesh)
    return float(np.mean(triangle_areas(mesh) * (n @ u) * (n @ a)))


def fit_unit_cube(mesh: PhenotypeMesh) -> tuple[PhenotypeMesh, float]:
    """Uniformly scale and translate so the bounding box fits [0, 1]^3 with one extent equal to 1."""
    mesh.require_valid()
    v = mesh.vertices
    lo = v.min(axis=0)
    extent = float((v.max(axis=0) - lo).max())
    if extent == 0.0:
        raise DegenerateMesh("mesh collapses to a point")
    scale = 1.0 / extent
    out = PhenotypeMesh((v - lo) * scale, mesh.triangles, mesh.provenance)
    return out.with_provenance(scale_factor=scale), scale
