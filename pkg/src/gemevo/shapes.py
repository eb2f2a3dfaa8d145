"""Closed, outward-wound primitive meshes used by the procedural generator."""

from __future__ import annotations

import numpy as np

from .core import PhenotypeMesh

_BOX_TRIS = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # bottom z-
        [4, 5, 6], [4, 6, 7],  # top z+
        [0, 1, 5], [0, 5, 4],  # y-
        [2, 3, 7], [2, 7, 6],  # y+
        [1, 2, 6], [1, 6, 5],  # x+
        [0, 4, 7], [0, 7, 3],  # x-
    ]
)


def box(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    sx, sy, sz = (0.5 * float(s) for s in size)
    cx, cy, cz = center
    v = np.array(
        [
            [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
            [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
        ]
    ) + [cx, cy, cz]
    return v, _BOX_TRIS.copy()


def ellipsoid(radii=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), n_lon: int = 16, n_lat: int = 8,
              nose: float = 0.0):
    """UV ellipsoid with single-vertex poles on the z axis.

    ``nose`` in (-1, 1) shortens the front half (x > 0) and lengthens the rear
    by the same fraction, keeping the surface closed.
    """
    rx, ry, rz = radii
    rx_front, rx_rear = rx * (1 - nose), rx * (1 + nose)
    verts = [[0.0, 0.0, rz]]
    for i in range(1, n_lat):
        th = np.pi * i / n_lat
        for j in range(n_lon):
            ph = 2 * np.pi * j / n_lon
            cx = np.sin(th) * np.cos(ph)
            verts.append([cx * (rx_front if cx > 0 else rx_rear), ry * np.sin(th) * np.sin(ph), rz * np.cos(th)])
    verts.append([0.0, 0.0, -rz])
    south = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append([0, ring(1, j), ring(1, j + 1)])
        tris.append([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, c, d])
            tris.append([a, d, b])
    return np.asarray(verts) + center, np.asarray(tris)


def wedge(size=(1.0, 1.0, 1.0), nose_height: float = 0.25):
    """Prism whose side profile slopes from full height at the rear (x-) down to the nose (x+)."""
    sx, sy, sz = (0.5 * float(s) for s in size)
    zn = -sz + 2 * sz * nose_height
    v = np.array(
        [
            [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
            [-sx, -sy, sz], [sx, -sy, zn], [sx, sy, zn], [-sx, sy, sz],
        ]
    )
    return v, _BOX_TRIS.copy()


def icosphere(subdivisions: int = 4, radius: float = 1.0) -> PhenotypeMesh:
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [list(np.asarray(p, float) / np.linalg.norm(p)) for p in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j])
                verts.append(list(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return PhenotypeMesh(np.asarray(verts) * radius, np.asarray(faces))


def merge(parts) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate (vertices, triangles) parts into one multi-component mesh."""
    verts, tris, offset = [], [], 0
    for v, t in parts:
        verts.append(np.asarray(v, float))
        tris.append(np.asarray(t) + offset)
        offset += len(v)
    return np.concatenate(verts), np.concatenate(tris)


def mirrored(mesh: PhenotypeMesh, axis: int = 2) -> PhenotypeMesh:
    """Reflect through the plane normal to coordinate ``axis``; winding is flipped to stay outward."""
    v = mesh.vertices.copy()
    v[:, axis] *= -1
    return PhenotypeMesh(v, mesh.triangles[:, ::-1], mesh.provenance)
