"""OBJ and ASCII STL reading/writing for triangle meshes.

Coordinates are written with ``repr`` so a write/read round trip is exact.
STL has no shared vertices; reading welds exactly-equal coordinates back
together, which recovers the topology of meshes written here.
"""

from __future__ import annotations

import numpy as np

from .core import GemError, PhenotypeMesh

FORMATS = ("obj", "stl-ascii")


class ParseError(GemError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnsupportedFormat(GemError):
    pass


def _check_format(fmt: str) -> str:
    fmt = fmt.lower()
    if fmt == "stl":
        fmt = "stl-ascii"
    if fmt not in FORMATS:
        raise UnsupportedFormat(f"unsupported mesh format {fmt!r}")
    return fmt


def write_mesh(mesh: PhenotypeMesh, fmt: str = "obj") -> bytes:
    fmt = _check_format(fmt)
    mesh.require_valid()
    lines = []
    if fmt == "obj":
        for x, y, z in mesh.vertices.tolist():
            lines.append(f"v {x!r} {y!r} {z!r}")
        for i, j, k in (mesh.triangles + 1).tolist():
            lines.append(f"f {i} {j} {k}")
    else:
        lines.append("solid mesh")
        tri = mesh.vertices[mesh.triangles]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
        for face, nn in zip(tri.tolist(), n.tolist()):
            lines.append(f"facet normal {nn[0]!r} {nn[1]!r} {nn[2]!r}")
            lines.append("  outer loop")
            for x, y, z in face:
                lines.append(f"    vertex {x!r} {y!r} {z!r}")
            lines.append("  endloop")
            lines.append("endfacet")
        lines.append("endsolid mesh")
    return ("\n".join(lines) + "\n").encode("ascii")


def _floats(parts, lineno):
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"bad number in {' '.join(parts)!r}", lineno) from None
    if not all(np.isfinite(vals)):
        raise ParseError("non-finite coordinate", lineno)
    return vals


def _read_obj(text: str) -> PhenotypeMesh:
    verts, tris = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "v":
            if len(rest) < 3:
                raise ParseError("vertex needs 3 coordinates", lineno)
            verts.append(_floats(rest[:3], lineno))
        elif head == "f":
            if len(rest) < 3:
                raise ParseError("face needs at least 3 vertices", lineno)
            idx = []
            for tok in rest:
                try:
                    i = int(tok.split("/", 1)[0])
                except ValueError:
                    raise ParseError(f"bad face index {tok!r}", lineno) from None
                if i == 0:
                    raise ParseError("OBJ indices are 1-based; got 0", lineno)
                i = i - 1 if i > 0 else len(verts) + i
                if not 0 <= i < len(verts):
                    raise ParseError(f"face index {tok} out of range", lineno)
                idx.append(i)
            # fan-triangulate polygons
            for k in range(1, len(idx) - 1):
                tris.append([idx[0], idx[k], idx[k + 1]])
        # other records (vn, vt, o, g, s, usemtl...) carry nothing we need
    if not tris:
        raise ParseError("no faces found")
    return PhenotypeMesh(np.array(verts, float), np.array(tris, np.int64))


def _read_stl(text: str) -> PhenotypeMesh:
    index: dict[tuple, int] = {}
    verts, tris, current = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            if len(parts) != 4:
                raise ParseError("vertex needs 3 coordinates", lineno)
            p = tuple(_floats(parts[1:], lineno))
            if p not in index:
                index[p] = len(verts)
                verts.append(p)
            current.append(index[p])
        elif parts[0] == "endloop":
            if len(current) != 3:
                raise ParseError("facet must have exactly 3 vertices", lineno)
            tris.append(current)
            current = []
        elif parts[0] not in ("solid", "facet", "outer", "endfacet", "endsolid"):
            raise ParseError(f"unexpected token {parts[0]!r}", lineno)
    if not tris:
        raise ParseError("no facets found")
    return PhenotypeMesh(np.array(verts, float), np.array(tris, np.int64))


def read_mesh(data, fmt: str = "obj") -> PhenotypeMesh:
    fmt = _check_format(fmt)
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    return _read_obj(text) if fmt == "obj" else _read_stl(text)


def save_mesh(mesh: PhenotypeMesh, path, fmt: str | None = None) -> None:
    from pathlib import Path

    path = Path(path)
    fmt = fmt or ("stl-ascii" if path.suffix.lower() == ".stl" else "obj")
    path.write_bytes(write_mesh(mesh, fmt))


def load_mesh(path, fmt: str | None = None) -> PhenotypeMesh:
    from pathlib import Path

    path = Path(path)
    fmt = fmt or ("stl-ascii" if path.suffix.lower() == ".stl" else "obj")
    return read_mesh(path.read_bytes(), fmt)
