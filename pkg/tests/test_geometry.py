import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gemevo.core import DegenerateMesh, PhenotypeMesh
from gemevo.geometry import (
    ZeroAxis,
    drag_proxy,
    fit_unit_cube,
    is_watertight,
    lift_proxy,
    projected_frontal_area,
    signed_volume,
    surface_area,
)
from gemevo.meshio import ParseError, UnsupportedFormat, read_mesh, write_mesh
from gemevo.shapes import box, icosphere, mirrored

from oracles import box_surface_area, disc_area, drag_formula, tetra_volume


def cube(size=(1.0, 1.0, 1.0)):
    return PhenotypeMesh(*box(size))


def rot(axis, angle):
    c, s = math.cos(angle), math.sin(angle)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


@pytest.fixture(scope="module")
def sphere():
    return icosphere(4)


def test_unit_cube_frontal_area():
    assert projected_frontal_area(cube()) == pytest.approx(1.0, abs=1e-3)


def test_icosphere_frontal_area(sphere):
    assert sphere.n_triangles == 5120
    assert projected_frontal_area(sphere) == pytest.approx(disc_area(), rel=0.01)


def test_icosphere_raster_converges(sphere):
    # the exact silhouette is the inscribed polygon, slightly under pi; a finer grid approaches it
    coarse = projected_frontal_area(sphere, resolution=512)
    fine = projected_frontal_area(sphere, resolution=4096)
    assert abs(fine - coarse) < 2e-3 * disc_area()
    assert fine == pytest.approx(disc_area(), rel=0.01)


def test_quadratic_scaling(sphere):
    big = PhenotypeMesh(sphere.vertices * 2.0, sphere.triangles)
    assert projected_frontal_area(big) / projected_frontal_area(sphere) == pytest.approx(4.0, rel=0.01)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 2 * math.pi))
def test_frontal_area_rotation_invariant(angle):
    m = cube((1.0, 1.3, 0.7))
    turned = PhenotypeMesh(m.vertices @ rot("x", angle).T, m.triangles)
    assert projected_frontal_area(turned) == pytest.approx(projected_frontal_area(m), rel=0.005)


def test_frontal_area_guards():
    with pytest.raises(DegenerateMesh):
        projected_frontal_area(PhenotypeMesh(np.zeros((3, 3)), np.zeros((0, 3), int)))
    with pytest.raises(ZeroAxis):
        projected_frontal_area(cube(), axis=(0, 0, 0))


def test_cube_volume_and_topology():
    m = cube()
    assert m.n_triangles == 12
    assert signed_volume(m) == pytest.approx(1.0)
    assert tetra_volume(m.vertices, m.triangles) == pytest.approx(1.0)
    assert is_watertight(m)
    assert surface_area(m) == pytest.approx(6.0)


def test_drag_matches_formula():
    for size in [(1, 1, 1), (2, 1, 1), (0.5, 2, 3)]:
        m = cube(size)
        expected = drag_formula(size[1] * size[2], box_surface_area(*size))
        assert drag_proxy(m) == pytest.approx(expected, rel=2e-3)


@pytest.mark.xfail(strict=True, reason="the literal drag formula adds surface area, so a longer box with the "
                                       "same frontal area always scores higher than the cube")
def test_drag_cube_exceeds_elongated_box():
    assert drag_proxy(cube()) > drag_proxy(cube((2.0, 1.0, 1.0)))


def test_drag_literal_values_for_the_conflict():
    # A + S/2 - 1: cube 1 + 3 - 1, elongated 1 + 5 - 1
    assert drag_proxy(cube()) == pytest.approx(3.0, rel=1e-3)
    assert drag_proxy(cube((2.0, 1.0, 1.0))) == pytest.approx(5.0, rel=1e-3)


def test_lift_sphere_zero(sphere):
    assert abs(lift_proxy(sphere)) < 1e-6


def test_lift_mirror_negates():
    m = cube((2.0, 1.0, 0.3))
    tilted = PhenotypeMesh(m.vertices @ rot("y", 0.2).T, m.triangles)
    lift = lift_proxy(tilted)
    assert abs(lift) > 1e-3
    assert lift_proxy(mirrored(tilted, axis=2)) == pytest.approx(-lift)


def test_fit_unit_cube():
    m = cube((4.0, 2.0, 1.0))
    unit, scale = fit_unit_cube(m)
    assert scale == pytest.approx(0.25)
    assert unit.vertices.min() == pytest.approx(0.0)
    assert np.ptp(unit.vertices, axis=0).max() == pytest.approx(1.0)
    assert unit.provenance.scale_factor == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# mesh files


def test_obj_cube_lines():
    text = write_mesh(cube(), "obj").decode()
    lines = text.splitlines()
    assert sum(ln.startswith("v ") for ln in lines) == 8
    assert sum(ln.startswith("f ") for ln in lines) == 12


@pytest.mark.parametrize("fmt", ["obj", "stl-ascii"])
def test_round_trip(fmt, sphere):
    for m in (cube(), sphere):
        back = read_mesh(write_mesh(m, fmt), fmt)
        assert back.n_triangles == m.n_triangles
        assert np.allclose(back.vertices[back.triangles], m.vertices[m.triangles], atol=1e-6)
        if fmt == "obj":
            assert np.array_equal(back.triangles, m.triangles)


def test_obj_zero_index_is_parse_error():
    data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"
    with pytest.raises(ParseError) as info:
        read_mesh(data, "obj")
    assert info.value.line == 4


def test_obj_negative_indices_and_quads():
    data = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4 -3 -2 -1\n"
    m = read_mesh(data, "obj")
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_unsupported_format():
    with pytest.raises(UnsupportedFormat):
        write_mesh(cube(), "ply")
