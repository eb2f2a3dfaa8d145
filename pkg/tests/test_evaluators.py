import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gemevo.config import RunConfig
from gemevo.core import OracleFailure
from gemevo.evaluators import (
    AlphaOutOfRange,
    BoundsInvalid,
    ObjectiveNormalizers,
    PhysicalObjectiveSpec,
    RemoteVisualOracle,
    RunningMinMax,
    TagOverlapVisualOracle,
    combined_cost,
    constrained_objectives,
    normalize,
    physical_raw,
    visual_score,
)
from gemevo.phenogen import ProceduralGenerator
from gemevo.shapes import box
from gemevo.core import PhenotypeMesh

from oracles import combined_cost as ref_cost

VIS = TagOverlapVisualOracle()
GEN = ProceduralGenerator()
unit = st.floats(0.0, 1.0)


def test_airplane_recipe_scores_as_airplane(tasks):
    mesh = GEN.generate("A airplane in the shape of a jet.", 3)
    s = visual_score(VIS, mesh, tasks[1])
    assert s >= 0.5
    assert visual_score(VIS, mesh, tasks[1]) == s
    assert visual_score(VIS, mesh, tasks[0]) < s


def test_car_recipe_prefers_car(tasks):
    mesh = GEN.generate("A car in the shape of a sedan.", 3)
    assert visual_score(VIS, mesh, tasks[0]) > visual_score(VIS, mesh, tasks[1])


def test_visual_score_bounded_for_untagged_mesh():
    s = VIS.score(PhenotypeMesh(*box((1, 1, 1))), "a teapot")
    assert 0.0 <= s <= 1.0


def test_combined_cost_examples():
    assert combined_cost(0.4, 0.8, 0.55) == pytest.approx(0.29)
    assert combined_cost(0.37, 0.1, 0.0) == 0.37
    assert combined_cost(0.9, 1.0, 1.0) == 0.0
    assert combined_cost((0.2, 0.6), 0.8, 0.55) == pytest.approx(0.45 * 0.4 + 0.55 * 0.2)
    with pytest.raises(AlphaOutOfRange):
        combined_cost(0.5, 0.5, 1.1)


def test_constraint_examples():
    assert constrained_objectives(0.3, 0.7, 0.5, 1.0)[1:] == (True, 0.0)
    _, ok, v = constrained_objectives(0.3, 0.3, 0.5, 1.0)
    assert not ok and v == pytest.approx(0.2)
    assert constrained_objectives(0.3, 0.5, 0.5, 1.0)[1]
    with pytest.raises(BoundsInvalid):
        constrained_objectives(0.3, 0.5, 0.8, 0.6)


@given(unit, unit, unit)
def test_combined_cost_matches_reference(a, p, v):
    assert combined_cost(p, v, a) == pytest.approx(ref_cost(p, v, a), abs=1e-12)
    assert 0.0 <= combined_cost(p, v, a) <= 1.0 + 1e-12


@given(unit, unit, unit)
def test_violation_law(v, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    _, ok, viol = constrained_objectives(0.5, v, lo, hi)
    assert ok == (lo <= v <= hi)
    assert viol >= 0 and (viol == 0) == ok
    assert viol == pytest.approx(max(0, lo - v) + max(0, v - hi))


def test_normalizer_boundaries():
    spec = PhysicalObjectiveSpec("frontal_area")
    spec.observe([2.0])
    assert normalize(2.0, spec) == 0.5
    spec.observe([1.0, 4.0])
    assert normalize(1.0, spec) == 0.0
    assert normalize(4.0, spec) == 1.0
    assert normalize(2.5, spec) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        RunningMinMax()(1.0)


def test_maximized_objective_is_reversed():
    spec = PhysicalObjectiveSpec("lift_proxy", "maximize")
    spec.observe([0.0, 1.0])
    assert normalize(1.0, spec) == 0.0
    assert normalize(0.0, spec) == 1.0


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.floats(-1e3, 1e3))
def test_normalized_values_in_unit_interval(seen, x):
    spec = PhysicalObjectiveSpec("drag_proxy")
    spec.observe(seen)
    assert 0.0 <= normalize(x, spec) <= 1.0


def test_normalizer_state_round_trip(mo_config):
    n = ObjectiveNormalizers(mo_config)
    n.observe([(1.0, 0.1), (2.0, -0.3)])
    m = ObjectiveNormalizers(mo_config)
    m.load_state(json.loads(json.dumps(n.state())))
    for k in (1, 2):
        assert m.normalized((1.5, 0.0), k) == n.normalized((1.5, 0.0), k)


def test_physical_raw_unit_scaled():
    # a 2x1x1 box fits into the unit cube at half scale: frontal 0.25, surface 2.5
    mesh = PhenotypeMesh(*box((2.0, 1.0, 1.0)))
    area, drag, lift = physical_raw(mesh, ("frontal_area", "drag_proxy", "lift_proxy"), 512)
    assert area == pytest.approx(0.25, rel=1e-2)
    assert drag == pytest.approx(0.25 + 2.5 / 2 - 1, abs=5e-3)
    assert lift == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        physical_raw(mesh, ("volume",))


# ---------------------------------------------------------------------------
# remote adapter against a local server


class _Handler(BaseHTTPRequestHandler):
    replies = []
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((body, self.headers.get("Authorization")))
        out = json.dumps(type(self).replies.pop(0)).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *a):
        pass


@pytest.fixture
def server():
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    _Handler.replies, _Handler.seen = [], []
    yield f"http://127.0.0.1:{srv.server_address[1]}/", _Handler
    srv.shutdown()


def test_remote_visual_oracle(server, monkeypatch):
    url, handler = server
    monkeypatch.setenv("GEM_VLM_ENDPOINT", url)
    monkeypatch.setenv("GEM_VLM_KEY", "k1")
    handler.replies += [{"score": 1.7}, {"nope": 1}]
    oracle = RemoteVisualOracle()
    mesh = PhenotypeMesh(*box((1, 1, 1)))
    assert oracle.score(mesh, "A car") == 1.0
    body, auth = handler.seen[0]
    assert body["task_label"] == "A car" and body["mesh_obj"].startswith("v ") and auth == "Bearer k1"
    with pytest.raises(OracleFailure):
        oracle.score(mesh, "A car")


def test_remote_needs_endpoint(monkeypatch):
    monkeypatch.delenv("GEM_VLM_ENDPOINT", raising=False)
    with pytest.raises(OracleFailure):
        RemoteVisualOracle()
