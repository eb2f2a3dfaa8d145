import pytest

from gemevo.config import RunConfig
from gemevo.core import make_tasks
from gemevo.emt import Oracles
from gemevo.evaluators import TagOverlapVisualOracle
from gemevo.phenogen import ProceduralGenerator
from gemevo.prompts import ScriptedLanguageOracle


@pytest.fixture
def tasks():
    return make_tasks(["car", "airplane"])


@pytest.fixture
def mock_oracles():
    return Oracles(ScriptedLanguageOracle(), ProceduralGenerator(), TagOverlapVisualOracle())


@pytest.fixture
def small_config():
    return RunConfig(population_size=8, max_generations=3, seed=42, novelty_baseline_samples=0, raster_resolution=128)


@pytest.fixture
def mo_config():
    return RunConfig(
        population_size=8,
        max_generations=3,
        seed=3,
        objective_mode="multi_objective",
        physical_objectives=("drag_proxy", "lift_proxy"),
        maximize={"airplane": ("lift_proxy",)},
        novelty_baseline_samples=0,
        raster_resolution=128,
    )


# ---------------------------------------------------------------------------
# one summary line per acceptance criterion


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    detail = dict(item.user_properties).get("detail", "")
    if hasattr(rep, "wasxfail"):
        status = "FAIL (expected, see notes)"
    else:
        status = "PASS" if rep.passed else "FAIL"
    item.config._criteria[mark.args[0]] = (status, detail, call.duration)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(crit):
        status, detail, dur = crit[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status:<26} {dur:7.1f} s  {detail}")
