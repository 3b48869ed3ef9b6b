import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from wheel_lab.field import area_measure, sample_field  # noqa: E402
from wheel_lab.metric import build_metric, default_xi  # noqa: E402
from wheel_lab.tree import WIRED, build_geodesic_tree  # noqa: E402
from wheel_lab.wheel import contour_exploration  # noqa: E402

SEEDS = (1, 2, 3, 4, 5)


@lru_cache(maxsize=None)
def instance(n: int, seed: int, root=WIRED, gamma: float = 1.0):
    """(field, metric, tree, measure, curve) for a seeded zero-boundary instance."""
    f = sample_field(n, seed)
    m = build_metric(f, default_xi(gamma))
    root_id = root
    if root == "center":
        root_id = (f.side // 2) * f.side + f.side // 2
    t = build_geodesic_tree(m, root_id)
    mu = area_measure(f, gamma)
    c = contour_exploration(t, mu)
    return f, m, t, mu, c


@pytest.fixture(scope="session")
def inst():
    return instance


# one line per acceptance criterion, printed at the end of the session
_ACCEPTANCE: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    key = marker.args[0]
    failed = rep.failed or (rep.when == "call" and rep.outcome != "passed")
    prev = _ACCEPTANCE.get(key, (marker.args[1], True))
    if rep.when == "call" or failed:
        _ACCEPTANCE[key] = (marker.args[1], prev[1] and not failed)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key:>2}. {title}")
