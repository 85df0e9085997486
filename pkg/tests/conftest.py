"""Shared fixtures and the acceptance summary printed after the run."""

import time

import pytest

from semifix import FractalStop, SemimetricSpace, generate_fractal, hausdorff_distance
from systems import REF_CELL, SIER_CELL, SIER_TOL, origin, sierpinski

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _CRITERIA.get(n, (title, True, ""))
        detail = ""
        if failed and report.longrepr is not None:
            crash = getattr(report.longrepr, "reprcrash", None)
            detail = crash.message.splitlines()[0] if crash else ""
        _CRITERIA[n] = (title, prev[1] and not failed, detail or prev[2])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}"
        if not ok and detail:
            line += f"  [{detail[:160]}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def plane2():
    return SemimetricSpace.power_line(2, dim=2)


@pytest.fixture(scope="session")
def line2():
    return SemimetricSpace.power_line(2)


@pytest.fixture(scope="session")
def sierpinski_runs(plane2):
    """Sierpinski run at cell 1/256, tol 1e-3 and its 1/2048 reference with 3x the iterations.

    Returns ``(ifs, run, ref, measured, seconds)`` with ``measured[k-1] = D(H_k, H_ref)``.
    """
    start = time.perf_counter()
    ifs = sierpinski(plane2)
    H1 = origin(plane2)
    run = generate_fractal(plane2, ifs, H1, FractalStop(SIER_TOL, 60), cell=SIER_CELL)
    ref = generate_fractal(
        plane2, ifs, H1, FractalStop(1e-300, 3 * len(run.rows)), cell=REF_CELL, keep_sets=False
    )
    measured = [hausdorff_distance(plane2, r.H, ref.attractor) for r in run.rows]
    return ifs, run, ref, measured, time.perf_counter() - start
