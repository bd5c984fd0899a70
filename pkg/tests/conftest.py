import functools

import pytest

from qcmembrane.beltrami import ComputationalGrid, solve_beltrami
from qcmembrane.config import RunConfig
from qcmembrane.fields import make_preset
from qcmembrane.report import PipelineArtifacts, build_report

BOUND_PRESETS = {
    "zero": {},
    "constant": {"re": 1 / 3},
    "radial_bump": {},
    "gaussian_bump": {},
    "smoothed_checker": {},
}


def _key(params):
    return tuple(sorted(params.items()))


@functools.lru_cache(maxsize=None)
def _solved(name, key, n):
    mu = make_preset(name, **dict(key))
    return mu, solve_beltrami(mu, ComputationalGrid(n, 4.0))


@functools.lru_cache(maxsize=None)
def _pipeline(name, key):
    art = PipelineArtifacts()
    report = build_report(RunConfig(preset=name, params=dict(key)), artifacts=art)
    return report, art


@pytest.fixture(scope="session")
def solved():
    """solved(name, n=1024, **params) -> (mu, PlanarMap), cached for the session."""

    def get(name, n=1024, **params):
        return _solved(name, _key(params), n)

    return get


@pytest.fixture(scope="session")
def pipeline():
    """pipeline(name, **params) -> (BoundReport, PipelineArtifacts) at default settings."""

    def get(name, **params):
        return _pipeline(name, _key(params))

    return get


_CRITERIA = []


@pytest.fixture
def criterion(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
