import time

import pytest

from qcmembrane.validation import Check, brute_force_circle, run_battery


@pytest.fixture(scope="module")
def battery():
    t0 = time.perf_counter()
    checks = run_battery()
    return checks, time.perf_counter() - t0


def test_all_pass(battery):
    checks, _ = battery
    assert [c.name for c in checks if not c.passed] == []
    names = " ".join(c.name for c in checks)
    for word in ("square", "disc", "affine", "round trip", "welzl", "bessel"):
        assert word in names


def test_runtime(battery):
    assert battery[1] < 300


def test_line_format():
    assert Check("x", 1e-5, 1e-3, True).line().startswith("PASS  x")
    assert Check("x", 1.0, 1e-3, False).line().startswith("FAIL")


def test_brute_force_circle():
    c, r = brute_force_circle([[0, 0], [4, 0], [2, 3]])
    assert r == pytest.approx(13 / 6)
    assert brute_force_circle([[1, 2]])[1] == 0.0
