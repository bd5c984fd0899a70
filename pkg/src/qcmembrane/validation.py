"""Built-in analytic validation battery behind ``qcmembrane validate``."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .beltrami import ComputationalGrid, map_residual, solve_beltrami
from .bounds import bessel_first_derivative_zero, bessel_j1_prime, bound_theorem_A, bound_theorem_B
from .fem import neumann_eigenvalue, regular_polygon, unit_square
from .fields import SymmetricMatrixField, entries_from_mu, make_preset, mu_from_entries
from .geometry import distortion_radius_bound, smallest_enclosing_circle


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<38s} {self.value:<12.4e} (limit {self.threshold:.1e}, {self.seconds:.1f}s)"


def brute_force_circle(pts):
    """Smallest circle over all diametral pairs and circumcircles of triples."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) == 1:
        return pts[0], 0.0
    best = (None, math.inf)

    def covers(c, r):
        return np.all(np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) <= r * (1 + 1e-12) + 1e-12)

    for a, b in itertools.combinations(pts, 2):
        c = 0.5 * (a + b)
        r = 0.5 * math.hypot(*(a - b))
        if r < best[1] and covers(c, r):
            best = (c, r)
    for a, b, c3 in itertools.combinations(pts, 3):
        d = 2 * (a[0] * (b[1] - c3[1]) + b[0] * (c3[1] - a[1]) + c3[0] * (a[1] - b[1]))
        if abs(d) < 1e-14:
            continue
        a2, b2, c2 = a @ a, b @ b, c3 @ c3
        ux = (a2 * (b[1] - c3[1]) + b2 * (c3[1] - a[1]) + c2 * (a[1] - b[1])) / d
        uy = (a2 * (c3[0] - b[0]) + b2 * (a[0] - c3[0]) + c2 * (b[0] - a[0])) / d
        c = np.array([ux, uy])
        r = math.hypot(*(a - c))
        if r < best[1] and covers(c, r):
            best = (c, r)
    return best


def _affine_deviation(pmap, c, radius):
    """Relative L2 deviation of FD (phi_z, phi_zbar) from (1, c) on |z| <= radius."""
    px, py = pmap.fd_derivatives()
    Z = pmap.grid.mesh()
    m = np.abs(Z) <= radius
    pz = 0.5 * (px - 1j * py)[m]
    pzb = 0.5 * (px + 1j * py)[m]
    num = np.sqrt(np.sum(np.abs(pz - 1) ** 2 + np.abs(pzb - c) ** 2))
    den = np.sqrt(m.sum() * (1 + abs(c) ** 2))
    return float(num / den)


def run_battery(corrupt_multiplier=False, seed=0):
    corrupt = (lambda S: np.conj(S)) if corrupt_multiplier else None
    checks = []

    def timed(name, threshold, fn, compare=lambda v, t: v < t):
        t0 = time.perf_counter()
        v = float(fn())
        checks.append(Check(name, v, threshold, bool(compare(v, threshold)), time.perf_counter() - t0))

    j = bessel_first_derivative_zero()
    timed("bessel j'11 vs 1.84118", 1e-5, lambda: abs(j - 1.84118))
    timed("bessel |J1'(root)|", 1e-10, lambda: abs(bessel_j1_prime(j)))

    def rel(poly, A, exact):
        return lambda: abs(neumann_eigenvalue(poly, A, target_h=0.02)[0].mu1 - exact) / exact

    timed("fem square pi^2", 1e-2, rel(unit_square(), None, math.pi**2))
    timed("fem square diag(1/2,2) pi^2/2", 1e-2, rel(unit_square(), SymmetricMatrixField.diagonal(2.0), math.pi**2 / 2))
    timed("fem disc j'11^2", 1.5e-2, rel(regular_polygon(1024), None, j * j))

    grid = ComputationalGrid()
    mu_c = make_preset("constant", re=0.3)
    pm_c = solve_beltrami(mu_c, grid, corrupt_symbol=corrupt)
    timed("beltrami constant 0.3 fd residual", 1e-3, lambda: map_residual(pm_c, mu_c))
    timed("beltrami constant 0.3 affine deviation", 1e-3, lambda: _affine_deviation(pm_c, 0.3, 1.0))
    mu_g = make_preset("gaussian_bump", amplitude=0.4, sigma=0.8)
    timed("beltrami gaussian fd residual", 1e-4, lambda: map_residual(solve_beltrami(mu_g, grid, corrupt_symbol=corrupt), mu_g))

    rng = np.random.default_rng(seed)

    def roundtrip():
        r = 0.9 * np.sqrt(rng.uniform(size=1000))
        mu = r * np.exp(2j * np.pi * rng.uniform(size=1000))
        a = entries_from_mu(mu)
        back = mu_from_entries(*a)
        again = entries_from_mu(back)
        return max(np.max(np.abs(back - mu)), max(np.max(np.abs(x - y)) for x, y in zip(a, again)))

    timed("mu <-> A round trip", 1e-12, roundtrip)

    def welzl():
        worst = 0.0
        for _ in range(300):
            pts = rng.uniform(-1, 1, size=(int(rng.integers(1, 13)), 2))
            _, r = brute_force_circle(pts)
            worst = max(worst, abs(smallest_enclosing_circle(pts, seed=1).radius - r))
        return worst

    timed("welzl vs brute force", 1e-9, welzl)
    timed(
        "bound A(K, R_sil(K)) = bound B(K)",
        1e-12,
        lambda: max(
            abs(bound_theorem_A(K, distortion_radius_bound(K)) - bound_theorem_B(K)) / bound_theorem_B(K)
            for K in (1.0, 1.5, 2.0, 3.0)
        ),
    )
    return checks
