"""Lower bounds for the first non-trivial Neumann eigenvalue on A-quasidiscs.

All bounds are closed-form in the ellipticity constant K, the quasiconformality
coefficient K_A (or sup|mu|), a radius R and the first positive zero j'_{1,1}
of J_1'. The reflection extension operator lives here as well, since its norm
(2 by default) divides the outer-domain bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .beltrami import PlanarMap, invert_map
from .errors import DomainError

DEFAULT_EXTENSION_NORM = 2.0


# ---------------------------------------------------------------------------
# Bessel functions by power series (arguments stay well below 8)


def _series(x, order):
    """J_order(x) for order 0 or 1 by its Maclaurin series."""
    half = 0.5 * x
    term = 1.0 if order == 0 else half
    total = term
    q = -half * half
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + order))
        total += term
        if abs(term) < 1e-17:
            return total


def bessel_j0(x):
    return _series(x, 0)


def bessel_j1(x):
    return _series(x, 1)


def bessel_j1_prime(x):
    """J_1'(x) = J_0(x) - J_1(x)/x."""
    return bessel_j0(x) - bessel_j1(x) / x


@lru_cache(maxsize=None)
def bessel_first_derivative_zero() -> float:
    """First positive zero j'_{1,1} of J_1', by Newton from x = 1.8.

    J_1'' comes from Bessel's equation: J_1'' = -J_1'/x - (1 - 1/x^2) J_1.
    """
    x = 1.8
    for _ in range(50):
        d1 = bessel_j1_prime(x)
        d2 = -d1 / x - (1.0 - 1.0 / (x * x)) * bessel_j1(x)
        step = d1 / d2
        x -= step
        if abs(step) < 1e-15 and abs(bessel_j1_prime(x)) < 1e-12:
            break
    return x


# ---------------------------------------------------------------------------
# bounds


def bound_theorem_A(K: float, R: float) -> float:
    """(1 / 4K) * (j'_{1,1} / R)^2."""
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R}")
    if K < 1:
        raise DomainError(f"ellipticity constant must be >= 1, got {K}")
    j = bessel_first_derivative_zero()
    return (j / R) ** 2 / (4.0 * K)


def bound_theorem_B(K: float) -> float:
    """64 (j'_{1,1})^2 / (K exp(2 pi K))."""
    if K < 1:
        raise DomainError(f"ellipticity constant must be >= 1, got {K}")
    j = bessel_first_derivative_zero()
    return 64.0 * j * j / (K * math.exp(2.0 * math.pi * K))


def bound_mu_norm(K: float, mu_sup: float) -> float:
    """(64 (j'_{1,1})^2 / K) exp(-2 pi (1 + |mu|) / (1 - |mu|))."""
    if not 0.0 <= mu_sup < 1.0:
        raise DomainError(f"sup |mu| must lie in [0, 1), got {mu_sup}")
    if K < 1:
        raise DomainError(f"ellipticity constant must be >= 1, got {K}")
    j = bessel_first_derivative_zero()
    K_A = (1.0 + mu_sup) / (1.0 - mu_sup)
    return 64.0 * j * j / K * math.exp(-2.0 * math.pi * K_A)


def bound_theorem_C(mu1_outer: float, extension_norm: float = DEFAULT_EXTENSION_NORM) -> float:
    """mu1(A, outer) / ||E||^2."""
    if not mu1_outer > 0:
        raise DomainError("outer eigenvalue must be positive")
    if extension_norm < 1:
        raise DomainError("extension norm must be >= 1")
    return mu1_outer / extension_norm**2


def bound_corollary_D(
    mu1_laplace_outer: float, K: float, extension_norm: float = DEFAULT_EXTENSION_NORM
) -> float:
    """mu1(Laplacian, outer) / (K ||E||^2)."""
    if not mu1_laplace_outer > 0:
        raise DomainError("outer eigenvalue must be positive")
    if K < 1 or extension_norm < 1:
        raise DomainError("K and the extension norm must be >= 1")
    return mu1_laplace_outer / (K * extension_norm**2)


def disc_neumann_eigenvalue(R: float) -> float:
    """First non-trivial Neumann eigenvalue of the Laplacian on a disc of radius R."""
    return (bessel_first_derivative_zero() / R) ** 2


@dataclass(frozen=True)
class ExtensionNormModel:
    omega_norm: float = 2.0
    extension_norm: float = DEFAULT_EXTENSION_NORM

    def __post_init__(self):
        if self.omega_norm < 1 or self.extension_norm < 1:
            raise DomainError("extension operator norms must be >= 1")


# ---------------------------------------------------------------------------
# reflection extension across the boundary of D_A


def reflection_points(pmap: PlanarMap, z, invert_tol=1e-10):
    """z for z in D_A, otherwise phi^-1(1 / conj(phi(z))) (unit-circle inversion in disc coordinates)."""
    z = np.asarray(z, dtype=complex)
    w = pmap(z)
    outside = np.abs(w) >= 1.0
    out = z.copy()
    if np.any(outside):
        mirrored = 1.0 / np.conj(w[outside])
        out[outside] = invert_map(pmap, mirrored, tol=invert_tol)
    return out, ~outside


def reflect_extend(u, pmap: PlanarMap, z, invert_tol=1e-10):
    """Extension of u from D_A to the window: u inside, u at the reflected point outside."""
    zr, _ = reflection_points(pmap, z, invert_tol)
    return u(zr)


def _a_energy_on_grid(values, inside_mask, A, X, Y, h):
    gy, gx = np.gradient(values, h, h)
    a11, a12, a22 = A.entries(X, Y)
    dens = a11 * gx * gx + 2 * a12 * gx * gy + a22 * gy * gy
    total = float(np.sum(dens) * h * h)
    inner = float(np.sum(dens[inside_mask]) * h * h)
    return total, inner


def extension_energy_ratio(u_list, pmap: PlanarMap, A, n_samples=257, invert_tol=1e-10):
    """Max over test functions of (A-energy of the extension on the window) / (A-energy on D_A).

    Both energies use the same node grid and centered differences.
    """
    W = pmap.window_grid.half_width
    t = np.linspace(-W, W, n_samples)
    h = t[1] - t[0]
    X, Y = np.meshgrid(t, t)
    Z = X + 1j * Y
    zr, inside = reflection_points(pmap, Z, invert_tol)
    ratios = []
    for u in u_list:
        total, inner = _a_energy_on_grid(u(zr), inside, A, X, Y, h)
        ratios.append(total / inner)
    return max(ratios)
