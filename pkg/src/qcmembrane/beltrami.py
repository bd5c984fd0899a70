"""Principal solution of the Beltrami equation phi_zbar = mu * phi_z on a periodic grid.

Writing phi(z) = z + h(z) and g = h_zbar, the equation becomes the fixed point

    g = mu * (1 + S g),

where S is the Beurling transform, the Fourier multiplier conj(k)/k. Since
|mu| <= m < 1 and S is unitary, the iteration contracts with ratio m.
The displacement is recovered from g by inverting d/dzbar (multiplier
2/(i k)). That inverse only exists for the mean-free part of g; the grid
mean gbar is restored through the affine term gbar * (zbar - <zbar>), which
is exactly the term the square-lattice periodization of the Cauchy kernel
removes.

The periodic solve runs on a grid zero-padded by ``pad`` (default 2) in each
direction; the lattice-image error inside the window decays like pad**-4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateCellError,
    DomainError,
    InvalidDilatationError,
    InversionError,
    NonConvergenceError,
    OutOfWindowError,
)

DEFAULT_N = 1024
DEFAULT_HALF_WIDTH = 4.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
DEFAULT_PAD = 2


class PlanarPoint(NamedTuple):
    x: float
    y: float

    @property
    def z(self):
        return complex(self.x, self.y)


@dataclass(frozen=True)
class ComputationalGrid:
    """Periodic n x n grid on [-L, L)^2 with nodes x_j = -L + j*h."""

    n: int = DEFAULT_N
    half_width: float = DEFAULT_HALF_WIDTH

    def __post_init__(self):
        n = self.n
        if n < 64 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 64, got {n}")
        if not self.half_width > 0:
            raise DomainError("grid half width must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.n

    @property
    def coords(self):
        return -self.half_width + self.spacing * np.arange(self.n)

    def mesh(self):
        """Complex node coordinates, indexed [iy, ix]."""
        t = self.coords
        return t[None, :] + 1j * t[:, None]

    def check_support(self, support_radius):
        if not (math.isfinite(support_radius) and self.half_width >= 2.0 * support_radius - 1e-12):
            raise DomainError(
                f"window half width {self.half_width} must be at least twice the "
                f"support radius {support_radius}"
            )

    def wavenumbers(self):
        """k = k1 + i k2 on the FFT layout."""
        kk = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)
        return kk[None, :] + 1j * kk[:, None]


def beurling_symbol(grid: ComputationalGrid):
    k = grid.wavenumbers()
    sym = np.zeros_like(k)
    nz = k != 0
    sym[nz] = np.conj(k[nz]) / k[nz]
    return sym


def inverse_dzbar_symbol(grid: ComputationalGrid):
    """Symbol of (d/dzbar)^-1; d/dzbar has symbol i k / 2."""
    k = grid.wavenumbers()
    sym = np.zeros_like(k)
    nz = k != 0
    sym[nz] = 2.0 / (1j * k[nz])
    return sym


@dataclass(frozen=True, eq=False)
class PlanarMap:
    """phi(z) = z + P(z) + c * (zbar - zbar_mean) sampled on a periodic grid.

    P is periodic on ``grid`` (the padded solve grid) and is interpolated
    bilinearly; the affine part is evaluated exactly. Points are accepted on the
    closed user window ``window`` (defaults to ``grid``).
    """

    periodic: np.ndarray
    grid: ComputationalGrid
    window: ComputationalGrid | None = None
    affine_coeff: complex = 0.0
    residual_l2: float = 0.0
    tol: float = DEFAULT_TOL
    direction: str = "forward"
    iterations: int = 0
    update_history: tuple = field(default=(), repr=False)

    @classmethod
    def identity(cls, grid: ComputationalGrid):
        return cls(periodic=np.zeros((grid.n, grid.n), dtype=complex), grid=grid)

    @classmethod
    def from_displacement(cls, grid: ComputationalGrid, displacement, **kw):
        disp = np.asarray(displacement, dtype=complex)
        if disp.shape != (grid.n, grid.n):
            raise ValueError(f"displacement shape {disp.shape} does not match grid n={grid.n}")
        return cls(periodic=disp.copy(), grid=grid, **kw)

    @property
    def zbar_mean(self):
        return complex(np.mean(self.grid.coords)) * (1 - 1j)

    @property
    def displacement(self):
        """h = phi - z at the grid nodes."""
        zbar = np.conj(self.grid.mesh())
        return self.periodic + self.affine_coeff * (zbar - self.zbar_mean)

    def node_values(self):
        return self.grid.mesh() + self.displacement

    @property
    def window_grid(self) -> ComputationalGrid:
        return self.window if self.window is not None else self.grid

    def __call__(self, z):
        """Evaluate phi at complex points (array-wise)."""
        z = np.asarray(z, dtype=complex)
        W = self.window_grid.half_width
        eps = 1e-12 * W
        if np.any(np.abs(z.real) > W + eps) or np.any(np.abs(z.imag) > W + eps):
            raise OutOfWindowError(f"point outside the grid window [-{W}, {W}]^2")
        L, h, n = self.grid.half_width, self.grid.spacing, self.grid.n
        fx = (z.real + L) / h
        fy = (z.imag + L) / h
        j0 = np.floor(fx).astype(int)
        i0 = np.floor(fy).astype(int)
        tx = fx - j0
        ty = fy - i0
        j0 %= n
        i0 %= n
        j1 = (j0 + 1) % n
        i1 = (i0 + 1) % n
        P = self.periodic
        p = (1 - ty) * ((1 - tx) * P[i0, j0] + tx * P[i0, j1]) + ty * (
            (1 - tx) * P[i1, j0] + tx * P[i1, j1]
        )
        return z + p + self.affine_coeff * (np.conj(z) - self.zbar_mean)

    def fd_derivatives(self):
        """Centered finite-difference (phi_x, phi_y) at every node (periodic part wraps)."""
        h = self.grid.spacing
        P = self.periodic
        px = (np.roll(P, -1, axis=1) - np.roll(P, 1, axis=1)) / (2 * h)
        py = (np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)) / (2 * h)
        c = self.affine_coeff
        return 1.0 + px + c, 1j + py - 1j * c


def solve_beltrami(
    mu,
    grid: ComputationalGrid | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    pad: int = DEFAULT_PAD,
    corrupt_symbol=None,
) -> PlanarMap:
    """Fixed-point solve of g = mu (1 + S g); returns the map z + h.

    ``corrupt_symbol`` is a callable applied to the Beurling multiplier before
    iterating (fault injection for the validation battery).
    """
    window = grid or ComputationalGrid()
    sup = mu.sup_norm
    if sup >= 1.0:
        raise InvalidDilatationError(f"sup |mu| = {sup:.6g} >= 1")
    window.check_support(mu.support_radius)
    if pad < 1 or pad & (pad - 1):
        raise DomainError(f"pad must be a power of two >= 1, got {pad}")
    grid = ComputationalGrid(window.n * pad, window.half_width * pad)

    Z = grid.mesh()
    M = mu(Z.real, Z.imag)
    del Z
    S = beurling_symbol(grid)
    if corrupt_symbol is not None:
        S = corrupt_symbol(S)

    g = M.copy()
    history = []
    update = 0.0
    converged = not np.any(M)
    it = 0
    while not converged:
        if it >= max_iter:
            raise NonConvergenceError(
                f"Beltrami iteration did not reach tol={tol:g} in {max_iter} steps "
                f"(last relative update {update:.3e})",
                last_update=update,
            )
        Sg = np.fft.ifft2(S * np.fft.fft2(g))
        g_new = M * (1.0 + Sg)
        norm_new = np.linalg.norm(g_new)
        update = float(np.linalg.norm(g_new - g) / norm_new) if norm_new > 0 else 0.0
        history.append(update)
        g = g_new
        it += 1
        converged = update < tol

    gbar = complex(np.mean(g))
    periodic = np.fft.ifft2(inverse_dzbar_symbol(grid) * np.fft.fft2(g))
    phi_z = 1.0 + np.fft.ifft2(S * np.fft.fft2(g))
    denom = np.linalg.norm(phi_z)
    residual = float(np.linalg.norm(g - M * phi_z) / denom)
    return PlanarMap(
        periodic=periodic,
        grid=grid,
        window=window,
        affine_coeff=gbar,
        residual_l2=residual,
        tol=tol,
        iterations=it,
        update_history=tuple(history),
    )


def evaluate_map(pmap: PlanarMap, p):
    """phi at a PlanarPoint (returns PlanarPoint) or at complex array points."""
    if isinstance(p, PlanarPoint):
        w = complex(pmap(np.array([p.z]))[0])
        return PlanarPoint(w.real, w.imag)
    return pmap(p)


def invert_map(pmap: PlanarMap, targets, tol: float = 1e-10, max_steps: int = 100):
    """Newton solve of phi(z) = w for every target, starting from z = w.

    Accepts a sequence of PlanarPoint (returns a list of PlanarPoint) or a
    complex array (returns a complex array of the same shape).
    """
    as_points = not isinstance(targets, np.ndarray)
    if as_points:
        w = np.array([complex(t[0], t[1]) for t in targets], dtype=complex)
    else:
        w = np.asarray(targets, dtype=complex)
    shape = w.shape
    w = w.ravel()
    z = w.copy()
    L = pmap.window_grid.half_width
    delta = 1e-3 * pmap.grid.spacing

    def clip(v):
        return np.clip(v.real, -L, L) + 1j * np.clip(v.imag, -L, L)

    F = pmap(clip(z)) - w
    res = np.abs(F)
    active = res >= tol
    for _ in range(max_steps):
        if not np.any(active):
            break
        za = z[active]
        Fa = F[active]
        # one-sided steps pointing inward keep the stencil inside the window
        sx = np.where(za.real > 0, -delta, delta)
        sy = np.where(za.imag > 0, -delta, delta)
        base = pmap(za)
        dx = (pmap(za + sx) - base) / sx
        dy = (pmap(za + 1j * sy) - base) / sy
        a, b, c, d = dx.real, dy.real, dx.imag, dy.imag
        det = a * d - b * c
        if np.any(~np.isfinite(det)) or np.any(det <= 1e-12):
            raise DegenerateCellError("singular finite-difference Jacobian during map inversion")
        ux = (d * Fa.real - b * Fa.imag) / det
        uy = (-c * Fa.real + a * Fa.imag) / det
        step = ux + 1j * uy
        ra = np.abs(Fa)
        t = np.ones(za.shape)
        znew = clip(za - step)
        Fnew = pmap(znew) - w[active]
        # backtrack where the full step did not reduce the residual
        for _ in range(20):
            worse = np.abs(Fnew) > ra
            if not np.any(worse):
                break
            t = np.where(worse, 0.5 * t, t)
            znew = np.where(worse, clip(za - t * step), znew)
            Fnew = np.where(worse, pmap(znew) - w[active], Fnew)
        z[active] = znew
        F[active] = Fnew
        res = np.abs(F)
        active = res >= tol
    if np.any(active):
        worst = float(np.max(res))
        raise InversionError(
            f"map inversion did not reach tol={tol:g} in {max_steps} Newton steps "
            f"(worst residual {worst:.3e})",
            worst_residual=worst,
        )
    z = z.reshape(shape)
    if as_points:
        return [PlanarPoint(v.real, v.imag) for v in z]
    return z


def map_residual(pmap: PlanarMap, mu) -> float:
    """Relative L2 norm of phi_zbar - mu phi_z over |z| <= L/2.

    Derivatives are centered finite differences of the node values, independent
    of the spectral multipliers used by the solver.
    """
    grid = pmap.grid
    h = grid.spacing
    phi = pmap.node_values()
    Z = grid.mesh()
    px = np.zeros_like(phi)
    py = np.zeros_like(phi)
    px[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (2 * h)
    py[1:-1, :] = (phi[2:, :] - phi[:-2, :]) / (2 * h)
    mask = np.abs(Z) <= 0.5 * pmap.window_grid.half_width
    mask[:, [0, -1]] = False
    mask[[0, -1], :] = False
    phi_z = 0.5 * (px - 1j * py)[mask]
    phi_zbar = 0.5 * (px + 1j * py)[mask]
    m = mu(Z.real[mask], Z.imag[mask])
    return float(np.linalg.norm(phi_zbar - m * phi_z) / np.linalg.norm(phi_z))


def jacobian_determinant(pmap: PlanarMap):
    """Finite-difference Jacobian determinant of phi at the nodes."""
    px, py = pmap.fd_derivatives()
    return px.real * py.imag - px.imag * py.real
