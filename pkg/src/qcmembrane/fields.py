"""Coefficient matrices A, complex dilatations mu, and the conversions between them.

A symmetric, determinant-one matrix field

    A = [[a11, a12], [a12, a22]],   a11 * a22 - a12**2 = 1,

and a Beltrami coefficient mu with |mu| < 1 carry the same information:

    mu  = (a22 - a11 - 2i a12) / det(I + A)
    a11 = |1 - mu|^2 / (1 - |mu|^2)
    a12 = -2 Im(mu) / (1 - |mu|^2)
    a22 = |1 + mu|^2 / (1 - |mu|^2)

Fields are evaluated on demand from analytic presets (or from grid samples).
Outside ``support_radius`` every field is the identity (mu = 0).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, InvalidDilatationError, InvalidFieldError

DET_TOL = 1e-12
DEFAULT_SAMPLE_N = 2048
_CHUNK_ROWS = 128


# ---------------------------------------------------------------------------
# pointwise algebra


def mu_from_entries(a11, a12, a22):
    """Complex dilatation of a symmetric matrix given by its entries (array-wise)."""
    a11, a12, a22 = (np.asarray(a, dtype=float) for a in (a11, a12, a22))
    det_ipa = (1.0 + a11) * (1.0 + a22) - a12 * a12
    if np.any(det_ipa <= 0.0):
        raise InvalidFieldError("det(I + A) <= 0: coefficient matrix is not elliptic")
    return (a22 - a11 - 2j * a12) / det_ipa


def entries_from_mu(mu):
    """Matrix entries (a11, a12, a22) reconstructed from a dilatation (array-wise)."""
    mu = np.asarray(mu, dtype=complex)
    m2 = mu.real**2 + mu.imag**2
    if np.any(m2 >= 1.0):
        raise InvalidDilatationError("|mu| >= 1: dilatation is not quasiconformal")
    denom = 1.0 - m2
    a11 = np.abs(1.0 - mu) ** 2 / denom
    a12 = -2.0 * mu.imag / denom
    a22 = np.abs(1.0 + mu) ** 2 / denom
    return a11, a12, a22


def largest_eigenvalue(a11, a12, a22):
    """Larger eigenvalue of the symmetric 2x2 matrices, closed form."""
    half_tr = 0.5 * (a11 + a22)
    gap = np.hypot(0.5 * (a11 - a22), a12)
    return half_tr + gap


def _sample_grid(half_width, n):
    # odd count so the centre, where most presets peak, is a sample
    return np.linspace(-half_width, half_width, n | 1)


def _chunked_max(fn, half_width, n):
    """max of fn(x, y) over an n x n grid on [-w, w]^2, row chunks in fixed order."""
    t = _sample_grid(half_width, n)
    best = -np.inf
    for start in range(0, len(t), _CHUNK_ROWS):
        yy, xx = np.meshgrid(t[start:start + _CHUNK_ROWS], t, indexing="ij")
        best = max(best, float(np.max(fn(xx, yy))))
    return best


# ---------------------------------------------------------------------------
# field types


@dataclass(frozen=True, eq=False)
class DilatationField:
    """Beltrami coefficient mu(z), compactly supported in |z| <= support_radius."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support_radius: float
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    sample_n: int = DEFAULT_SAMPLE_N

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.array(np.broadcast_to(self.func(x, y), x.shape), dtype=complex)
        if math.isfinite(self.support_radius):
            out[x * x + y * y > self.support_radius**2] = 0.0
        return out

    @property
    def sample_half_width(self):
        return self.support_radius if math.isfinite(self.support_radius) else 1.0

    @cached_property
    def sup_norm(self) -> float:
        """max |mu| over a dense sample grid covering the support window."""
        return _chunked_max(lambda x, y: np.abs(self(x, y)), self.sample_half_width, self.sample_n)

    def describe(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.name}({args})"


@dataclass(frozen=True, eq=False)
class SymmetricMatrixField:
    """det-one symmetric coefficient field stored as its three entries."""

    func: Callable[[np.ndarray, np.ndarray], tuple]
    support_radius: float = math.inf
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    sample_n: int = DEFAULT_SAMPLE_N

    def entries(self, x, y, check=True):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        a11, a12, a22 = (
            np.array(np.broadcast_to(a, x.shape), dtype=float) for a in self.func(x, y)
        )
        if math.isfinite(self.support_radius):
            out = x * x + y * y > self.support_radius**2
            a11[out], a12[out], a22[out] = 1.0, 0.0, 1.0
        if check:
            _check_entries(a11, a12, a22)
        return a11, a12, a22

    def __call__(self, x, y):
        """Matrices stacked along two trailing axes, shape (..., 2, 2)."""
        a11, a12, a22 = self.entries(x, y)
        return np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)

    @property
    def sample_half_width(self):
        return self.support_radius if math.isfinite(self.support_radius) else 1.0

    # constructors -----------------------------------------------------------

    @classmethod
    def identity(cls):
        return cls.constant(1.0, 0.0, 1.0, name="identity")

    @classmethod
    def constant(cls, a11, a12, a22, name="constant"):
        _check_entries(np.float64(a11), np.float64(a12), np.float64(a22))
        return cls(
            func=lambda x, y: (a11, a12, a22),
            name=name,
            params={"a11": a11, "a12": a12, "a22": a22},
        )

    @classmethod
    def diagonal(cls, k):
        """diag(1/k, k)."""
        return cls.constant(1.0 / k, 0.0, float(k), name="diagonal")

    @classmethod
    def rotated_diagonal(cls, k, angle):
        c, s = math.cos(angle), math.sin(angle)
        lo, hi = 1.0 / k, float(k)
        a11 = lo * c * c + hi * s * s
        a22 = lo * s * s + hi * c * c
        a12 = (lo - hi) * c * s
        return cls.constant(a11, a12, a22, name="rotated_diagonal")

    @classmethod
    def from_grid(cls, xs, ys, a11, a12, a22, support_radius=math.inf):
        """Bilinear interpolation of node samples (arrays indexed [iy, ix]).

        Interpolated entries are rescaled by det^(-1/2) so det A = 1 holds
        between nodes as well; node values are reproduced exactly.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        tables = [np.asarray(a, dtype=float) for a in (a11, a12, a22)]
        _check_entries(*tables)

        def func(x, y):
            fx = np.clip((x - xs[0]) / (xs[1] - xs[0]), 0, len(xs) - 1 - 1e-12)
            fy = np.clip((y - ys[0]) / (ys[1] - ys[0]), 0, len(ys) - 1 - 1e-12)
            i, j = fy.astype(int), fx.astype(int)
            ty, tx = fy - i, fx - j
            vals = [
                (1 - ty) * ((1 - tx) * t[i, j] + tx * t[i, j + 1])
                + ty * ((1 - tx) * t[i + 1, j] + tx * t[i + 1, j + 1])
                for t in tables
            ]
            scale = 1.0 / np.sqrt(vals[0] * vals[2] - vals[1] ** 2)
            return tuple(v * scale for v in vals)

        return cls(func=func, support_radius=support_radius, name="grid")


def _check_entries(a11, a12, a22):
    if np.any(a11 <= 0.0):
        raise InvalidFieldError("a11 <= 0: matrix is not positive definite")
    det = a11 * a22 - a12 * a12
    if np.any(det <= 0.0):
        raise InvalidFieldError("det A <= 0: matrix is not positive definite")
    if np.any(np.abs(det - 1.0) > DET_TOL):
        worst = float(np.max(np.abs(det - 1.0)))
        raise InvalidFieldError(f"det A deviates from 1 by {worst:.3e}")


@dataclass(frozen=True)
class EllipticityConstants:
    K: float
    mu_sup: float
    K_A: float


# ---------------------------------------------------------------------------
# operations


def dilatation_from_matrix(A: SymmetricMatrixField) -> DilatationField:
    """mu = (a22 - a11 - 2i a12) / det(I + A), evaluated lazily from A."""
    # eager probe so non-elliptic inputs fail at construction
    t = _sample_grid(A.sample_half_width, 129)
    xx, yy = np.meshgrid(t, t)
    mu_from_entries(*A.entries(xx, yy))

    def func(x, y):
        return mu_from_entries(*A.entries(x, y, check=False))

    return DilatationField(
        func=func,
        support_radius=A.support_radius,
        name=A.name,
        params=dict(A.params),
        sample_n=A.sample_n,
    )


def matrix_from_dilatation(mu: DilatationField) -> SymmetricMatrixField:
    """Inverse of :func:`dilatation_from_matrix`; det A = 1 up to rounding."""
    if mu.sup_norm >= 1.0:
        raise InvalidDilatationError(f"sup |mu| = {mu.sup_norm:.6g} >= 1")

    def func(x, y):
        return entries_from_mu(mu(x, y))

    return SymmetricMatrixField(
        func=func,
        support_radius=mu.support_radius,
        name=mu.name,
        params=dict(mu.params),
        sample_n=mu.sample_n,
    )


def ellipticity_constant(A: SymmetricMatrixField, points=None) -> float:
    """Smallest K >= 1 with |xi|^2/K <= <A xi, xi> <= K |xi|^2 at every sample.

    With det A = 1 the two eigenvalues are reciprocal, so K is the largest
    eigenvalue seen. ``points`` (x, y) overrides the default dense grid.
    """
    def lam(x, y):
        a11, a12, a22 = A.entries(x, y)
        return largest_eigenvalue(a11, a12, a22)

    if points is not None:
        x, y = points
        return max(1.0, float(np.max(lam(np.asarray(x), np.asarray(y)))))
    return max(1.0, _chunked_max(lam, A.sample_half_width, A.sample_n))


def quasiconformality_coefficient(mu: DilatationField, K=None) -> EllipticityConstants:
    """K_A = (1 + sup|mu|) / (1 - sup|mu|), bundled with the ellipticity constant.

    When ``K`` is not given it is measured from the matrix field agreeing with mu.
    """
    m = mu.sup_norm
    if m >= 1.0:
        raise InvalidDilatationError(f"sup |mu| = {m:.6g} >= 1")
    K_A = (1.0 + m) / (1.0 - m)
    if K is None:
        K = ellipticity_constant(matrix_from_dilatation(mu))
    return EllipticityConstants(K=float(K), mu_sup=float(m), K_A=float(K_A))


# ---------------------------------------------------------------------------
# presets


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def radial_taper(r, inner, outer):
    """1 inside ``inner``, 0 beyond ``outer``, smooth in between."""
    return 1.0 - smooth_step((r - inner) / (outer - inner))


def _zero(support=2.0):
    return lambda x, y: np.zeros(np.shape(x), dtype=complex)


def _constant(re=0.0, im=0.0, plateau=1.6, support=2.0):
    c = complex(re, im)
    return lambda x, y: c * radial_taper(np.hypot(x, y), plateau, support)


def _radial_bump(amplitude=0.4, radius=1.0, sharpness=2.0, phase=0.0, support=2.0):
    c = amplitude * np.exp(1j * phase)

    def f(x, y):
        r = np.hypot(x, y)
        return c * np.exp(-((r / radius) ** (2 * sharpness))) * radial_taper(r, 0.6 * support, support)

    return f


def _gaussian_bump(amplitude=0.45, sigma=0.8, phase=0.0, support=2.0):
    c = amplitude * np.exp(1j * phase)

    def f(x, y):
        r2 = x * x + y * y
        return c * np.exp(-r2 / (2 * sigma * sigma)) * radial_taper(np.sqrt(r2), 0.5 * support, support)

    return f


def _smoothed_checker(amplitude=0.3, cell=0.5, smoothing=4.0, phase=0.0, support=2.0):
    c = amplitude * np.exp(1j * phase) / math.tanh(smoothing)

    def f(x, y):
        s = np.tanh(smoothing * np.sin(np.pi * x / cell) * np.sin(np.pi * y / cell))
        return c * s * radial_taper(np.hypot(x, y), 0.5 * support, support)

    return f


def _radial_stretch(k=2.0, support=2.0):
    c = (k - 1.0) / (k + 1.0)

    def f(x, y):
        z = x + 1j * y
        r = np.abs(z)
        phase = np.where(r > 0, (z / np.where(r > 0, r, 1.0)) ** 2, 1.0)
        return c * phase * radial_taper(r, 0.75 * support, support)

    return f


PRESETS = {
    "zero": (_zero, {"support": 2.0}),
    "constant": (_constant, {"re": 0.0, "im": 0.0, "plateau": 1.6, "support": 2.0}),
    "radial_bump": (
        _radial_bump,
        {"amplitude": 0.4, "radius": 1.0, "sharpness": 2.0, "phase": 0.0, "support": 2.0},
    ),
    "gaussian_bump": (
        _gaussian_bump,
        {"amplitude": 0.45, "sigma": 0.8, "phase": 0.0, "support": 2.0},
    ),
    "smoothed_checker": (
        _smoothed_checker,
        {"amplitude": 0.3, "cell": 0.5, "smoothing": 4.0, "phase": 0.0, "support": 2.0},
    ),
    "radial_stretch": (_radial_stretch, {"k": 2.0, "support": 2.0}),
}


def make_preset(name, sample_n=DEFAULT_SAMPLE_N, **params) -> DilatationField:
    """Build a named preset; unknown names or parameters raise ConfigError."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    factory, defaults = PRESETS[name]
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"preset {name!r} has no parameter(s) {sorted(unknown)}")
    merged = {k: float(params.get(k, v)) for k, v in defaults.items()}
    support = merged["support"]
    if not support > 0:
        raise ConfigError("support must be positive")
    kwargs = dict(merged)
    return DilatationField(
        func=factory(**kwargs),
        support_radius=support,
        name=name,
        params=merged,
        sample_n=sample_n,
    )


_PRESET_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_preset_spec(text):
    """Split ``name(k=v, ...)`` into (name, {k: float})."""
    m = _PRESET_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse preset specification {text!r}")
    name, body = m.group(1), m.group(2)
    params = {}
    if body and body.strip():
        for item in body.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"preset parameter {item.strip()!r} is not of the form key=value")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ConfigError(f"preset parameter {key.strip()!r} has non-numeric value {value.strip()!r}")
    return name, params


def preset_from_spec(text, sample_n=DEFAULT_SAMPLE_N) -> DilatationField:
    name, params = parse_preset_spec(text)
    return make_preset(name, sample_n=sample_n, **params)
