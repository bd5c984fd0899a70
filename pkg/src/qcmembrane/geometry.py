"""Quasidisc polygons D_A = phi^-1(unit disc), their radii, and smallest enclosing circles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beltrami import PlanarMap, PlanarPoint, invert_map
from .errors import DomainError, EmptyInputError, GeometryError, ResolutionError

DEFAULT_N_BOUNDARY = 1024
DEFAULT_INVERT_TOL = 1e-10


# ---------------------------------------------------------------------------
# polygon helpers (vertices as complex arrays)


def shoelace_area(poly):
    """Signed area; positive for counterclockwise vertex order."""
    p = np.asarray(poly, dtype=complex)
    x, y = p.real, p.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(a, b, c):
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def self_intersections(poly, chunk=256):
    """Count of intersecting non-adjacent edge pairs of a closed polygon."""
    p = np.asarray(poly, dtype=complex)
    n = len(p)
    a, b = p, np.roll(p, -1)
    count = 0
    for s in range(0, n, chunk):
        i = np.arange(s, min(s + chunk, n))[:, None]
        j = np.arange(n)[None, :]
        # each unordered pair once, skipping shared-vertex neighbours
        keep = (j > i + 1) & ~((i == 0) & (j == n - 1))
        a1, b1 = a[i], b[i]
        a2, b2 = a[j], b[j]
        d1 = _orient(a1, b1, a2)
        d2 = _orient(a1, b1, b2)
        d3 = _orient(a2, b2, a1)
        d4 = _orient(a2, b2, b1)
        hit = (d1 * d2 < 0) & (d3 * d4 < 0) & keep
        count += int(np.count_nonzero(hit))
    return count


def point_in_polygon(pt, poly):
    """Even-odd ray casting."""
    p = np.asarray(poly, dtype=complex)
    x, y = pt.real, pt.imag
    xi, yi = p.real, p.imag
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    crosses = (yi > y) != (yj > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = (xj - xi) * (y - yi) / (yj - yi) + xi
    return bool(np.count_nonzero(crosses & (x < xint)) % 2)


# ---------------------------------------------------------------------------
# quasidisc


@dataclass(frozen=True, eq=False)
class QuasidiscShape:
    """Counterclockwise boundary polygon of D_A, normalized to area pi about the anchor.

    ``raw_boundary`` / ``raw_anchor`` keep the map-coordinate polygon before the
    rescale; ``to_raw`` maps normalized coordinates back.
    """

    boundary: np.ndarray
    anchor: complex
    area: float
    scale_applied: float
    raw_boundary: np.ndarray
    raw_anchor: complex

    @property
    def points(self):
        return [PlanarPoint(v.real, v.imag) for v in self.boundary]

    def to_raw(self, z):
        return self.raw_anchor + (np.asarray(z) - self.anchor) / self.scale_applied

    def translated(self, shift):
        return QuasidiscShape(
            boundary=self.boundary + shift,
            anchor=self.anchor + shift,
            area=self.area,
            scale_applied=self.scale_applied,
            raw_boundary=self.raw_boundary,
            raw_anchor=self.raw_anchor,
        )


def unit_circle_targets(n):
    return np.exp(2j * np.pi * np.arange(n) / n)


def quasidisc_from_map(
    pmap: PlanarMap, n_boundary: int = DEFAULT_N_BOUNDARY, invert_tol: float = DEFAULT_INVERT_TOL
) -> QuasidiscShape:
    """Invert n_boundary unit-circle points and the origin, then rescale to area pi."""
    if n_boundary < 64:
        raise DomainError("n_boundary must be at least 64")
    raw = invert_map(pmap, unit_circle_targets(n_boundary), tol=invert_tol)
    raw_anchor = complex(invert_map(pmap, np.array([0j]), tol=invert_tol)[0])
    area = shoelace_area(raw)
    if area <= 0:
        raise ResolutionError("inverted boundary is not counterclockwise; refine the grid")
    if self_intersections(raw):
        raise ResolutionError(
            "quasidisc boundary self-intersects at this resolution; "
            "increase n_boundary or refine the grid"
        )
    if not point_in_polygon(raw_anchor, raw):
        raise GeometryError("phi^-1(0) does not lie inside the inverted boundary")
    scale = math.sqrt(math.pi / area)
    boundary = raw_anchor + scale * (raw - raw_anchor)
    return QuasidiscShape(
        boundary=boundary,
        anchor=raw_anchor,
        area=shoelace_area(boundary),
        scale_applied=scale,
        raw_boundary=raw,
        raw_anchor=raw_anchor,
    )


def centered_radius(shape: QuasidiscShape) -> float:
    """max |boundary - anchor|: the anchored radius R used by the eigenvalue bound."""
    return float(np.max(np.abs(shape.boundary - shape.anchor)))


def centered_inradius(shape: QuasidiscShape) -> float:
    return float(np.min(np.abs(shape.boundary - shape.anchor)))


def distortion_radius_bound(K_A: float) -> float:
    """exp(pi K_A) / 16."""
    if K_A < 1:
        raise DomainError(f"quasiconformality coefficient must be >= 1, got {K_A}")
    return math.exp(math.pi * K_A) / 16.0


# ---------------------------------------------------------------------------
# smallest enclosing circle


@dataclass(frozen=True)
class EnclosingCircle:
    center: PlanarPoint
    radius: float

    def contains(self, pts, tol=1e-9):
        pts = np.asarray(_as_xy(pts), dtype=float).reshape(-1, 2)
        d = np.hypot(pts[:, 0] - self.center.x, pts[:, 1] - self.center.y)
        return bool(np.all(d <= self.radius + tol))


_EPS = 1e-12


def _inside(c, p):
    (cx, cy, r) = c
    return math.hypot(p[0] - cx, p[1] - cy) <= r * (1 + _EPS) + _EPS


def _diameter(a, b):
    cx, cy = 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])
    return (cx, cy, max(math.hypot(a[0] - cx, a[1] - cy), math.hypot(b[0] - cx, b[1] - cy)))


def _circumcircle(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r = max(math.hypot(x - p[0], y - p[1]) for p in (a, b, c))
    return (x, y, r)


def _circle_two_fixed(pts, p, q):
    c = _diameter(p, q)
    for r in pts:
        if not _inside(c, r):
            cc = _circumcircle(p, q, r)
            if cc is None:
                # collinear under rounding: span the two farthest of the three
                cc = max((_diameter(p, q), _diameter(p, r), _diameter(q, r)), key=lambda t: t[2])
            c = cc
    return c


def _circle_one_fixed(pts, p):
    c = (p[0], p[1], 0.0)
    for j, q in enumerate(pts):
        if not _inside(c, q):
            c = _circle_two_fixed(pts[:j], p, q)
    return c


def smallest_enclosing_circle(points, seed: int = 0) -> EnclosingCircle:
    """Welzl's randomized incremental algorithm, iterative move-to-front form.

    The processing order is a permutation drawn from ``seed``; the circle
    itself does not depend on it beyond rounding.
    """
    pts = [(float(p[0]), float(p[1])) for p in _as_xy(points)]
    if not pts:
        raise EmptyInputError("smallest enclosing circle of an empty point set")
    order = np.random.default_rng(seed).permutation(len(pts))
    pts = [pts[i] for i in order]
    c = (pts[0][0], pts[0][1], 0.0)
    for i in range(1, len(pts)):
        p = pts[i]
        if not _inside(c, p):
            c = _circle_one_fixed(pts[:i], p)
            pts.insert(0, pts.pop(i))
    return EnclosingCircle(PlanarPoint(c[0], c[1]), c[2])


def _as_xy(points):
    if isinstance(points, np.ndarray) and np.iscomplexobj(points):
        return np.column_stack([points.real, points.imag]).tolist()
    return points
