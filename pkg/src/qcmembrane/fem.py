"""Linear finite elements for the Neumann problem -div(A grad u) = mu1 u.

This module is the independent oracle for every eigenvalue bound: it knows
nothing about Beltrami maps beyond the isometry check at the bottom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import triangle

from .errors import (
    GeometryError,
    NonConvergenceError,
    ResourceError,
    SolverError,
    UnreliableMapError,
)
from .fields import SymmetricMatrixField
from .geometry import self_intersections, shoelace_area, unit_circle_targets

DEFAULT_MESH_H = 0.02
DEFAULT_EIGEN_TOL = 1e-8
DEFAULT_SEED = 42
MAX_TRIANGLES = 4_000_000
MIN_ANGLE = 20.0


@dataclass(frozen=True, eq=False)
class TriangularMesh:
    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3), counterclockwise
    boundary: np.ndarray  # (N,) bool

    @property
    def areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self):
        return float(np.sum(self.areas))

    @property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def edge_lengths(self):
        p = self.vertices[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def min_angle_deg(self):
        p = self.vertices[self.triangles]
        out = np.inf
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out = min(out, float(np.degrees(np.arccos(np.clip(cosang, -1, 1))).min()))
        return out


def _as_complex(poly):
    poly = np.asarray(poly)
    if np.iscomplexobj(poly):
        return poly.astype(complex)
    poly = np.asarray(poly, dtype=float).reshape(-1, 2)
    return poly[:, 0] + 1j * poly[:, 1]


def _split_edges(poly, h):
    """Insert equally spaced points so no boundary edge is longer than h."""
    nxt = np.roll(poly, -1)
    pieces = []
    for a, b in zip(poly, nxt):
        k = max(1, math.ceil(abs(b - a) / h - 1e-9))
        pieces.append(a + (b - a) * np.arange(k) / k)
    return np.concatenate(pieces)


def triangulate_polygon(polygon, target_h: float) -> TriangularMesh:
    """Quality constrained Delaunay mesh: edges <= 1.5 target_h, angles >= 20 degrees."""
    if not target_h > 0:
        raise GeometryError("target_h must be positive")
    poly = _as_complex(polygon)
    if len(poly) < 3:
        raise GeometryError("polygon needs at least three vertices")
    if self_intersections(poly):
        raise GeometryError("polygon is self-intersecting")
    area = abs(shoelace_area(poly))
    max_area = 0.3 * target_h**2
    if area / max_area > MAX_TRIANGLES / 2:
        raise ResourceError(
            f"target_h={target_h:g} would need more than {MAX_TRIANGLES} triangles"
        )
    poly = _split_edges(poly, target_h)
    n = len(poly)
    pslg = {
        "vertices": np.column_stack([poly.real, poly.imag]),
        "segments": np.column_stack([np.arange(n), (np.arange(n) + 1) % n]),
    }
    for _ in range(8):
        out = triangle.triangulate(pslg, f"pq{MIN_ANGLE:g}a{max_area:.15f}")
        mesh = TriangularMesh(
            vertices=np.asarray(out["vertices"], dtype=float),
            triangles=np.asarray(out["triangles"], dtype=np.int64),
            boundary=np.asarray(out["vertex_markers"]).ravel() == 1,
        )
        if mesh.edge_lengths().max() <= 1.5 * target_h:
            break
        max_area *= 0.5
    else:
        raise GeometryError("could not meet the edge-length bound")
    if np.any(mesh.areas <= 0):
        raise GeometryError("mesher produced a non-positive triangle")
    return mesh


def unit_square(side=1.0):
    return np.array([0, side, side + 1j * side, 1j * side], dtype=complex)


def regular_polygon(n, area=math.pi):
    """Regular n-gon centred at the origin, scaled to the given area."""
    pts = unit_circle_targets(n)
    return pts * math.sqrt(area / shoelace_area(pts))


# ---------------------------------------------------------------------------
# assembly


def _p1_gradients(mesh):
    """Barycentric gradients (M, 3, 2) and triangle areas (M,)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas
    grads = np.empty((len(area), 3, 2))
    for k in range(3):
        a = p[:, (k + 1) % 3]
        b = p[:, (k + 2) % 3]
        # rotate the opposite edge by -90 degrees
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / (2 * area)
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / (2 * area)
    return grads, area


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = len(mesh.vertices)
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def element_stiffness(mesh, A: SymmetricMatrixField):
    grads, area = _p1_gradients(mesh)
    c = mesh.centroids
    a11, a12, a22 = A.entries(c[:, 0], c[:, 1])
    Ag0 = a11[:, None] * grads[:, :, 0] + a12[:, None] * grads[:, :, 1]
    Ag1 = a12[:, None] * grads[:, :, 0] + a22[:, None] * grads[:, :, 1]
    local = (Ag0[:, :, None] * grads[:, None, :, 0] + Ag1[:, :, None] * grads[:, None, :, 1])
    return local * area[:, None, None]


def assemble_stiffness(mesh: TriangularMesh, A: SymmetricMatrixField | None = None):
    """P1 stiffness with A taken at triangle centroids."""
    A = A or SymmetricMatrixField.identity()
    return _scatter(mesh, element_stiffness(mesh, A))


_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble_mass(mesh: TriangularMesh):
    """Consistent P1 mass matrix."""
    local = mesh.areas[:, None, None] * _MASS_REF[None, :, :]
    return _scatter(mesh, local)


@dataclass(frozen=True, eq=False)
class FemSystem:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    mesh: TriangularMesh | None = None

    @property
    def dimension(self):
        return self.stiffness.shape[0]

    @classmethod
    def build(cls, mesh, A=None):
        return cls(assemble_stiffness(mesh, A), assemble_mass(mesh), mesh)


@dataclass(frozen=True, eq=False)
class EigenResult:
    mu1: float
    eigenvector: np.ndarray
    iterations: int
    residual_norm: float


def first_nontrivial_neumann(
    system: FemSystem,
    tol: float = DEFAULT_EIGEN_TOL,
    seed: int = DEFAULT_SEED,
    block: int = 6,
    max_iter: int = 300,
) -> EigenResult:
    """Smallest eigenvalue of K v = mu M v on the M-complement of constants.

    Block shift-invert subspace iteration with Rayleigh-Ritz. The operator is
    (K + tau M)^-1 M with tau = 1/|Omega|, factorized once; the constant
    vector is projected out M-orthogonally after every application.
    """
    K, M = system.stiffness.tocsc(), system.mass.tocsc()
    n = K.shape[0]
    if n <= block + 1:
        raise SolverError("system too small for the block eigensolver")
    ones = np.ones(n)
    total = float(ones @ (M @ ones))
    c = ones / math.sqrt(total)
    Mc = M @ c
    tau = 1.0 / total

    def deflate(V):
        return V - np.outer(c, Mc @ V)

    try:
        lu = spla.splu((K + tau * M).tocsc())
    except RuntimeError as exc:
        raise SolverError(f"factorization of the shifted stiffness failed: {exc}") from exc

    rng = np.random.default_rng(seed)
    V = deflate(rng.standard_normal((n, block)))
    theta = None
    res = np.inf
    for it in range(1, max_iter + 1):
        W = lu.solve(np.asarray(M @ V))
        if not np.all(np.isfinite(W)):
            raise SolverError("linear solve produced non-finite values")
        W = deflate(W)
        KW = np.asarray(K @ W)
        MW = np.asarray(M @ W)
        Kr = W.T @ KW
        Mr = W.T @ MW
        Kr = 0.5 * (Kr + Kr.T)
        Mr = 0.5 * (Mr + Mr.T)
        try:
            theta, Y = scipy.linalg.eigh(Kr, Mr)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"Rayleigh-Ritz step failed: {exc}") from exc
        V = W @ Y
        v = V[:, 0]
        r = KW @ Y[:, 0] - theta[0] * (MW @ Y[:, 0])
        res = float(np.linalg.norm(r) / np.linalg.norm(MW @ Y[:, 0]))
        if res < tol:
            break
    else:
        raise NonConvergenceError(
            f"eigensolver did not reach tol={tol:g} in {max_iter} iterations (residual {res:.3e})",
            last_update=res,
        )
    v = v / math.sqrt(float(v @ (M @ v)))
    # fix the sign so reruns give identical vectors
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return EigenResult(mu1=float(theta[0]), eigenvector=v, iterations=it, residual_norm=res)


def poincare_constant(result: EigenResult) -> float:
    return result.mu1 ** -0.5


def neumann_eigenvalue(polygon, A=None, target_h=DEFAULT_MESH_H, tol=DEFAULT_EIGEN_TOL, seed=DEFAULT_SEED):
    """Convenience: mesh, assemble and solve in one call. Returns (EigenResult, FemSystem)."""
    mesh = triangulate_polygon(polygon, target_h)
    system = FemSystem.build(mesh, A)
    return first_nontrivial_neumann(system, tol=tol, seed=seed), system


def pullback_field(A: SymmetricMatrixField, to_raw) -> SymmetricMatrixField:
    """A evaluated at to_raw(z): the coefficient seen by a rescaled copy of the domain."""

    def func(x, y):
        zr = to_raw(np.asarray(x) + 1j * np.asarray(y))
        return A.entries(zr.real, zr.imag, check=False)

    return SymmetricMatrixField(func=func, name=f"pullback({A.name})", params=dict(A.params))


# ---------------------------------------------------------------------------
# energy isometry of composition with an A-quasiconformal map


class ReFieldPower:
    """u(w) = Re(w**k) with its exact gradient."""

    def __init__(self, k):
        self.k = int(k)

    def __call__(self, w):
        return np.real(np.asarray(w) ** self.k)

    def grad(self, w):
        d = self.k * np.asarray(w, dtype=complex) ** (self.k - 1)
        return d.real, -d.imag


def field_gradient(u, w, step=1e-6):
    if hasattr(u, "grad"):
        return u.grad(w)
    w = np.asarray(w, dtype=complex)
    gx = (u(w + step) - u(w - step)) / (2 * step)
    gy = (u(w + 1j * step) - u(w - 1j * step)) / (2 * step)
    return gx, gy


def _midpoint_quadrature(mesh):
    """Edge-midpoint rule (exact for quadratics): points (3M,) complex, weights (3M,)."""
    p = mesh.vertices[mesh.triangles]
    mids = 0.5 * (p + np.roll(p, -1, axis=1))
    pts = (mids[..., 0] + 1j * mids[..., 1]).ravel()
    w = np.repeat(mesh.areas / 3.0, 3)
    return pts, w


def interpolate_nodes(pmap, values, z):
    """Bilinear interpolation of a periodic node array of the map's solve grid."""
    L, h, n = pmap.grid.half_width, pmap.grid.spacing, pmap.grid.n
    fx = (z.real + L) / h
    fy = (z.imag + L) / h
    j0 = np.floor(fx).astype(int)
    i0 = np.floor(fy).astype(int)
    tx, ty = fx - j0, fy - i0
    j0 %= n
    i0 %= n
    j1, i1 = (j0 + 1) % n, (i0 + 1) % n
    return (1 - ty) * ((1 - tx) * values[i0, j0] + tx * values[i0, j1]) + ty * (
        (1 - tx) * values[i1, j0] + tx * values[i1, j1]
    )


def a_energy_density(u, pmap, A, z, derivs=None):
    """<A grad(u o phi), grad(u o phi)> at points z, chain rule through FD map derivatives."""
    px, py = derivs if derivs is not None else pmap.fd_derivatives()
    phx = interpolate_nodes(pmap, px, z)
    phy = interpolate_nodes(pmap, py, z)
    w = pmap(z)
    ux, uy = field_gradient(u, w)
    gx = ux * phx.real + uy * phx.imag
    gy = ux * phy.real + uy * phy.imag
    a11, a12, a22 = A.entries(z.real, z.imag)
    return a11 * gx * gx + 2 * a12 * gx * gy + a22 * gy * gy


def composition_isometry_check(u, pmap, A, quadrature_h, n_boundary=1024, invert_tol=1e-10):
    """|E_A - E_I| / E_I with E_A the A-energy of u o phi on phi^-1(D), E_I the energy of u on D."""
    from .beltrami import invert_map

    if pmap.residual_l2 > 10 * pmap.tol:
        raise UnreliableMapError(
            f"map residual {pmap.residual_l2:.3e} exceeds 10 x tol ({pmap.tol:g})"
        )
    circle = unit_circle_targets(n_boundary)
    disc_mesh = triangulate_polygon(circle, quadrature_h)
    q, wts = _midpoint_quadrature(disc_mesh)
    ux, uy = field_gradient(u, q)
    E_I = float(np.sum(wts * (ux * ux + uy * uy)))

    raw = invert_map(pmap, circle, tol=invert_tol)
    qa_mesh = triangulate_polygon(raw, quadrature_h)
    qa, wa = _midpoint_quadrature(qa_mesh)
    E_A = float(np.sum(wa * a_energy_density(u, pmap, A, qa)))
    return abs(E_A - E_I) / E_I
