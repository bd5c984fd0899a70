"""File formats: map dumps, ASCII meshes, point lists and SVG figures.

Map dump, version 1 (little endian)::

    8s   magic  b"QCMAP\\x00\\x00\\x01"
    u4   version (1)
    u4   n          samples per axis of the stored (solve) grid
    f8   L          half width of the stored grid
    u4   window_n   user window samples per axis
    f8   window_L   user window half width
    c16  affine     coefficient c of the affine term c * (zbar - <zbar>)
    f8   tol        solver tolerance
    f8   residual   spectral residual at exit
    c16 * n * n     displacement h = phi - z at the nodes, row-major
                    (row index = y, node (i, j) at (-L + j h, -L + i h))

Mesh file (ASCII)::

    <vertex count>
    x y            one line per vertex
    <triangle count>
    i j k          zero-based, counterclockwise
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .beltrami import ComputationalGrid, PlanarMap
from .errors import ConfigError, EmptyInputError
from .fem import TriangularMesh

MAP_MAGIC = b"QCMAP\x00\x00\x01"
MAP_VERSION = 1
_HEADER = struct.Struct("<8sIIdIdddddd")


def write_map_dump(path, pmap: PlanarMap):
    win = pmap.window_grid
    c = complex(pmap.affine_coeff)
    header = _HEADER.pack(
        MAP_MAGIC, MAP_VERSION, pmap.grid.n, pmap.grid.half_width, win.n, win.half_width,
        c.real, c.imag, pmap.tol, pmap.residual_l2, 0.0,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pmap.displacement, dtype="<c16").tobytes())
    return Path(path)


def read_map_dump(path) -> PlanarMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated map dump")
    magic, version, n, L, wn, wL, cre, cim, tol, res, _ = _HEADER.unpack_from(raw)
    if magic != MAP_MAGIC or version != MAP_VERSION:
        raise ConfigError(f"{path}: not a version-{MAP_VERSION} map dump")
    body = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if body.size != n * n:
        raise ConfigError(f"{path}: expected {n * n} samples, found {body.size}")
    grid = ComputationalGrid(n, L)
    c = complex(cre, cim)
    template = PlanarMap(periodic=np.zeros((n, n), complex), grid=grid, affine_coeff=c)
    disp = body.reshape(n, n).astype(complex)
    periodic = disp - c * (np.conj(grid.mesh()) - template.zbar_mean)
    return PlanarMap(
        periodic=periodic,
        grid=grid,
        window=ComputationalGrid(wn, wL),
        affine_coeff=c,
        residual_l2=res,
        tol=tol,
    )


def write_mesh(path, mesh: TriangularMesh):
    lines = [str(len(mesh.vertices))]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(str(len(mesh.triangles)))
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_mesh(path) -> TriangularMesh:
    tokens = Path(path).read_text().split("\n")
    tokens = [t for t in tokens if t.strip()]
    nv = int(tokens[0])
    verts = np.array([[float(v) for v in t.split()] for t in tokens[1:1 + nv]])
    nt = int(tokens[1 + nv])
    tris = np.array([[int(v) for v in t.split()] for t in tokens[2 + nv:2 + nv + nt]], dtype=np.int64)
    # boundary flags are not stored; recover them from edges used by one triangle
    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    boundary = np.zeros(nv, dtype=bool)
    boundary[uniq[counts == 1].ravel()] = True
    return TriangularMesh(vertices=verts, triangles=tris, boundary=boundary)


def read_points(path):
    """``x y`` per line; ``#`` starts a comment. Returns an (N, 2) array."""
    pts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'x y', got {body!r}")
            try:
                pts.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric coordinate in {body!r}")
    if not pts:
        raise EmptyInputError(f"{path}: no points")
    return np.array(pts, dtype=float)


def write_vertices(path, boundary, anchor):
    lines = [f"# anchor {anchor.real!r} {anchor.imag!r}", "# x y"]
    lines += [f"{z.real!r} {z.imag!r}" for z in boundary]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_svg(path, shape, sec, R_centered, size=480):
    """Quasidisc outline, anchor marker, smallest enclosing circle and anchored circle."""
    anchor = shape.anchor
    half = 1.1 * max(R_centered, sec.radius + abs(complex(*sec.center) - anchor))
    scale = size / (2 * half)

    def tx(z):
        return (z.real - anchor.real + half) * scale, (half - (z.imag - anchor.imag)) * scale

    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in map(tx, shape.boundary))
    ax, ay = tx(anchor)
    sx, sy = tx(complex(*sec.center))
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">
  <rect width="100%" height="100%" fill="white"/>
  <circle cx="{ax:.3f}" cy="{ay:.3f}" r="{R_centered * scale:.3f}" fill="none" stroke="#999" stroke-dasharray="6 4"/>
  <circle cx="{sx:.3f}" cy="{sy:.3f}" r="{sec.radius * scale:.3f}" fill="none" stroke="#c0392b"/>
  <polygon points="{pts}" fill="#d6eaf8" stroke="#1f4e79" stroke-width="1.5"/>
  <circle cx="{ax:.3f}" cy="{ay:.3f}" r="3" fill="#1f4e79"/>
</svg>
"""
    Path(path).write_text(svg)
    side = Path(path).with_suffix(".vertices.txt")
    write_vertices(side, shape.boundary, anchor)
    return Path(path), side


def format_circle(circle):
    """``cx cy r`` with 12 significant digits, negative zero printed as 0."""
    vals = []
    for v in (circle.center.x, circle.center.y, circle.radius):
        s = f"{v:.12g}"
        if s in ("-0", "-0.0") or (abs(v) < 5e-13 and v != 0.0 and math.isfinite(v)):
            s = "0"
        vals.append(s)
    return " ".join(vals)
