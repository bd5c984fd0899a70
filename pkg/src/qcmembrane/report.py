"""End-to-end pipeline: preset -> map -> quasidisc -> FEM oracle -> bounds -> report."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import platform
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .beltrami import ComputationalGrid, map_residual, solve_beltrami
from .bounds import (
    bessel_first_derivative_zero,
    bound_corollary_D,
    bound_mu_norm,
    bound_theorem_A,
    bound_theorem_B,
    bound_theorem_C,
    disc_neumann_eigenvalue,
    extension_energy_ratio,
)
from .config import RunConfig
from .errors import StageError
from .fem import FemSystem, first_nontrivial_neumann, pullback_field, triangulate_polygon
from .fields import ellipticity_constant, make_preset, matrix_from_dilatation, quasiconformality_coefficient
from .geometry import (
    centered_inradius,
    centered_radius,
    distortion_radius_bound,
    quasidisc_from_map,
    smallest_enclosing_circle,
)

BOUND_SLACK = 1e-9
PASS, WARN, FAIL = "PASS", "WARN", "FAIL"

JSON_KEYS = (
    "k", "k_a", "mu_sup", "r_centered", "r_sec", "r_inradius", "distortion_bound",
    "j_prime", "bound_a", "bound_b", "bound_b_ka", "bound_c", "bound_d", "fem_mu1",
    "flags", "config_echo", "versions",
)


@dataclass
class BoundReport:
    K: float
    K_A: float
    mu_sup: float
    R_centered: float
    R_sec: float
    r_inradius: float
    distortion_bound: float
    j_prime: float
    bound_A: float
    bound_B: float
    bound_B_KA: float
    bound_C: float
    bound_D: float
    fem_mu1: float
    flags: dict
    config_echo: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    timestamp: str = ""

    @property
    def failed(self):
        return any(v == FAIL for v in self.flags.values())

    def to_dict(self, include_timestamp=True):
        d = {
            "k": self.K,
            "k_a": self.K_A,
            "mu_sup": self.mu_sup,
            "r_centered": self.R_centered,
            "r_sec": self.R_sec,
            "r_inradius": self.r_inradius,
            "distortion_bound": self.distortion_bound,
            "j_prime": self.j_prime,
            "bound_a": self.bound_A,
            "bound_b": self.bound_B,
            "bound_b_ka": self.bound_B_KA,
            "bound_c": self.bound_C,
            "bound_d": self.bound_D,
            "fem_mu1": self.fem_mu1,
            "flags": dict(self.flags),
            "config_echo": self.config_echo,
            "versions": versions(),
            "diagnostics": self.diagnostics,
        }
        if include_timestamp:
            d["timestamp"] = self.timestamp
        return d

    def to_json(self, include_timestamp=True):
        return json.dumps(self.to_dict(include_timestamp), indent=2, sort_keys=False) + "\n"


def versions():
    return {
        "qcmembrane": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def csv_header():
    return list(JSON_KEYS)


def csv_row(report: BoundReport):
    d = report.to_dict(include_timestamp=False)
    row = []
    for key in JSON_KEYS:
        v = d[key]
        row.append(json.dumps(v, sort_keys=True) if isinstance(v, dict) else repr(float(v)))
    return row


def write_csv(reports, stream=None):
    stream = stream or io.StringIO()
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header())
    for r in reports:
        writer.writerow(csv_row(r))
    return stream


@contextmanager
def _stage(name):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _lower_bound_flag(fem_mu1, bound):
    return PASS if fem_mu1 >= bound - BOUND_SLACK else FAIL


@dataclass
class PipelineArtifacts:
    """Intermediate objects kept for optional file outputs."""

    mu: object = None
    A: object = None
    pmap: object = None
    shape: object = None
    sec: object = None
    mesh: object = None
    eigen: object = None


def build_report(config: RunConfig, mu=None, artifacts: PipelineArtifacts | None = None, corrupt_symbol=None):
    """Run every stage and collect constants, bounds, the FEM oracle value and flags."""
    config.validate()
    art = artifacts if artifacts is not None else PipelineArtifacts()

    with _stage("fields"):
        mu = mu if mu is not None else make_preset(config.preset, **config.params)
        A = matrix_from_dilatation(mu)
        K = ellipticity_constant(A)
        consts = quasiconformality_coefficient(mu, K=K)
    art.mu, art.A = mu, A

    with _stage("beltrami"):
        grid = ComputationalGrid(config.grid_n, config.grid_l)
        pmap = solve_beltrami(
            mu, grid, tol=config.beltrami_tol, max_iter=config.beltrami_max_iter,
            pad=config.pad, corrupt_symbol=corrupt_symbol,
        )
        fd_residual = map_residual(pmap, mu)
    art.pmap = pmap

    with _stage("geometry"):
        shape = quasidisc_from_map(pmap, config.n_boundary, config.invert_tol)
        R_c = centered_radius(shape)
        r_in = centered_inradius(shape)
        sec = smallest_enclosing_circle(shape.boundary, seed=config.seed)
        dist_bound = distortion_radius_bound(consts.K_A)
    art.shape, art.sec = shape, sec

    with _stage("fem"):
        A_shape = pullback_field(A, shape.to_raw)
        mesh = triangulate_polygon(shape.boundary, config.mesh_h)
        eig = first_nontrivial_neumann(FemSystem.build(mesh, A_shape), tol=config.eigen_tol, seed=config.seed)
        # circumscribed polygon of the smallest enclosing circle: contains D_A
        nb = config.n_boundary
        outer_r = sec.radius / math.cos(math.pi / nb)
        outer = complex(*sec.center) + outer_r * np.exp(2j * np.pi * np.arange(nb) / nb)
        outer_mesh = triangulate_polygon(outer, config.mesh_h)
        eig_outer = first_nontrivial_neumann(
            FemSystem.build(outer_mesh, A_shape), tol=config.eigen_tol, seed=config.seed
        )
    art.mesh, art.eigen = mesh, eig

    ratio = None
    if config.measure_extension:
        with _stage("extension"):
            tests = [np.real, np.imag, lambda z: np.real(z * z)]
            ratio = extension_energy_ratio(
                tests, pmap, A, n_samples=config.extension_samples, invert_tol=config.invert_tol
            )

    with _stage("bounds"):
        j = bessel_first_derivative_zero()
        ext = config.extension_norm
        b_A = bound_theorem_A(K, R_c)
        b_B = bound_theorem_B(K)
        b_BKA = bound_mu_norm(K, consts.mu_sup)
        b_C = bound_theorem_C(eig_outer.mu1, ext)
        b_D = bound_corollary_D(disc_neumann_eigenvalue(sec.radius), K, ext)
        fem = eig.mu1
        flags = {
            "bound_a": _lower_bound_flag(fem, b_A),
            "bound_b": _lower_bound_flag(fem, b_B),
            "bound_mu_norm": _lower_bound_flag(fem, b_BKA),
            "bound_c": _lower_bound_flag(fem, b_C),
            "bound_d": _lower_bound_flag(fem, b_D),
            "distortion_radius": PASS if R_c <= dist_bound else WARN,
            "k_a_le_k": PASS if consts.K_A <= K + 1e-6 else WARN,
        }
        if ratio is not None:
            flags["extension_energy"] = PASS if ratio <= ext * ext + 0.3 else WARN

    diagnostics = {
        "preset": mu.describe(),
        "beltrami_iterations": pmap.iterations,
        "beltrami_spectral_residual": pmap.residual_l2,
        "beltrami_fd_residual": fd_residual,
        "normalization": {
            "displacement": "zero grid mean of the periodic part; affine mean term restored",
            "area_scale": shape.scale_applied,
            "raw_area": shape.scale_applied**-2 * math.pi,
        },
        "anchor": [shape.anchor.real, shape.anchor.imag],
        "sec_center": [sec.center.x, sec.center.y],
        "sec_vs_anchor_offset": abs(complex(*sec.center) - shape.anchor),
        "area": shape.area,
        "mesh_vertices": int(len(mesh.vertices)),
        "mesh_triangles": int(len(mesh.triangles)),
        "eigen_iterations": eig.iterations,
        "eigen_residual": eig.residual_norm,
        "fem_mu1_outer": eig_outer.mu1,
        "extension_norm": ext,
        "extension_energy_ratio": ratio,
    }
    return BoundReport(
        K=K,
        K_A=consts.K_A,
        mu_sup=consts.mu_sup,
        R_centered=R_c,
        R_sec=sec.radius,
        r_inradius=r_in,
        distortion_bound=dist_bound,
        j_prime=j,
        bound_A=b_A,
        bound_B=b_B,
        bound_B_KA=b_BKA,
        bound_C=b_C,
        bound_D=b_D,
        fem_mu1=fem,
        flags=flags,
        config_echo=config.to_dict(),
        diagnostics=diagnostics,
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
