"""Command-line front end.

Exit codes: 0 when everything passes, 2 when a bound or validation check
fails, 1 on configuration or pipeline errors. Every command that writes
files prints a one-line JSON manifest of them to stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .beltrami import ComputationalGrid, map_residual, solve_beltrami
from .bounds import (
    bessel_first_derivative_zero,
    bound_corollary_D,
    bound_mu_norm,
    bound_theorem_A,
    bound_theorem_B,
    disc_neumann_eigenvalue,
)
from .config import RunConfig
from .errors import ConfigError, QCMembraneError, StageError
from .fem import FemSystem, first_nontrivial_neumann, pullback_field, regular_polygon, triangulate_polygon, unit_square
from .fields import SymmetricMatrixField, make_preset, matrix_from_dilatation
from .geometry import centered_radius, distortion_radius_bound, quasidisc_from_map, smallest_enclosing_circle
from .io import format_circle, read_points, write_map_dump, write_mesh, write_svg
from .report import PipelineArtifacts, build_report, write_csv
from .validation import run_battery

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

_OVERRIDES = {
    "preset": "preset",
    "grid_n": "grid_n",
    "grid_l": "grid_l",
    "mesh_h": "mesh_h",
    "seed": "seed",
    "out": "out",
}


class _Parser(argparse.ArgumentParser):
    # usage errors are operational errors (1), not failures (2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _param(text):
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected k=v, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key.strip()!r}: {value!r} is not a number")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="TOML run configuration")
    p.add_argument("--preset", help="dilatation preset, optionally 'name(k=v, ...)'")
    p.add_argument("--param", action="append", type=_param, default=[], metavar="K=V",
                   help="preset parameter (repeatable)")
    p.add_argument("--grid-n", type=int)
    p.add_argument("--grid-l", type=float)
    p.add_argument("--mesh-h", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--emit-svg", action="store_true")
    p.add_argument("--emit-mesh", action="store_true")
    p.add_argument("--emit-map", action="store_true")
    return p


def build_parser():
    parser = _Parser(prog="qcmembrane", description="Neumann eigenvalue bounds on A-quasidiscs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()

    sub.add_parser("report", parents=[common], help="full pipeline, report.json and report.csv")
    sub.add_parser("solve-map", parents=[common], help="solve the Beltrami equation and dump the map")

    p = sub.add_parser("eigen", parents=[common], help="first non-trivial Neumann eigenvalue")
    p.add_argument("--domain", choices=("quasidisc", "square", "disc"), default="quasidisc")
    p.add_argument("--k-diag", type=float, default=None,
                   help="use A = diag(1/k, k) instead of the preset field (square and disc only)")

    p = sub.add_parser("bounds", parents=[common], help="closed-form bounds for given constants")
    p.add_argument("--K", type=float, required=True, dest="K")
    p.add_argument("--R", type=float, default=None, dest="R", help="radius for the radius-based bound")
    p.add_argument("--mu-sup", type=float, default=None)
    p.add_argument("--extension-norm", type=float, default=2.0)

    p = sub.add_parser("sec", parents=[common], help="smallest enclosing circle of a point file")
    p.add_argument("points", metavar="POINT_FILE")

    p = sub.add_parser("validate", parents=[common], help="analytic validation battery")
    p.add_argument("--corrupt-multiplier", action="store_true", help=argparse.SUPPRESS)
    return parser


def resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    cfg = RunConfig.from_toml(args.config) if args.config else RunConfig()
    changes = {}
    for flag, name in _OVERRIDES.items():
        v = getattr(args, flag, None)
        if v is not None:
            changes[name] = v
    for flag in ("emit_svg", "emit_mesh", "emit_map"):
        if getattr(args, flag, False):
            changes[flag] = True
    if "preset" in changes and changes["preset"] != cfg.preset:
        changes.setdefault("params", {})
    if args.param:
        base = changes.get("params", cfg.params)
        changes["params"] = {**base, **dict(args.param)}
    if changes:
        cfg = cfg.updated(**changes)
    return cfg.validate()


def _manifest(command, files, status=None, **extra):
    record = {"command": command, "files": [str(f) for f in files]}
    if status is not None:
        record["status"] = status
    record.update(extra)
    print(json.dumps(record, sort_keys=True))


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_report(cfg: RunConfig) -> int:
    art = PipelineArtifacts()
    report = build_report(cfg, artifacts=art)
    out = _outdir(cfg)
    files = []
    path = out / "report.json"
    path.write_text(report.to_json())
    files.append(path)
    path = out / "report.csv"
    path.write_text(write_csv([report]).getvalue())
    files.append(path)
    if cfg.emit_svg:
        files.extend(write_svg(out / "quasidisc.svg", art.shape, art.sec, report.R_centered))
    if cfg.emit_mesh:
        files.append(write_mesh(out / "quasidisc.mesh", art.mesh))
    if cfg.emit_map:
        files.append(write_map_dump(out / "map.qcmap", art.pmap))
    status = "FAIL" if report.failed else "PASS"
    _manifest("report", files, status, flags=report.flags)
    return EXIT_FAIL if report.failed else EXIT_OK


def run_solve_map(cfg: RunConfig) -> int:
    mu = make_preset(cfg.preset, **cfg.params)
    pmap = solve_beltrami(mu, ComputationalGrid(cfg.grid_n, cfg.grid_l), tol=cfg.beltrami_tol,
                          max_iter=cfg.beltrami_max_iter, pad=cfg.pad)
    out = _outdir(cfg)
    files = [write_map_dump(out / "map.qcmap", pmap)]
    summary = {
        "preset": mu.describe(),
        "iterations": pmap.iterations,
        "spectral_residual": pmap.residual_l2,
        "fd_residual": map_residual(pmap, mu),
        "update_history": list(pmap.update_history),
    }
    path = out / "map.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    files.append(path)
    if cfg.emit_svg or cfg.emit_mesh:
        shape = quasidisc_from_map(pmap, cfg.n_boundary, cfg.invert_tol)
        if cfg.emit_svg:
            sec = smallest_enclosing_circle(shape.boundary, seed=cfg.seed)
            files.extend(write_svg(out / "quasidisc.svg", shape, sec, centered_radius(shape)))
        if cfg.emit_mesh:
            files.append(write_mesh(out / "quasidisc.mesh", triangulate_polygon(shape.boundary, cfg.mesh_h)))
    _manifest("solve-map", files, "PASS", iterations=pmap.iterations)
    return EXIT_OK


def run_eigen(cfg: RunConfig, domain="quasidisc", k_diag=None) -> int:
    if domain == "quasidisc":
        if k_diag is not None:
            raise ConfigError("--k-diag: only valid with --domain square or disc")
        mu = make_preset(cfg.preset, **cfg.params)
        A = matrix_from_dilatation(mu)
        pmap = solve_beltrami(mu, ComputationalGrid(cfg.grid_n, cfg.grid_l), tol=cfg.beltrami_tol,
                              max_iter=cfg.beltrami_max_iter, pad=cfg.pad)
        shape = quasidisc_from_map(pmap, cfg.n_boundary, cfg.invert_tol)
        polygon, A_mesh = shape.boundary, pullback_field(A, shape.to_raw)
    else:
        polygon = unit_square() if domain == "square" else regular_polygon(cfg.n_boundary)
        A_mesh = SymmetricMatrixField.diagonal(k_diag) if k_diag is not None else None
    mesh = triangulate_polygon(polygon, cfg.mesh_h)
    eig = first_nontrivial_neumann(FemSystem.build(mesh, A_mesh), tol=cfg.eigen_tol, seed=cfg.seed)
    out = _outdir(cfg)
    result = {
        "domain": domain,
        "mu1": eig.mu1,
        "iterations": eig.iterations,
        "residual": eig.residual_norm,
        "vertices": int(len(mesh.vertices)),
        "triangles": int(len(mesh.triangles)),
    }
    files = []
    path = out / "eigen.json"
    path.write_text(json.dumps(result, indent=2) + "\n")
    files.append(path)
    if cfg.emit_mesh:
        files.append(write_mesh(out / f"{domain}.mesh", mesh))
    _manifest("eigen", files, "PASS", mu1=eig.mu1)
    return EXIT_OK


def run_bounds(K, R=None, mu_sup=None, extension_norm=2.0) -> int:
    j = bessel_first_derivative_zero()
    result = {"k": K, "j_prime": j, "bound_b": bound_theorem_B(K), "distortion_bound": distortion_radius_bound(K)}
    if R is not None:
        result["bound_a"] = bound_theorem_A(K, R)
        result["bound_d"] = bound_corollary_D(disc_neumann_eigenvalue(R), K, extension_norm)
    if mu_sup is not None:
        result["bound_mu_norm"] = bound_mu_norm(K, mu_sup)
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def run_sec(point_file, seed) -> int:
    circle = smallest_enclosing_circle(read_points(point_file), seed=seed)
    print(format_circle(circle))
    return EXIT_OK


def run_validate(corrupt_multiplier=False) -> int:
    checks = run_battery(corrupt_multiplier=corrupt_multiplier)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "report":
            return run_report(cfg)
        if args.command == "solve-map":
            return run_solve_map(cfg)
        if args.command == "eigen":
            return run_eigen(cfg, args.domain, args.k_diag)
        if args.command == "bounds":
            return run_bounds(args.K, args.R, args.mu_sup, args.extension_norm)
        if args.command == "sec":
            return run_sec(args.points, cfg.seed)
        return run_validate(args.corrupt_multiplier)
    except StageError as exc:
        print(f"qcmembrane: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (QCMembraneError, OSError, ValueError) as exc:
        print(f"qcmembrane: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
