"""Command-line front end: scene files, verification runs, solver output.

Subcommands:

    scene          resolve a preset (or normalize a scene file) and write it
    verify         theorem checks plus GMRES histories on a scene
    spectrum       eigenvalues of the four preconditioned matrices
    solve          solve one formulation and write density plus history
    validate-disk  field accuracy of all formulations against the disk series

Every command is a pure function of its scene file and flags: a rerun
produces byte-identical outputs.  Each command writes one JSON report;
per-iteration residuals, eigenvalues, and densities are also written as
CSV, whose column order is part of the format contract.  Exit codes:
0 all enabled checks passed, 1 a numeric threshold failed, 2 bad input,
3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import pathlib
import sys

import numpy as np

from . import analytic, bem, formulations, geometry, linalg, verify

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PRESETS = ("desk", "paper")

RESIDUAL_COLUMNS = ("formulation", "preconditioned", "iteration", "residual")
EIGENVALUE_COLUMNS = ("formulation", "re", "im")
DENSITY_COLUMNS = ("obstacle", "node", "x", "y", "re", "im")

# Relative L2 accuracy demanded of each formulation's scattered field on
# the evaluation circle of the disk check.
DISK_FIELD_THRESHOLD = 1e-2
_DISK_EVAL_RADIUS = 3.0
_DISK_EVAL_POINTS = 200

EXIT_PASS = 0
EXIT_THRESHOLD = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_PARAM_FIELDS = {
    "ellipse": ("a", "b"),
    "rounded_rectangle": ("a", "b", "p"),
    "kite": ("s",),
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a command needs: scene source, parameters, output place."""

    scene_path: str | None = None
    preset: str = "desk"
    seed: int = 0
    ppw: float = 15.0
    alpha: float = 0.2
    eta: complex | None = None
    eta_bw: complex | None = None
    restart: int = 50
    tol: float = 1e-6
    maxiter: int = 1000
    formulation: str = "CFIE"
    preconditioned: bool = True
    disk_k: float = 5.0
    out_dir: str = "."

    def validate(self) -> "RunConfig":
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.ppw < 4.0:
            raise ValueError("points per wavelength must be at least 4")
        if self.restart < 1:
            raise ValueError("restart must be at least 1")
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.maxiter < 0:
            raise ValueError("maxiter must be nonnegative")
        if self.formulation not in formulations.FORMULATION_KINDS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.disk_k <= 0.0:
            raise ValueError("wavenumber must be positive")
        return self


# ---------------------------------------------------------------------------
# scene files


def scene_to_dict(scene: geometry.Scene) -> dict:
    """Plain-data form of a scene, ready for JSON."""
    obstacles = []
    for shape in scene.obstacles:
        params = {name: getattr(shape, name) for name in _PARAM_FIELDS[shape.kind]}
        obstacles.append(
            {
                "kind": shape.kind,
                "params": params,
                "center": [shape.center[0], shape.center[1]],
                "rotation": shape.rotation,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "k": scene.k,
        "beta": [scene.beta[0], scene.beta[1]],
        "box": list(scene.box),
        "min_center_distance": scene.min_center_distance,
        "seed": scene.seed,
        "obstacles": obstacles,
    }


def scene_from_dict(doc: dict) -> geometry.Scene:
    """Rebuild and validate a scene from its plain-data form."""
    if not isinstance(doc, dict):
        raise ValueError("scene document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported scene schema_version {version!r}")
    missing = {"k", "beta", "box", "min_center_distance", "seed", "obstacles"} - doc.keys()
    if missing:
        raise ValueError(f"scene file is missing fields: {sorted(missing)}")
    if len(doc["beta"]) != 2:
        raise ValueError("beta must have two components")
    if len(doc["box"]) != 4:
        raise ValueError("box must be [x0, y0, x1, y1]")

    shapes = []
    for i, entry in enumerate(doc["obstacles"]):
        kind = entry.get("kind")
        if kind not in _PARAM_FIELDS:
            raise ValueError(f"obstacle {i}: unknown kind {kind!r}")
        params = dict(entry.get("params", {}))
        unexpected = set(params) - set(_PARAM_FIELDS[kind])
        if unexpected:
            raise ValueError(f"obstacle {i}: unexpected parameters {sorted(unexpected)}")
        center = entry.get("center", (0.0, 0.0))
        if len(center) != 2:
            raise ValueError(f"obstacle {i}: center must have two components")
        shapes.append(
            geometry.Shape(
                kind=kind,
                center=(float(center[0]), float(center[1])),
                rotation=float(entry.get("rotation", 0.0)),
                **{key: (int(val) if key == "p" else float(val)) for key, val in params.items()},
            )
        )
    scene = geometry.Scene(
        k=float(doc["k"]),
        beta=(float(doc["beta"][0]), float(doc["beta"][1])),
        obstacles=tuple(shapes),
        box=tuple(float(v) for v in doc["box"]),
        min_center_distance=float(doc["min_center_distance"]),
        seed=int(doc["seed"]),
    )
    scene.validate()
    return scene


def write_scene(scene: geometry.Scene, path) -> None:
    pathlib.Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def read_scene(path) -> geometry.Scene:
    return scene_from_dict(json.loads(pathlib.Path(path).read_text()))


def _resolve_scene(cfg: RunConfig) -> geometry.Scene:
    if cfg.scene_path is not None:
        return read_scene(cfg.scene_path)
    if cfg.preset == "desk":
        return verify.desk_scene(cfg.seed)
    return verify.paper_scene(cfg.seed)


# ---------------------------------------------------------------------------
# report plumbing


def _out_dir(cfg: RunConfig) -> pathlib.Path:
    out = pathlib.Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: pathlib.Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _complex_pair(z: complex) -> list[float]:
    return [z.real, z.imag]


def _parameter_doc(cfg: RunConfig, k: float) -> dict:
    eta = cfg.eta if cfg.eta is not None else -1j * k
    eta_bw = cfg.eta_bw if cfg.eta_bw is not None else 0.5j * k
    return {
        "alpha": cfg.alpha,
        "eta": _complex_pair(complex(eta)),
        "eta_bw": _complex_pair(complex(eta_bw)),
        "restart": cfg.restart,
        "tol": cfg.tol,
        "maxiter": cfg.maxiter,
    }


def _write_residuals(path: pathlib.Path, records) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESIDUAL_COLUMNS)
        for rec in records:
            tag = "true" if rec.preconditioned else "false"
            for i, residual in enumerate(rec.residual_history):
                writer.writerow([rec.formulation, tag, i, float(residual)])


def _print_check(name: str, value: float, bound: float, ok: bool) -> None:
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.6e} (bound {bound:.1e})")


# ---------------------------------------------------------------------------
# commands


def cmd_scene(cfg: RunConfig) -> int:
    """Resolve the scene and write it as a JSON document."""
    scene = _resolve_scene(cfg)
    path = _out_dir(cfg) / "scene.json"
    write_scene(scene, path)
    print(f"wrote {path} ({len(scene.obstacles)} obstacles, k={scene.k:g})")
    return EXIT_PASS


def cmd_verify(cfg: RunConfig) -> int:
    """Run the equality and similarity checks plus all GMRES histories."""
    scene = _resolve_scene(cfg)
    mesh = geometry.mesh_scene(scene, cfg.ppw)
    logger.info("verify: %d unknowns over %d obstacles", mesh.n_nodes, len(mesh.meshes))
    ops = bem.assemble_operators(mesh, scene.k)
    ops["mass"] = bem.assemble_mass(mesh)

    direct = verify.check_direct_equality(scene, mesh, cfg.alpha, cfg.eta, operators=ops)
    similar = verify.check_bw_similarity(
        scene, mesh, cfg.alpha, cfg.eta, cfg.eta_bw, operators=ops
    )
    histories = verify.convergence_histories(
        scene, mesh, cfg.alpha, cfg.eta, cfg.eta_bw, operators=ops,
        restart=cfg.restart, tol=cfg.tol, maxiter=cfg.maxiter,
    )

    checks: dict[str, bool] = {}
    for key, value in direct.differences.items():
        checks[f"direct {key}"] = direct.passed[key]
        _print_check(f"direct {key}", value, direct.thresholds[key], direct.passed[key])
    sim_value = similar.similarity_difference
    checks["similarity EFIE/BW"] = similar.passed["EFIE/BW"]
    _print_check("similarity EFIE/BW", sim_value, similar.thresholds["EFIE/BW"],
                 checks["similarity EFIE/BW"])

    pre_counts = [
        histories.record(kind, True).iterations for kind in formulations.FORMULATION_KINDS
    ]
    checks["iteration counts superimposed"] = max(pre_counts) - min(pre_counts) <= 1
    for kind in ("CFIE", "BW"):
        pre = histories.record(kind, True)
        plain = histories.record(kind, False)
        checks[f"preconditioning improves {kind}"] = (
            pre.converged and pre.iterations < plain.iterations
        )
    for name in ("iteration counts superimposed",
                 "preconditioning improves CFIE", "preconditioning improves BW"):
        print(f"{'PASS' if checks[name] else 'FAIL'}  {name}")

    out = _out_dir(cfg)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "scene": scene_to_dict(scene),
        "ppw": cfg.ppw,
        "unknowns": mesh.n_nodes,
        "parameters": _parameter_doc(cfg, scene.k),
        "differences": direct.differences,
        "similarity_difference": sim_value,
        "thresholds": {**direct.thresholds, **similar.thresholds},
        "iterations": [
            {
                "formulation": rec.formulation,
                "preconditioned": rec.preconditioned,
                "iterations": rec.iterations,
                "converged": rec.converged,
            }
            for rec in histories.records
        ],
        "checks": checks,
        "passed": all(checks.values()),
    }
    _write_json(out / "verify.json", doc)
    _write_residuals(out / "residuals.csv", histories.records)
    return EXIT_PASS if doc["passed"] else EXIT_THRESHOLD


def cmd_spectrum(cfg: RunConfig) -> int:
    """Eigenvalues of the four preconditioned matrices, matched to EFIE."""
    scene = _resolve_scene(cfg)
    mesh = geometry.mesh_scene(scene, cfg.ppw)
    logger.info("spectrum: %d unknowns", mesh.n_nodes)
    report = verify.check_spectra(scene, mesh, cfg.alpha, cfg.eta, cfg.eta_bw)
    passed = report.matched_max_rel_error <= verify.DESK_SPECTRUM_THRESHOLD
    _print_check("matched spectra", report.matched_max_rel_error,
                 verify.DESK_SPECTRUM_THRESHOLD, passed)

    out = _out_dir(cfg)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "spectrum",
        "scene": scene_to_dict(scene),
        "ppw": cfg.ppw,
        "unknowns": mesh.n_nodes,
        "parameters": _parameter_doc(cfg, scene.k),
        "matched_max_rel_error": report.matched_max_rel_error,
        "threshold": verify.DESK_SPECTRUM_THRESHOLD,
        "passed": passed,
    }
    _write_json(out / "spectrum.json", doc)
    with open(out / "eigenvalues.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(EIGENVALUE_COLUMNS)
        for kind in formulations.FORMULATION_KINDS:
            for value in report.eigenvalues[kind]:
                writer.writerow([kind, float(value.real), float(value.imag)])
    return EXIT_PASS if passed else EXIT_THRESHOLD


def cmd_solve(cfg: RunConfig) -> int:
    """Solve one formulation on the scene and write density and history."""
    scene = _resolve_scene(cfg)
    mesh = geometry.mesh_scene(scene, cfg.ppw)
    form = formulations.Formulation(
        kind=cfg.formulation, alpha=cfg.alpha, eta=cfg.eta, eta_bw=cfg.eta_bw
    )
    system = formulations.build_system(form, scene, mesh)
    pre = formulations.single_scattering_preconditioner(system) if cfg.preconditioned else None
    density, report = formulations.solve(
        system, pre, restart=cfg.restart, tol=cfg.tol, maxiter=cfg.maxiter
    )
    record = verify.SolveRecord(
        formulation=cfg.formulation,
        preconditioned=cfg.preconditioned,
        iterations=report.iterations,
        converged=report.converged,
        residual_history=tuple(float(r) for r in report.residual_history),
    )
    state = "converged" if report.converged else "did not converge"
    print(f"{cfg.formulation} ({'preconditioned' if cfg.preconditioned else 'plain'}) "
          f"{state} after {report.iterations} iterations, "
          f"final residual {record.residual_history[-1]:.6e}")

    out = _out_dir(cfg)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "scene": scene_to_dict(scene),
        "ppw": cfg.ppw,
        "unknowns": mesh.n_nodes,
        "parameters": _parameter_doc(cfg, scene.k),
        "formulation": cfg.formulation,
        "preconditioned": cfg.preconditioned,
        "iterations": report.iterations,
        "converged": report.converged,
        "final_residual": record.residual_history[-1],
    }
    _write_json(out / "solve.json", doc)
    _write_residuals(out / "residuals.csv", [record])
    nodes = mesh.all_nodes
    with open(out / "density.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(DENSITY_COLUMNS)
        for p in range(len(mesh.meshes)):
            start, stop = mesh.block_range(p)
            for i in range(start, stop):
                writer.writerow(
                    [p, i, float(nodes[i, 0]), float(nodes[i, 1]),
                     float(density[i].real), float(density[i].imag)]
                )
    return EXIT_PASS if report.converged else EXIT_THRESHOLD


def disk_field_errors(k: float = 5.0, ppw: float = 15.0, alpha: float = 0.2,
                      eta: complex | None = None,
                      eta_bw: complex | None = None) -> dict[str, float]:
    """Relative L2 field error of every formulation for the unit disk.

    Each system is solved directly (LU) and its scattered field compared
    against the separation-of-variables series on a circle of radius 3
    about the disk center.
    """
    scene = geometry.Scene(
        k=k,
        beta=(0.0, 1.0),
        obstacles=(geometry.Shape(kind="ellipse", a=1.0, b=1.0),),
        box=(-5.0, -5.0, 5.0, 5.0),
    )
    mesh = geometry.mesh_scene(scene, ppw)
    ops = bem.assemble_operators(mesh, scene.k)
    ops["mass"] = bem.assemble_mass(mesh)

    theta = np.linspace(0.0, 2.0 * np.pi, _DISK_EVAL_POINTS, endpoint=False)
    points = _DISK_EVAL_RADIUS * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    reference = analytic.mie_scattered(
        analytic.MieConfig(k=k, radius=1.0, beta=scene.beta), points
    )
    scale = np.linalg.norm(reference)

    errors = {}
    for kind in formulations.FORMULATION_KINDS:
        form = formulations.Formulation(kind=kind, alpha=alpha, eta=eta, eta_bw=eta_bw)
        system = formulations.build_system(form, scene, mesh, operators=ops)
        density = linalg.lu_solve(linalg.lu_factor(system.matrix), system.rhs)
        field = formulations.scattered_field(system, density, points)
        errors[kind] = float(np.linalg.norm(field.values - reference) / scale)
        logger.info("disk %s: relative L2 field error %.3e", kind, errors[kind])
    return errors


def cmd_validate_disk(cfg: RunConfig) -> int:
    """Check every formulation's field accuracy on the unit disk."""
    errors = disk_field_errors(
        k=cfg.disk_k, ppw=cfg.ppw, alpha=cfg.alpha, eta=cfg.eta, eta_bw=cfg.eta_bw
    )
    checks = {kind: err <= DISK_FIELD_THRESHOLD for kind, err in errors.items()}
    for kind in formulations.FORMULATION_KINDS:
        _print_check(f"disk field {kind}", errors[kind], DISK_FIELD_THRESHOLD, checks[kind])

    out = _out_dir(cfg)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "validate-disk",
        "disk": {
            "k": cfg.disk_k,
            "radius": 1.0,
            "ppw": cfg.ppw,
            "evaluation_radius": _DISK_EVAL_RADIUS,
            "evaluation_points": _DISK_EVAL_POINTS,
        },
        "parameters": _parameter_doc(cfg, cfg.disk_k),
        "errors": errors,
        "threshold": DISK_FIELD_THRESHOLD,
        "checks": checks,
        "passed": all(checks.values()),
    }
    _write_json(out / "validate_disk.json", doc)
    return EXIT_PASS if doc["passed"] else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# argument parsing


def _scene_options(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--scene", metavar="PATH", help="scene file to load")
    source.add_argument("--preset", choices=PRESETS, default=None,
                        help="built-in scene preset (default: desk)")
    parser.add_argument("--seed", type=int, default=0,
                        help="placement seed for presets (default: 0)")


def _formulation_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=0.2,
                        help="CFIE combination weight in (0, 1) (default: 0.2)")
    parser.add_argument("--eta-re", type=float, default=None,
                        help="real part of the CFIE coupling (default: 0)")
    parser.add_argument("--eta-im", type=float, default=None,
                        help="imaginary part of the CFIE coupling (default: -k)")
    parser.add_argument("--eta-bw-re", type=float, default=None,
                        help="real part of the BW coupling (default: 0)")
    parser.add_argument("--eta-bw-im", type=float, default=None,
                        help="imaginary part of the BW coupling (default: k/2)")


def _solver_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--restart", type=int, default=50,
                        help="GMRES restart length (default: 50)")
    parser.add_argument("--tol", type=float, default=1e-6,
                        help="GMRES relative residual tolerance (default: 1e-6)")
    parser.add_argument("--maxiter", type=int, default=1000,
                        help="GMRES total iteration cap (default: 1000)")


def _common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ppw", type=float, default=15.0,
                        help="mesh points per wavelength, at least 4 (default: 15)")
    parser.add_argument("--out", default=".", metavar="DIR",
                        help="output directory (default: current directory)")
    parser.add_argument("--verbose", action="store_true",
                        help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiscat",
        description="Multiple-scattering boundary element solver and checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scene", help="write a resolved scene file")
    _scene_options(p)
    _common_options(p)
    p.set_defaults(func=cmd_scene)

    p = sub.add_parser("verify", help="equality and similarity checks plus histories")
    _scene_options(p)
    _formulation_options(p)
    _solver_options(p)
    _common_options(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum", help="eigenvalues of the preconditioned matrices")
    _scene_options(p)
    _formulation_options(p)
    _common_options(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("solve", help="solve one formulation on a scene")
    _scene_options(p)
    _formulation_options(p)
    _solver_options(p)
    _common_options(p)
    p.add_argument("--formulation", choices=formulations.FORMULATION_KINDS,
                   default="CFIE", help="integral equation to solve (default: CFIE)")
    p.add_argument("--plain", action="store_true",
                   help="solve without the single-scattering preconditioner")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate-disk", help="disk field accuracy for all formulations")
    _formulation_options(p)
    _common_options(p)
    p.add_argument("--k", type=float, default=5.0,
                   help="wavenumber for the unit disk (default: 5)")
    p.set_defaults(func=cmd_validate_disk)

    return parser


def _complex_flag(re: float | None, im: float | None) -> complex | None:
    if re is None and im is None:
        return None
    return complex(re if re is not None else 0.0, im if im is not None else 0.0)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        scene_path=getattr(args, "scene", None),
        preset=getattr(args, "preset", None) or "desk",
        seed=getattr(args, "seed", 0),
        ppw=args.ppw,
        alpha=getattr(args, "alpha", 0.2),
        eta=_complex_flag(getattr(args, "eta_re", None), getattr(args, "eta_im", None)),
        eta_bw=_complex_flag(
            getattr(args, "eta_bw_re", None), getattr(args, "eta_bw_im", None)
        ),
        restart=getattr(args, "restart", 50),
        tol=getattr(args, "tol", 1e-6),
        maxiter=getattr(args, "maxiter", 1000),
        formulation=getattr(args, "formulation", "CFIE"),
        preconditioned=not getattr(args, "plain", False),
        disk_k=getattr(args, "k", 5.0),
        out_dir=args.out,
    ).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        return args.func(cfg)
    except linalg.SingularMatrixError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RuntimeError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
