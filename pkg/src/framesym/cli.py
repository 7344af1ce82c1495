"""Command-line interface: analyze / killing / orbits / verify.

Exit codes: 0 success, 1 verification failure, 2 configuration or runtime
error.  The FRAMESYM_THREADS environment variable caps grid parallelism.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import FrameSymError, GeneratorResidualWarning
from .filtration import homogeneity_report, integrability_probe, killing_spaces
from .orbits import classify_orbits, export, scan_grid, stratify
from .reports import analyze_report, killing_report, verification_table
from .transport import (
    direction_lattice,
    generator_membership_residual,
    killing_field,
    verify_killing,
)
from .verification import run_verification


def _parse_vector(text: str, dim: int, flag: str) -> np.ndarray:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise FrameSymError(f"{flag} expects comma-separated reals, got {text!r}") from None
    if len(values) != dim:
        raise FrameSymError(f"{flag} expects {dim} components, got {len(values)}")
    return np.asarray(values)


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(lines: list[str], path: Path):
    text = "\n".join(lines) + "\n"
    path.write_text(text)
    sys.stdout.write(text)


def _cmd_analyze(cfg: RunConfig, out: Path) -> int:
    spec = cfg.frame_spec()
    filtrations = [
        killing_spaces(spec, np.asarray(x, dtype=float), rank_tol=cfg.rank_tol)
        for x in cfg.samples
    ]
    probes = [
        integrability_probe(spec, x, cfg.probe_radius, cfg.probe_count, cfg.rank_tol)
        for x in cfg.samples
    ]
    homog = homogeneity_report(spec, np.asarray(cfg.samples, dtype=float),
                               rank_tol=cfg.rank_tol, const_tol=cfg.feature_tol)
    lines = analyze_report(cfg, filtrations, probes, homog)
    if cfg.figures:
        from .figures import analyze_figure

        if analyze_figure(filtrations, out / "analyze_dims.png"):
            lines.append(f"figure: {out / 'analyze_dims.png'}")
    _emit(lines, out / "analyze_report.txt")
    return 0


def _interior_indices(directions: np.ndarray, per_axis: int, n: int) -> list[int]:
    if per_axis < 3:
        return [int(np.argmin(np.linalg.norm(directions, axis=1)))]
    out = []
    for flat in range(len(directions)):
        idx = np.unravel_index(flat, (per_axis,) * n)
        if all(0 < c < per_axis - 1 for c in idx):
            out.append(flat)
    return out


def _cmd_killing(cfg: RunConfig, out: Path, at: str | None, gen: str | None,
                 lattice_radius: float, lattice_points: int) -> int:
    if not at or not gen:
        raise FrameSymError("killing needs --at x1,..,xn and --gen a1,..,an")
    spec = cfg.frame_spec()
    x0 = _parse_vector(at, spec.n, "--at")
    seed = _parse_vector(gen, spec.n, "--gen")

    residual, bad_order = generator_membership_residual(spec, x0, seed)
    if bad_order:
        sys.stdout.write(
            f"generator not in Kill^{spec.n + 1}(x0): residual {residual:.1e} "
            f"(first failure at order {bad_order})\n"
        )
        return 1
    probe = integrability_probe(spec, x0, cfg.probe_radius, cfg.probe_count,
                                cfg.rank_tol)
    if not probe.in_domain:
        sys.stdout.write(
            f"base point fails the integrability probe at radius "
            f"{cfg.probe_radius:g} (dims {probe.dims}); transport is not certified\n"
        )
        return 1

    lattice = direction_lattice(spec.n, lattice_radius, lattice_points)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeneratorResidualWarning)
        field = killing_field(spec, x0, seed, lattice, step=cfg.ode_step, check=False)

    csv_path = out / "killing_field.csv"
    header = (
        [f"x{k + 1}" for k in range(spec.n)]
        + [f"u{k + 1}" for k in range(spec.n)]
        + [f"v{k + 1}" for k in range(spec.n)]
    )
    lines = [",".join(header)]
    for k in range(len(lattice)):
        row = (list(field.points[k]) + list(field.frame_components[k])
               + list(field.coordinate_components[k]))
        lines.append(",".join(repr(float(v)) for v in row))
    csv_path.write_text("\n".join(lines) + "\n")

    residuals = {
        idx: verify_killing(spec, field, field.points[idx], fd_step=cfg.ode_step)
        for idx in _interior_indices(lattice, lattice_points, spec.n)
    }
    report = killing_report(cfg, x0, seed, field, residuals, residual)
    report.append(f"csv: {csv_path}")
    if cfg.figures:
        from .figures import killing_figure

        if killing_figure(field, out / "killing_field.png"):
            report.append(f"figure: {out / 'killing_field.png'}")
    _emit(report, out / "killing_report.txt")
    worst = max(residuals.values()) if residuals else 0.0
    return 0 if worst <= cfg.killing_tol else 1


def _cmd_orbits(cfg: RunConfig, out: Path) -> int:
    spec = cfg.frame_spec()
    atlas = scan_grid(spec, cfg.resolution, rank_tol=cfg.rank_tol,
                      probe_count=cfg.probe_count)
    stratify(atlas)
    classify_orbits(atlas, cfg.feature_tol)
    csv_path, summary_path = export(atlas, out)
    extra = []
    if cfg.figures:
        from .figures import atlas_figure

        if atlas_figure(atlas, out / "orbit_atlas.png"):
            extra.append(f"figure: {out / 'orbit_atlas.png'}")
    text = summary_path.read_text()
    if extra:
        text += "\n".join(extra) + "\n"
        summary_path.write_text(text)
    sys.stdout.write(text)
    sys.stdout.write(f"csv: {csv_path}\n")
    return 0


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    rows = run_verification(cfg)
    lines = verification_table(rows)
    _emit(lines, out / "verify_report.txt")
    return 0 if all(ok for _, ok, _ in rows) else 1


def run(command: str, cfg: RunConfig, at: str | None = None, gen: str | None = None,
        out: str | None = None, lattice_radius: float = 0.2,
        lattice_points: int = 5) -> int:
    """Programmatic entry point behind the CLI; returns the exit code."""
    out_dir = _out_dir(cfg, out)
    if command == "analyze":
        return _cmd_analyze(cfg, out_dir)
    if command == "killing":
        return _cmd_killing(cfg, out_dir, at, gen, lattice_radius, lattice_points)
    if command == "orbits":
        return _cmd_orbits(cfg, out_dir)
    if command == "verify":
        return _cmd_verify(cfg, out_dir)
    raise FrameSymError(f"unknown command {command!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="framesym",
        description="Local symmetry analysis of a manifold with a global frame",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("analyze", "kernel dimensions, integrability and homogeneity at samples"),
        ("killing", "integrate a generator into a sampled Killing field"),
        ("orbits", "scan the grid, stratify and classify orbits, export CSV"),
        ("verify", "run the numerical verification suite"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        if name == "killing":
            p.add_argument("--at", help="base point, comma-separated reals")
            p.add_argument("--gen", help="generator frame components, comma-separated")
            p.add_argument("--lattice-radius", type=float, default=0.2,
                           help="extent of the direction lattice (default 0.2)")
            p.add_argument("--lattice-points", type=int, default=5,
                           help="lattice points per axis (default 5)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return run(
            args.command, cfg,
            at=getattr(args, "at", None), gen=getattr(args, "gen", None),
            out=args.out,
            lattice_radius=getattr(args, "lattice_radius", 0.2),
            lattice_points=getattr(args, "lattice_points", 5),
        )
    except FrameSymError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
