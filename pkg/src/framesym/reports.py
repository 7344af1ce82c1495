"""Plain-text report rendering for the CLI subcommands.

Reports are deterministic line lists: no timestamps, no machine identifiers.
Every tolerance that influenced a verdict is restated next to the verdict.
"""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .filtration import HomogeneityReport, KillingFiltration, ProbeResult


def _point(x) -> str:
    return "(" + ", ".join(f"{float(c):g}" for c in np.atleast_1d(x)) + ")"


def analyze_report(cfg: RunConfig,
                   filtrations: list[KillingFiltration],
                   probes: list[ProbeResult],
                   homogeneity: HomogeneityReport) -> list[str]:
    n = cfg.dim
    lines = [
        "local symmetry analysis",
        "=======================",
        f"config: {cfg.source}",
        f"frame dimension: {n}   observables: {len(cfg.observables)}",
        "",
        f"samples ({len(filtrations)}):",
        "  point | k_1..k_{n+2} | stabilization order | in integrability domain",
    ]
    for kf, pr in zip(filtrations, probes):
        dims = " ".join(str(d) for d in kf.dims)
        lines.append(
            f"  {_point(kf.point)} | {dims} | s0 = {kf.stabilization_order} | "
            f"{'yes' if pr.in_domain else 'NO'}"
        )
    lines += [
        "",
        f"integrability probe: radius {cfg.probe_radius:g}, "
        f"{cfg.probe_count} directions, two shells, clipped to the box "
        f"(sampling approximation of local constancy)",
        f"rank tolerance: {cfg.rank_tol:g}",
        "",
        "homogeneity tests on the sampled region:",
        f"  derivative blocks to order {homogeneity.derivative_order} constant: "
        f"{'PASS' if homogeneity.constant_curvature else 'fail'} "
        f"(max relative deviation {homogeneity.max_feature_deviation:.3e}, "
        f"tolerance {homogeneity.const_tol:g})",
        f"  k_{n + 1} = n at every sample: "
        f"{'PASS' if homogeneity.full_rank else 'fail'} "
        f"(values {list(homogeneity.top_dims)})",
    ]
    if homogeneity.homogeneous:
        tests = "; ".join(homogeneity.passing_tests())
        lines.append(f"verdict: locally homogeneous on sampled region ({tests})")
    else:
        lines.append("verdict: NOT locally homogeneous on the sampled region")
    return lines


def killing_report(cfg: RunConfig, x0, gen, field, residuals: dict[int, float],
                   membership_residual: float) -> list[str]:
    lines = [
        "killing field construction",
        "==========================",
        f"config: {cfg.source}",
        f"base point: {_point(x0)}   generator (frame components): {_point(gen)}",
        f"generator membership residual: {membership_residual:.3e}",
        f"lattice: {len(field.directions)} directions, ode step {cfg.ode_step:g}",
        "",
        "commutator residuals at verified lattice points "
        f"(tolerance {cfg.killing_tol:g}):",
    ]
    for idx in sorted(residuals):
        lines.append(f"  {_point(field.points[idx])}: {residuals[idx]:.3e}")
    worst = max(residuals.values()) if residuals else 0.0
    verdict = "PASS" if worst <= cfg.killing_tol else "FAIL"
    lines.append(f"max residual: {worst:.3e} -> {verdict}")
    return lines


def verification_table(rows: list[tuple[str, bool, str]]) -> list[str]:
    width = max(len(name) for name, _, _ in rows) if rows else 10
    lines = [
        "verification suite",
        "==================",
    ]
    for name, ok, detail in rows:
        lines.append(f"  {name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    failed = sum(1 for _, ok, _ in rows if not ok)
    lines.append("")
    lines.append(f"{len(rows) - failed}/{len(rows)} checks passed")
    return lines
