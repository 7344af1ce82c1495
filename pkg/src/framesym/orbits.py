"""Grid scan of the domain, orbit classification and stratification.

On the integrability domain, the orbit of a point under local symmetries is
the connected component of the level set of the order-n curvature derivative
through that point, and regions of constant top kernel dimension are open
strata whose orbits share one dimension.  The scanner approximates this on a
finite grid: features are the flattened derivative blocks, in-domain flags
come from the sampling probe, strata are grid-connected regions of constant
k_{n+1}, and orbits are grid-connected groups of feature-matching points.

Tolerance-based grouping can merge orbits whose invariants differ by less
than the feature tolerance; the tolerance is therefore part of the exported
summary, and equal-feature groups that are not grid-connected get distinct
labels plus a "possibly same orbit" flag rather than being merged.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .filtration import (
    DEFAULT_RANK_TOL,
    contraction_matrix,
    _dims_from_singular_values,
    probe_points,
)
from .frames import FrameSpec, derived_curvature

DEFAULT_FEATURE_TOL = 1e-6


def worker_count() -> int:
    """Thread cap for grid scans; FRAMESYM_THREADS overrides the default."""
    env = os.environ.get("FRAMESYM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


@dataclass
class OrbitAtlas:
    """Scan results plus (after stratify/classify) labels and tables."""

    spec: FrameSpec
    resolution: tuple[int, ...]
    axes: tuple[np.ndarray, ...]
    points: np.ndarray              # (N, n), lexicographic grid order
    dims: np.ndarray                # (N, n+2) kernel dimensions, -1 on error
    in_domain: np.ndarray           # (N,) bool
    features: np.ndarray            # (N, F) flattened derivative blocks
    errors: list[tuple[int, str]]
    probe_radius: float
    probe_count: int
    rank_tol: float
    feature_tol: float | None = None
    stratum: np.ndarray | None = None
    orbit: np.ndarray | None = None
    orbit_dim: np.ndarray | None = None
    strata_table: list[dict] = field(default_factory=list)
    orbit_table: list[dict] = field(default_factory=list)
    possibly_same: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def top_dim_index(self) -> int:
        return self.n  # k_{n+1} lives at column n of dims (k_1 at column 0)

    def neighbors(self, flat: int):
        idx = np.unravel_index(flat, self.resolution)
        for axis in range(len(self.resolution)):
            for delta in (-1, 1):
                j = idx[axis] + delta
                if 0 <= j < self.resolution[axis]:
                    nb = list(idx)
                    nb[axis] = j
                    yield int(np.ravel_multi_index(nb, self.resolution))


def _grid_points(spec: FrameSpec, resolution):
    resolution = tuple(int(r) for r in resolution)
    if len(resolution) != spec.n:
        raise DimensionMismatch(
            f"resolution needs {spec.n} axis counts, got {len(resolution)}"
        )
    if any(r < 3 for r in resolution):
        raise DimensionMismatch("resolution must be at least 3 per axis")
    axes = tuple(
        np.linspace(spec.box[i, 0], spec.box[i, 1], resolution[i])
        for i in range(spec.n)
    )
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    return resolution, axes, points


def _chunked_rows(count: int, chunk: int):
    return [(s, min(s + chunk, count)) for s in range(0, count, chunk)]


def _scan_chunk(spec: FrameSpec, pts: np.ndarray, r_dims: int, feat_order: int,
                rank_tol: float):
    """Dims to order r_dims plus features of order feat_order, one evaluation."""
    dk = derived_curvature(spec, pts, r_dims, strict=False)
    mat = contraction_matrix(dk, r_dims)
    valid = np.isfinite(mat).all(axis=(-2, -1))
    if dk.valid is not None:
        valid &= dk.valid
    dims = np.full(pts.shape[:-1] + (r_dims,), -1, dtype=int)
    npairs = len(dk.pairs)
    nobs = 0 if dk.phi_blocks is None else dk.phi_blocks[0].shape[-1]
    n = spec.n
    k_rows = np.cumsum([npairs * n * n ** (s - 1) for s in range(1, r_dims + 1)])
    o_rows = np.cumsum([nobs * n ** (s - 1) for s in range(1, r_dims + 1)])
    good = mat[valid]
    if good.size:
        for r in range(1, r_dims + 1):
            sub = np.concatenate(
                [good[:, : k_rows[r - 1], :],
                 good[:, k_rows[-1]: k_rows[-1] + o_rows[r - 1], :]],
                axis=1,
            )
            sigma = np.linalg.svd(sub, compute_uv=False)
            dims[valid, r - 1] = _dims_from_singular_values(sigma, n, rank_tol)
    # features: blocks up to feat_order of the same evaluation
    trimmed = dk.blocks[: feat_order + 1]
    batch = pts.shape[:-1]
    parts = [b.reshape(batch + (-1,)) for b in trimmed]
    if dk.phi_blocks is not None:
        parts += [b.reshape(batch + (-1,)) for b in dk.phi_blocks[: feat_order + 1]]
    feats = np.concatenate(parts, axis=-1)
    return dims, valid, feats


def scan_grid(spec: FrameSpec, resolution, rank_tol: float = DEFAULT_RANK_TOL,
              probe_count: int | None = None, chunk: int = 2048) -> OrbitAtlas:
    """Evaluate kernel dimensions, in-domain flags and features at every node.

    The probe radius is one grid cell (the smallest axis spacing).  Per-point
    failures (degenerate frame, out-of-domain function evaluation) are
    recorded on the record and leave the point out of the domain instead of
    aborting the scan.
    """
    resolution, axes, points = _grid_points(spec, resolution)
    n = spec.n
    count = probe_count if probe_count is not None else 2 * n + 2
    radius = float(min(
        (spec.box[i, 1] - spec.box[i, 0]) / (resolution[i] - 1) for i in range(n)
    ))
    shells = np.stack([probe_points(spec, x, radius, count) for x in points], axis=0)
    stacked = np.concatenate([points[:, None, :], shells], axis=1)  # (N, 1+2P, n)
    flat = stacked.reshape(-1, n)

    r_dims = n + 2
    spans = _chunked_rows(len(flat), chunk)
    results = [None] * len(spans)

    def work(i):
        s, e = spans[i]
        results[i] = _scan_chunk(spec, flat[s:e], r_dims, n, rank_tol)

    workers = worker_count()
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(len(spans))))
    else:
        for i in range(len(spans)):
            work(i)

    dims_all = np.concatenate([r[0] for r in results], axis=0)
    valid_all = np.concatenate([r[1] for r in results], axis=0)
    feats_all = np.concatenate([r[2] for r in results], axis=0)

    group = 1 + 2 * count
    dims_g = dims_all.reshape(len(points), group, r_dims)
    valid_g = valid_all.reshape(len(points), group)
    feats_g = feats_all.reshape(len(points), group, -1)

    centre_dims = dims_g[:, 0, :]
    features = feats_g[:, 0, :]
    centre_valid = valid_g[:, 0] & np.isfinite(features).all(axis=-1)
    agree = np.all(dims_g == centre_dims[:, None, :], axis=(1, 2))
    in_domain = centre_valid & valid_g.all(axis=1) & agree

    errors = [
        (int(i), "evaluation failed (degenerate frame or function domain)")
        for i in np.nonzero(~centre_valid)[0]
    ]
    return OrbitAtlas(
        spec, resolution, axes, points, centre_dims, in_domain, features,
        errors, radius, count, rank_tol,
    )


def stratify(atlas: OrbitAtlas) -> OrbitAtlas:
    """Partition in-domain nodes into maximal connected regions of constant k_{n+1}."""
    n_points = len(atlas.points)
    stratum = np.full(n_points, -1, dtype=int)
    table: list[dict] = []
    top = atlas.dims[:, atlas.top_dim_index]
    next_id = 0
    for start in range(n_points):
        if not atlas.in_domain[start] or stratum[start] >= 0:
            continue
        k_val = top[start]
        queue = [start]
        stratum[start] = next_id
        size = 0
        while queue:
            cur = queue.pop()
            size += 1
            for nb in atlas.neighbors(cur):
                if atlas.in_domain[nb] and stratum[nb] < 0 and top[nb] == k_val:
                    stratum[nb] = next_id
                    queue.append(nb)
        table.append({"stratum": next_id, "k_top": int(k_val),
                      "orbit_dim": int(k_val), "size": size})
        next_id += 1
    atlas.stratum = stratum
    atlas.strata_table = table
    return atlas


def _features_close(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= tol * scale))


def classify_orbits(atlas: OrbitAtlas,
                    feature_tol: float = DEFAULT_FEATURE_TOL) -> OrbitAtlas:
    """Group grid-adjacent equal-feature points within each stratum.

    Components grow only toward points whose features match the component's
    representative (its first point in grid order), which guarantees every
    member stays within the tolerance of the representative.  Equal-feature
    groups that are not grid-connected keep distinct labels and are flagged
    as possibly the same orbit.
    """
    if atlas.stratum is None:
        stratify(atlas)
    n_points = len(atlas.points)
    orbit = np.full(n_points, -1, dtype=int)
    orbit_dim = np.full(n_points, -1, dtype=int)
    table: list[dict] = []
    next_id = 0
    for start in range(n_points):
        if atlas.stratum[start] < 0 or orbit[start] >= 0:
            continue
        rep = atlas.features[start]
        s_id = atlas.stratum[start]
        dim = int(atlas.dims[start, atlas.top_dim_index])
        queue = [start]
        orbit[start] = next_id
        size = 0
        while queue:
            cur = queue.pop()
            size += 1
            orbit_dim[cur] = dim
            for nb in atlas.neighbors(cur):
                if (orbit[nb] < 0 and atlas.stratum[nb] == s_id
                        and _features_close(atlas.features[nb], rep, feature_tol)):
                    orbit[nb] = next_id
                    queue.append(nb)
        table.append({"orbit": next_id, "stratum": int(s_id), "size": size,
                      "dim": dim, "representative": start})
        next_id += 1
    atlas.orbit = orbit
    atlas.orbit_dim = orbit_dim
    atlas.orbit_table = table
    atlas.feature_tol = feature_tol
    # disconnected labels with matching invariants: flag, do not merge
    flags = []
    for a in range(len(table)):
        for b in range(a + 1, len(table)):
            fa = atlas.features[table[a]["representative"]]
            fb = atlas.features[table[b]["representative"]]
            if _features_close(fa, fb, feature_tol):
                flags.append((a, b))
    atlas.possibly_same = flags
    return atlas


# ----------------------------------------------------------------- export

def _fmt(v: float) -> str:
    return repr(float(v))


def export(atlas: OrbitAtlas, directory, basename: str = "orbit_atlas"):
    """Write the atlas CSV and its sidecar text summary; returns both paths.

    Row order is lexicographic grid order and all formatting is value-derived,
    so identical scans produce byte-identical files.
    """
    import pathlib

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{basename}.csv"
    summary_path = directory / f"{basename}_summary.txt"

    n = atlas.n
    r_dims = atlas.dims.shape[1]
    nfeat = atlas.features.shape[1]
    header = (
        list(atlas.spec.coords)
        + [f"k{r}" for r in range(1, r_dims + 1)]
        + ["in_int", "stratum", "orbit", "orbit_dim"]
        + [f"feat_{j}" for j in range(nfeat)]
    )
    stratum = atlas.stratum if atlas.stratum is not None else np.full(len(atlas.points), -1)
    orbit = atlas.orbit if atlas.orbit is not None else np.full(len(atlas.points), -1)
    orbit_dim = atlas.orbit_dim if atlas.orbit_dim is not None else np.full(len(atlas.points), -1)
    bad = {i for i, _ in atlas.errors}

    lines = [",".join(header)]
    for i in range(len(atlas.points)):
        row = [_fmt(c) for c in atlas.points[i]]
        if i in bad:
            row += [""] * r_dims
            row += ["0", str(int(stratum[i])), str(int(orbit[i])), str(int(orbit_dim[i]))]
            row += [""] * nfeat
        else:
            row += [str(int(d)) for d in atlas.dims[i]]
            row += [
                "1" if atlas.in_domain[i] else "0",
                str(int(stratum[i])), str(int(orbit[i])), str(int(orbit_dim[i])),
            ]
            row += [_fmt(v) for v in atlas.features[i]]
        lines.append(",".join(row))
    csv_path.write_text("\n".join(lines) + "\n")

    summary_path.write_text("\n".join(_summary_lines(atlas)) + "\n")
    return csv_path, summary_path


def _summary_lines(atlas: OrbitAtlas) -> list[str]:
    n_in = int(atlas.in_domain.sum())
    lines = [
        "orbit atlas summary",
        "===================",
        f"grid: {'x'.join(str(r) for r in atlas.resolution)} over "
        + ", ".join(f"[{lo:g}, {hi:g}]" for lo, hi in atlas.spec.domain_box),
        f"nodes: {len(atlas.points)}   in integrability domain: {n_in}",
        f"probe: radius {atlas.probe_radius:g}, {atlas.probe_count} directions "
        f"on two shells (clipped to the box); sampling approximation of local constancy",
        f"rank tolerance: {atlas.rank_tol:g}",
    ]
    if atlas.feature_tol is not None:
        lines.append(f"feature tolerance: {atlas.feature_tol:g} (relative, per component)")
    if atlas.errors:
        lines.append(f"evaluation errors at {len(atlas.errors)} nodes (in_int forced false)")
    if n_in == 0:
        lines.append("integrability domain empty at this resolution")
        return lines
    lines.append("")
    lines.append("strata (maximal connected regions of constant k_top):")
    lines.append("  id  k_top  orbit_dim  nodes")
    for row in atlas.strata_table:
        lines.append(
            f"  {row['stratum']:>2}  {row['k_top']:>5}  {row['orbit_dim']:>9}  {row['size']:>5}"
        )
    if atlas.orbit_table:
        lines.append("")
        lines.append(f"orbit labels: {len(atlas.orbit_table)}")
        per_stratum: dict[int, int] = {}
        for row in atlas.orbit_table:
            per_stratum[row["stratum"]] = per_stratum.get(row["stratum"], 0) + 1
        for s_id in sorted(per_stratum):
            lines.append(f"  stratum {s_id}: {per_stratum[s_id]} orbit labels")
        if atlas.possibly_same:
            lines.append(
                "possibly the same orbit (equal invariants, not grid-connected): "
                + ", ".join(f"({a},{b})" for a, b in atlas.possibly_same)
            )
    return lines
