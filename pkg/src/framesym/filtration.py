"""Killing-generator spaces, integrability probing, homogeneity tests.

A vector A is a Killing generator of order r at x when contracting it into
the first derivative slot of every curvature-derivative block (and every
observable block) of order 1..r gives zero.  The spaces nest as r grows;
their dimensions k_r stabilise no later than order n+1, and the stabilisation
order is where transported generators become genuine Killing candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, OrderOverflow, StabilizationNotFound
from .frames import DerivedCurvature, FrameSpec, derived_curvature

DEFAULT_RANK_TOL = 1e-9


# ------------------------------------------------------------- contraction

def _contract_first_slot(block: np.ndarray, a: np.ndarray, s: int) -> np.ndarray:
    """Contract the outermost derivative slot (axis -s) of an order-s block."""
    moved = np.moveaxis(block, block.ndim - s, -1)
    a = np.asarray(a, dtype=float)
    extra = moved.ndim - a.ndim
    a_exp = a.reshape(a.shape[:-1] + (1,) * extra + (a.shape[-1],))
    return (moved * a_exp).sum(axis=-1)


def contract(dk: DerivedCurvature, a) -> DerivedCurvature:
    """Contract a vector into the first slot of every derivative block.

    Drops the order-0 block: the result of order r-1 has blocks
    (W_1 . a, ..., W_r . a), and observable blocks contracted identically.
    """
    if dk.order < 1:
        raise DimensionMismatch("cannot contract an order-0 derivative tuple")
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != dk.n:
        raise DimensionMismatch(
            f"vector has dimension {a.shape[-1]}, blocks have {dk.n}"
        )
    blocks = tuple(
        _contract_first_slot(dk.blocks[s], a, s) for s in range(1, dk.order + 1)
    )
    phi = None
    if dk.phi_blocks is not None:
        phi = tuple(
            _contract_first_slot(dk.phi_blocks[s], a, s) for s in range(1, dk.order + 1)
        )
    return DerivedCurvature(dk.point, dk.order - 1, dk.pairs, blocks, phi, dk.valid)


def contraction_matrix(dk: DerivedCurvature, r: int) -> np.ndarray:
    """Matrix of A -> (W_1.A, ..., W_r.A, Phi_1.A, ..., Phi_r.A), shape (..., rows, n)."""
    if r < 1 or r > dk.order:
        raise DimensionMismatch(f"order {r} outside the computed range 1..{dk.order}")
    batch = dk.blocks[0].shape[:-2]
    rows = []
    for s in range(1, r + 1):
        moved = np.moveaxis(dk.blocks[s], dk.blocks[s].ndim - s, -1)
        rows.append(moved.reshape(batch + (-1, dk.n)))
    if dk.phi_blocks is not None:
        for s in range(1, r + 1):
            moved = np.moveaxis(dk.phi_blocks[s], dk.phi_blocks[s].ndim - s, -1)
            rows.append(moved.reshape(batch + (-1, dk.n)))
    return np.concatenate(rows, axis=-2)


def generator_residual(dk: DerivedCurvature, a, r: int) -> np.ndarray:
    """Norm of the order-r contraction of ``a`` (zero iff a is a generator)."""
    mat = contraction_matrix(dk, r)
    return np.linalg.norm(mat @ np.asarray(a, dtype=float), axis=-1)


# ------------------------------------------------------------ kernel spaces

@dataclass(frozen=True)
class KillingFiltration:
    """Per-point kernels of the contraction maps, orders 1..max_order."""

    point: np.ndarray
    max_order: int
    dims: tuple[int, ...]
    bases: tuple[np.ndarray, ...]          # (n, k_r) orthonormal columns
    stabilization_order: int
    sigma_max: tuple[float, ...]
    rank_tol: float

    def dimension(self, r: int) -> int:
        return self.dims[r - 1]

    def kernel(self, r: int) -> np.ndarray:
        return self.bases[r - 1]


def _rank_threshold(smax, rank_tol: float):
    # relative to the top singular value, floored at unit scale so that a
    # matrix that is pure rounding noise reports rank 0
    return rank_tol * np.maximum(smax, 1.0)


def _dims_from_singular_values(sigma: np.ndarray, n: int, rank_tol: float) -> np.ndarray:
    if sigma.shape[-1] == 0:  # no constraint rows at all (e.g. n = 1, no phi)
        return np.full(sigma.shape[:-1], n, dtype=int)
    smax = sigma.max(axis=-1)
    rank = (sigma > _rank_threshold(smax, rank_tol)[..., None]).sum(axis=-1)
    return n - rank


def _stabilization(dims: list[int], max_order: int) -> int:
    for r in range(1, max_order):
        if dims[r - 1] == dims[r]:
            return r
    if dims[max_order - 1] == 0:
        return max_order
    raise StabilizationNotFound(
        f"kernel dimensions {dims} still strictly decreasing at order {max_order}; "
        "raise the probed order (>= n+2 always stabilises)"
    )


def killing_spaces(spec: FrameSpec, x, max_order: int | None = None,
                   rank_tol: float = DEFAULT_RANK_TOL) -> KillingFiltration:
    """Killing-generator spaces at one point, orders 1..max_order.

    Kernels come from an SVD of the stacked contraction matrix with
    threshold ``rank_tol`` relative to the largest singular value.
    """
    r_max = max_order if max_order is not None else spec.n + 2
    if r_max + 1 > spec.jet_budget:
        raise OrderOverflow(
            f"probing order {r_max} needs jet budget {r_max + 1} > {spec.jet_budget}"
        )
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("killing_spaces evaluates a single point; batch via killing_dims")
    dk = derived_curvature(spec, x, r_max)
    dims, bases, smaxes = [], [], []
    for r in range(1, r_max + 1):
        mat = contraction_matrix(dk, r)
        _, sigma, vt = np.linalg.svd(mat, full_matrices=True)
        smax = float(sigma.max()) if sigma.size else 0.0
        rank = int((sigma > _rank_threshold(smax, rank_tol)).sum())
        dims.append(spec.n - rank)
        bases.append(vt[rank:].T.copy())
        smaxes.append(smax)
    s0 = _stabilization(dims, r_max)
    return KillingFiltration(x, r_max, tuple(dims), tuple(bases), s0,
                             tuple(smaxes), rank_tol)


def killing_dims(spec: FrameSpec, points, max_order: int | None = None,
                 rank_tol: float = DEFAULT_RANK_TOL):
    """Batched kernel dimensions k_1..k_max at many points.

    Returns (dims, valid): dims shape (..., max_order) of ints (-1 where the
    evaluation failed), valid a boolean mask.
    """
    r_max = max_order if max_order is not None else spec.n + 2
    if r_max + 1 > spec.jet_budget:
        raise OrderOverflow(
            f"probing order {r_max} needs jet budget {r_max + 1} > {spec.jet_budget}"
        )
    points = np.asarray(points, dtype=float)
    dk = derived_curvature(spec, points, r_max, strict=False)
    mat = contraction_matrix(dk, r_max)
    batch = mat.shape[:-2]
    valid = np.isfinite(mat).all(axis=(-2, -1))
    if dk.valid is not None:
        valid &= dk.valid
    dims = np.full(batch + (r_max,), -1, dtype=int)
    if mat.shape[-2] == 0:  # no constraint rows: every vector is a generator
        dims[valid] = spec.n
        return dims, valid
    flat = mat.reshape((-1,) + mat.shape[-2:])
    flat_valid = valid.reshape(-1)
    flat_dims = dims.reshape(-1, r_max)
    # row counts of the cumulative matrices for orders 1..r_max
    npairs = len(dk.pairs)
    nobs = 0 if dk.phi_blocks is None else dk.phi_blocks[0].shape[-1]
    k_rows = np.cumsum([npairs * spec.n * spec.n ** (s - 1) for s in range(1, r_max + 1)])
    o_rows = np.cumsum([nobs * spec.n ** (s - 1) for s in range(1, r_max + 1)])
    good = flat[flat_valid]
    if good.size:
        for r in range(1, r_max + 1):
            sub = np.concatenate(
                [good[:, : k_rows[r - 1], :],
                 good[:, k_rows[-1]: k_rows[-1] + o_rows[r - 1], :]],
                axis=1,
            )
            sigma = np.linalg.svd(sub, compute_uv=False)
            flat_dims[flat_valid, r - 1] = _dims_from_singular_values(
                sigma, spec.n, rank_tol
            )
    return dims, valid


# -------------------------------------------------------- integrability probe

@lru_cache(maxsize=None)
def probe_directions(n: int, count: int) -> tuple[tuple[float, ...], ...]:
    """Deterministic quasi-uniform unit directions, none axis-aligned."""
    if n == 1:
        dirs = [((-1.0) ** j,) for j in range(count)]
        return tuple(dirs)
    if n == 2:
        # fixed irrational angular offset keeps probes off the grid axes
        out = []
        for j in range(count):
            th = 0.5 + 2.0 * math.pi * j / count
            out.append((math.cos(th), math.sin(th)))
        return tuple(out)
    rng = np.random.default_rng(20240817)
    vecs = rng.normal(size=(count, n))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return tuple(tuple(float(c) for c in v) for v in vecs)


def probe_points(spec: FrameSpec, x, radius: float, count: int) -> np.ndarray:
    """Two shells of probe points around x, clipped into the domain box."""
    x = np.asarray(x, dtype=float)
    dirs = np.asarray(probe_directions(spec.n, count))
    shells = np.concatenate([x + radius * dirs, x + 0.5 * radius * dirs], axis=-2)
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    return np.clip(shells, lo, hi)


@dataclass(frozen=True)
class ProbeResult:
    point: np.ndarray
    in_domain: bool
    dims: tuple[int, ...]
    radius: float
    probe_count: int
    disagreements: int


def integrability_probe(spec: FrameSpec, x, radius: float,
                        probe_count: int | None = None,
                        rank_tol: float = DEFAULT_RANK_TOL) -> ProbeResult:
    """Sampling test that k_1..k_{n+2} are locally constant at x.

    Evaluates the kernel dimensions at x and on two shells (radius and half
    radius) of quasi-uniform probe points, clipped to the domain box; the
    verdict is positive iff every probe agrees with the centre.  This is an
    approximation of local constancy, so radius and count are reported with
    the verdict.
    """
    count = probe_count if probe_count is not None else 2 * spec.n + 2
    x = np.asarray(x, dtype=float)
    pts = np.concatenate([x[None, :], probe_points(spec, x, radius, count)], axis=0)
    dims, valid = killing_dims(spec, pts, spec.n + 2, rank_tol)
    centre = dims[0]
    if not valid[0]:
        return ProbeResult(x, False, tuple(int(d) for d in centre), radius, count, -1)
    mismatch = int(np.sum(~(valid[1:] & np.all(dims[1:] == centre, axis=-1))))
    return ProbeResult(
        x, mismatch == 0, tuple(int(d) for d in centre), radius, count, mismatch
    )


# ----------------------------------------------------------- homogeneity

@dataclass(frozen=True)
class HomogeneityReport:
    samples: np.ndarray
    derivative_order: int
    constant_curvature: bool
    max_feature_deviation: float
    const_tol: float
    full_rank: bool
    top_dims: tuple[int, ...]
    rank_tol: float

    @property
    def homogeneous(self) -> bool:
        return self.constant_curvature or self.full_rank

    def passing_tests(self) -> list[str]:
        out = []
        if self.constant_curvature:
            out.append("curvature derivatives constant across samples")
        if self.full_rank:
            out.append("top-order generator space has full dimension")
        return out


def homogeneity_report(spec: FrameSpec, samples,
                       rank_tol: float = DEFAULT_RANK_TOL,
                       const_tol: float = 1e-6) -> HomogeneityReport:
    """Two sampled local-homogeneity tests.

    (a) every derivative block up to order n+1 (observables included) is
    constant across the samples within ``const_tol``;
    (b) k_{n+1} equals n at every sample, i.e. generators span every tangent
    space.  The geometry is reported locally homogeneous on the sampled
    region iff either test passes.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    dk = derived_curvature(spec, samples, spec.n + 1, strict=False)
    feats = dk.feature_vector()
    ref = feats[0]
    scale = np.maximum(1.0, np.maximum(np.abs(feats), np.abs(ref)))
    dev = float(np.max(np.abs(feats - ref) / scale)) if feats.size else 0.0
    constant = bool(np.isfinite(feats).all() and dev <= const_tol)
    dims, valid = killing_dims(spec, samples, spec.n + 1, rank_tol)
    top = dims[:, -1]
    full_rank = bool(valid.all() and np.all(top == spec.n))
    return HomogeneityReport(
        samples, spec.n + 1, constant, dev, const_tol, full_rank,
        tuple(int(d) for d in top), rank_tol,
    )
