"""Frame geometry: structure functions, curvature, and its frame derivatives.

A frame specification holds n vector fields on an n-dimensional box, given
componentwise as expressions, together with optional scalar observables the
symmetries must preserve.  The fields are required to stay linearly
independent over the box (a global frame).

Conventions fixed here and relied on everywhere downstream:

* ``frame[i][m]`` is the m-th coordinate component of field X_i.
* Structure functions satisfy [X_i, X_j] = sum_k gamma_ijk X_k.
* The curvature block is K[(i,j), k] = -gamma_ijk.
* A derivative block of order s is indexed (pair, target, i_1, ..., i_s) with
  the FIRST derivative slot i_1 the OUTERMOST derivative:
  W_s(e_{i1} (x) ... (x) e_{is}) = (X_{i1}. ... .X_{is}. K).  This is the only
  ordering for which contracting the first slot commutes with transport along
  the contracted direction.

All computations are pure per-point evaluations; points may be batched along
leading axes and everything broadcasts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateFrame, DimensionMismatch, OrderOverflow
from .expressions import Expr, differentiate, eval_jet, evaluate, parse
from .jets import Jet, jet_mul, jet_partial


@dataclass(frozen=True)
class FrameSpec:
    """Immutable description of the geometry under analysis."""

    coords: tuple[str, ...]
    frame: tuple[tuple[Expr, ...], ...]
    observables: tuple[Expr, ...] = ()
    domain_box: tuple[tuple[float, float], ...] = ()
    degeneracy_tol: float = 1e-10
    max_jet_order: int | None = None

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def jet_budget(self) -> int:
        return self.max_jet_order if self.max_jet_order is not None else self.n + 3

    @property
    def box(self) -> np.ndarray:
        return np.asarray(self.domain_box, dtype=float)

    @classmethod
    def from_strings(cls, coords, frame, observables=(), box=None,
                     degeneracy_tol: float = 1e-10, max_jet_order: int | None = None):
        coords = tuple(coords)
        n = len(coords)
        if len(frame) != n or any(len(row) != n for row in frame):
            raise DimensionMismatch(
                f"frame must be {n}x{n} to match {n} coordinates"
            )
        parsed = tuple(tuple(parse(entry, coords) for entry in row) for row in frame)
        obs = tuple(parse(entry, coords) for entry in observables)
        if box is None:
            box = [(-4.0, 4.0)] * n
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box) != n:
            raise DimensionMismatch(f"domain box needs {n} intervals")
        return cls(coords, parsed, obs, box, degeneracy_tol, max_jet_order)

    def contains(self, points) -> np.ndarray:
        """Elementwise test that points lie inside the domain box."""
        points = np.asarray(points, dtype=float)
        lo = self.box[:, 0]
        hi = self.box[:, 1]
        return np.all((points >= lo) & (points <= hi), axis=-1)

    def frame_values(self, points) -> np.ndarray:
        """Frame matrix F with F[..., i, m] = m-th component of X_i at the point."""
        points = np.asarray(points, dtype=float)
        rows = [[evaluate(e, points) for e in row] for row in self.frame]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]


# ------------------------------------------------------------ jet matrices

def _const_matmul(mat: np.ndarray, a: Jet) -> Jet:
    return Jet(a.dim, a.order, np.einsum("...ab,...bck->...ack", mat, a.coeffs))


def jet_matrix_solve(m: Jet, rhs: Jet, ok: np.ndarray) -> Jet:
    """Solve M x = rhs for jet matrices by Neumann recursion.

    ``m`` has coefficients (..., n, n, C) and ``rhs`` (..., V, n, C); the
    result matches rhs.  Writing M = M0 (I + N) with N carrying no constant
    term, x = (sum over k of (-N)^k) M0^{-1} rhs; the series truncates at the
    jet order because N raises the grading.  ``ok`` masks batch entries with
    invertible constant part; the rest come back NaN.
    """
    m0 = m.coeffs[..., 0]
    n = m0.shape[-1]
    safe = np.where(ok[..., None, None], m0, np.eye(n))
    inv0 = np.linalg.inv(safe)
    tail = Jet(m.dim, m.order, m.coeffs.copy())
    tail.coeffs[..., 0] = 0.0
    nil = _const_matmul(inv0, tail)                      # (..., n, n, C)
    y = Jet(m.dim, m.order,
            np.einsum("...km,...vmc->...vkc", inv0, rhs.coeffs))
    total = y
    term = y
    nil_exp = Jet(m.dim, m.order, -nil.coeffs[..., None, :, :, :])
    for _ in range(m.order):
        prod = jet_mul(nil_exp, Jet(m.dim, m.order, term.coeffs[..., None, :, :]))
        term = Jet(m.dim, m.order, prod.coeffs.sum(axis=-2))
        total = total + term
    if not np.all(ok):
        total.coeffs[~ok] = np.nan
    return total


# ------------------------------------------------------- structure functions

@dataclass(frozen=True)
class StructureTensor:
    """Structure functions gamma_ijk at a point, with jets to a given order.

    ``gamma`` holds one jet per (pair, k) with coefficient array shape
    (..., npairs, n, ncoeffs); pair p = pairs[p] enumerates i < j and the
    antisymmetric extension is gamma_jik = -gamma_ijk.
    """

    point: np.ndarray
    order: int
    pairs: tuple[tuple[int, int], ...]
    gamma: Jet
    valid: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.gamma.coeffs.shape[-2]

    def values(self) -> np.ndarray:
        """gamma_ijk over pairs i<j, shape (..., npairs, n)."""
        return self.gamma.constant_term()

    def full(self) -> np.ndarray:
        """Antisymmetric extension, shape (..., n, n, n) indexed [i, j, k]."""
        vals = self.values()
        n = self.n
        out = np.zeros(vals.shape[:-2] + (n, n, n))
        for p, (i, j) in enumerate(self.pairs):
            out[..., i, j, :] = vals[..., p, :]
            out[..., j, i, :] = -vals[..., p, :]
        return out

    def value(self, i: int, j: int, k: int) -> np.ndarray:
        if i == j:
            return np.zeros(self.gamma.batch_shape[:-2])
        sign = 1.0 if i < j else -1.0
        p = self.pairs.index((min(i, j), max(i, j)))
        return sign * self.values()[..., p, k]


def _frame_degeneracy(spec: FrameSpec, f_values: np.ndarray) -> np.ndarray:
    """True where the frame matrix is acceptably far from singular."""
    det = np.linalg.det(f_values)
    scale = np.abs(f_values).max(axis=(-2, -1))
    finite = np.isfinite(f_values).all(axis=(-2, -1))
    return finite & (np.abs(det) > spec.degeneracy_tol * np.maximum(scale, 1e-300) ** spec.n)


def _frame_jets(spec: FrameSpec, points: np.ndarray, order: int, strict: bool) -> Jet:
    rows = []
    for row in spec.frame:
        rows.append([eval_jet(e, points, order, strict) for e in row])
    coeffs = np.stack(
        [np.stack([j.coeffs for j in row], axis=-2) for row in rows], axis=-3
    )
    return Jet(spec.n, order, coeffs)


def structure_functions(spec: FrameSpec, x, jet_order: int = 0,
                        strict: bool = True) -> StructureTensor:
    """Structure functions at ``x`` with jets to order ``jet_order``.

    The coordinate bracket components are assembled from jets of the frame
    entries, then gamma solves F . gamma = bracket as a jet-valued linear
    system (constant part inverted numerically once, higher orders by the
    Neumann recursion).
    """
    if jet_order + 1 > spec.jet_budget:
        raise OrderOverflow(
            f"structure functions at jet order {jet_order} need expression jets "
            f"of order {jet_order + 1} > budget {spec.jet_budget}"
        )
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise DimensionMismatch(f"point has dimension {x.shape[-1]}, frame has {spec.n}")
    f_hi = _frame_jets(spec, x, jet_order + 1, strict)
    f_lo = f_hi.truncated(jet_order)
    ok = _frame_degeneracy(spec, f_lo.coeffs[..., 0])
    if strict and not np.all(ok):
        flat = int(np.flatnonzero(~np.atleast_1d(ok).ravel())[0])
        pt = x.reshape(-1, spec.n)[flat]
        det = np.linalg.det(f_lo.coeffs[..., 0].reshape(-1, spec.n, spec.n)[flat])
        raise DegenerateFrame(pt, det)

    n = spec.n
    pairs = tuple(spec.pairs())
    # bracket^m = sum_p F_i^p d_p F_j^m - F_j^p d_p F_i^m, one jet per (pair, m)
    dF = [jet_partial(f_hi, p) for p in range(n)]  # each (..., i, m, C_lo)
    bracket = np.zeros(f_lo.coeffs.shape[:-3] + (len(pairs), n) + f_lo.coeffs.shape[-1:])
    bracket_jet = Jet(n, jet_order, bracket)
    for pidx, (i, j) in enumerate(pairs):
        acc = None
        for p in range(n):
            fi_p = Jet(n, jet_order, f_lo.coeffs[..., i, p, :])
            fj_p = Jet(n, jet_order, f_lo.coeffs[..., j, p, :])
            dj = Jet(n, jet_order, dF[p].coeffs[..., j, :, :])  # d_p F_j^m over m
            di = Jet(n, jet_order, dF[p].coeffs[..., i, :, :])
            term = jet_mul(Jet(n, jet_order, fi_p.coeffs[..., None, :]), dj) \
                - jet_mul(Jet(n, jet_order, fj_p.coeffs[..., None, :]), di)
            acc = term if acc is None else acc + term
        bracket_jet.coeffs[..., pidx, :, :] = acc.coeffs

    # solve F(x) gamma = bracket with F as the matrix of column fields
    fmat = Jet(n, jet_order, np.swapaxes(f_lo.coeffs, -3, -2))
    gamma = jet_matrix_solve(fmat, bracket_jet, ok)
    return StructureTensor(x, jet_order, pairs, gamma, ok)


# ------------------------------------------------- fast order-0 evaluation

@lru_cache(maxsize=64)
def _frame_derivative_exprs(spec: FrameSpec):
    """Symbolic partials d_p F_i^m, cached per spec (ODE inner-loop path)."""
    n = spec.n
    return tuple(
        tuple(tuple(differentiate(spec.frame[i][m], p) for m in range(n))
              for i in range(n))
        for p in range(n)
    )


def structure_values(spec: FrameSpec, x):
    """Pointwise (frame matrix, full antisymmetric gamma) without jets.

    Uses symbolic partial derivatives of the frame entries, so a single
    evaluation serves both the flow velocity and the transport right-hand
    side.  Returns (F, gamma) with F[..., i, m] and gamma[..., i, j, k].
    """
    x = np.asarray(x, dtype=float)
    n = spec.n
    f = spec.frame_values(x)
    dexprs = _frame_derivative_exprs(spec)
    df = np.stack(
        [np.stack([np.stack([evaluate(dexprs[p][i][m], x) for m in range(n)], axis=-1)
                   for i in range(n)], axis=-2)
         for p in range(n)], axis=-3,
    )  # (..., p, i, m)
    # bracket[i, j, m] = sum_p F_i^p d_p F_j^m - F_j^p d_p F_i^m
    fd = np.einsum("...ip,...pjm->...ijm", f, df)
    bracket = fd - np.swapaxes(fd, -3, -2)
    # solve F(x) gamma_ij = bracket_ij with column-field matrix M[m, k] = F_k^m
    m = np.swapaxes(f, -2, -1)
    rhs = bracket.reshape(bracket.shape[:-3] + (n * n, n))
    rhs = np.swapaxes(rhs, -2, -1)  # (..., m, i*j)
    try:
        gamma = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFrame(np.atleast_2d(x.reshape(-1, n))[0]) from exc
    gamma = np.swapaxes(gamma, -2, -1).reshape(bracket.shape[:-3] + (n, n, n))
    return f, gamma


# ------------------------------------------------------- curvature and D^r K

@dataclass(frozen=True)
class DerivedCurvature:
    """The curvature block and its iterated frame derivatives at a point.

    ``blocks[s]`` has shape (..., npairs, n) + (n,)*s; the axis right after
    the target axis is the outermost derivative slot.  ``phi_blocks`` mirror
    the layout for observables, shape (..., nobs) + (n,)*s.
    """

    point: np.ndarray
    order: int
    pairs: tuple[tuple[int, int], ...]
    blocks: tuple[np.ndarray, ...]
    phi_blocks: tuple[np.ndarray, ...] | None = None
    valid: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.blocks[0].shape[-1]

    def block(self, s: int) -> np.ndarray:
        return self.blocks[s]

    def feature_vector(self) -> np.ndarray:
        """All blocks flattened in a fixed order, shape (..., nfeatures)."""
        batch = self.blocks[0].shape[:-2]
        parts = [b.reshape(batch + (-1,)) for b in self.blocks]
        if self.phi_blocks is not None:
            parts += [b.reshape(batch + (-1,)) for b in self.phi_blocks]
        return np.concatenate(parts, axis=-1)


def _iterated_frame_derivatives(base: Jet, f_jets: Jet, r: int, value_axes: int):
    """Blocks of iterated derivatives (X_i . f) of a jet-valued field.

    ``base`` has coefficient shape (..., <value axes>, C); each level
    multiplies by the frame entry jets and differentiates, inserting the new
    (outermost) derivative axis right after the value axes.
    """
    n = base.dim
    blocks = [base.coeffs[..., 0]]
    cur = base
    for s in range(1, r + 1):
        order = cur.order - 1
        parts = [jet_partial(cur, p) for p in range(n)]
        f_tr = f_jets.truncated(order)
        per_direction = []
        for i in range(n):
            acc = None
            for p in range(n):
                fip = f_tr.coeffs[..., i, p, :]
                fip = fip.reshape(fip.shape[:-1] + (1,) * (value_axes + s - 1) + fip.shape[-1:])
                term = jet_mul(Jet(n, order, fip), parts[p])
                acc = term if acc is None else acc + term
            per_direction.append(acc.coeffs)
        stacked = np.stack(per_direction, axis=-(s + 1))
        cur = Jet(n, order, stacked)
        blocks.append(cur.coeffs[..., 0])
    return blocks


def derived_curvature(spec: FrameSpec, x, r: int, strict: bool = True) -> DerivedCurvature:
    """Curvature and its first ``r`` frame derivatives (plus observable blocks)."""
    if r < 0:
        raise OrderOverflow("derivative order must be nonnegative")
    if r + 1 > spec.jet_budget:
        raise OrderOverflow(
            f"derivative order {r} exceeds the jet budget {spec.jet_budget} "
            f"(needs expression jets of order {r + 1})"
        )
    x = np.asarray(x, dtype=float)
    st = structure_functions(spec, x, jet_order=r, strict=strict)
    k_jet = Jet(spec.n, r, -st.gamma.coeffs)
    f_jets = _frame_jets(spec, x, r, strict)
    blocks = _iterated_frame_derivatives(k_jet, f_jets, r, value_axes=2)
    phi_blocks = None
    if spec.observables:
        obs = np.stack(
            [eval_jet(e, x, r, strict).coeffs for e in spec.observables], axis=-2
        )
        phi_blocks = tuple(
            _iterated_frame_derivatives(Jet(spec.n, r, obs), f_jets, r, value_axes=1)
        )
    return DerivedCurvature(x, r, st.pairs, tuple(blocks), phi_blocks, st.valid)


def curvature(spec: FrameSpec, x, strict: bool = True) -> DerivedCurvature:
    """Order-0 curvature: K[(i,j), k] = -gamma_ijk."""
    return derived_curvature(spec, x, 0, strict)
