"""Truncated multivariate Taylor arithmetic.

A jet stores the Taylor coefficients c_alpha = d^alpha f(x0) / alpha! of a
scalar function at a base point, densely over all multi-indices |alpha| <= R
in graded lexicographic order.  Storing coefficients (rather than raw
derivatives) turns truncated multiplication into a plain multi-index
convolution.

Coefficient arrays may carry leading batch axes: a jet with ``coeffs`` of
shape ``(B, ncoeffs)`` represents B jets at B base points, and every
operation broadcasts over the batch.  All operations are pure; jets are
treated as immutable values.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, DomainError, OrderUnderflow

#: analytic functions accepted by :func:`jet_compose`
COMPOSABLE = (
    "sin", "cos", "tan", "exp", "log", "sqrt",
    "sinh", "cosh", "tanh", "atan", "reciprocal",
)

_FACT = [math.factorial(k) for k in range(40)]


def _multi_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    idx = [()]
    for _ in range(dim):
        idx = [t + (k,) for t in idx for k in range(order + 1)]
    idx = [t for t in idx if sum(t) <= order]
    idx.sort(key=lambda t: (sum(t), t))
    return idx


class JetSpace:
    """Index tables for one (dim, order) coefficient layout, built once."""

    def __init__(self, dim: int, order: int):
        self.dim = dim
        self.order = order
        self.indices = _multi_indices(dim, order)
        self.ncoeffs = len(self.indices)
        self.position = {a: p for p, a in enumerate(self.indices)}
        # graded order => truncation to order r is a prefix slice
        self.ncoeffs_at = [
            sum(1 for a in self.indices if sum(a) <= r) for r in range(order + 1)
        ]
        self._shift_tables: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._build_mul_table()
        self._build_partial_tables()

    def _build_mul_table(self):
        terms = []
        for pa, a in enumerate(self.indices):
            for pb, b in enumerate(self.indices):
                if sum(a) + sum(b) <= self.order:
                    c = tuple(x + y for x, y in zip(a, b))
                    terms.append((self.position[c], pa, pb))
        terms.sort()
        pc = np.array([t[0] for t in terms])
        self.mul_ia = np.array([t[1] for t in terms])
        self.mul_ib = np.array([t[2] for t in terms])
        # first position of each result index; every index occurs (pair with 0)
        self.mul_starts = np.searchsorted(pc, np.arange(self.ncoeffs))

    def _build_partial_tables(self):
        self.partial_src = []
        self.partial_fac = []
        if self.order == 0:
            return
        lower = _multi_indices(self.dim, self.order - 1)
        for axis in range(self.dim):
            src = np.empty(len(lower), dtype=np.intp)
            fac = np.empty(len(lower))
            for p, a in enumerate(lower):
                up = a[:axis] + (a[axis] + 1,) + a[axis + 1:]
                src[p] = self.position[up]
                fac[p] = a[axis] + 1
            self.partial_src.append(src)
            self.partial_fac.append(fac)

    def shift_table(self, p: int):
        """(dst, src) index arrays with dst = position(alpha + beta_src)."""
        cached = self._shift_tables.get(p)
        if cached is None:
            alpha = self.indices[p]
            budget = self.order - sum(alpha)
            dst, src = [], []
            for q, beta in enumerate(self.indices):
                if sum(beta) > budget:
                    break  # graded order: all later indices have higher degree
                dst.append(self.position[tuple(x + y for x, y in zip(alpha, beta))])
                src.append(q)
            cached = (np.array(dst, dtype=np.intp), np.array(src, dtype=np.intp))
            self._shift_tables[p] = cached
        return cached


@lru_cache(maxsize=None)
def jet_space(dim: int, order: int) -> JetSpace:
    if dim < 1 or order < 0:
        raise ValueError(f"invalid jet space ({dim}, {order})")
    return JetSpace(dim, order)


class Jet:
    __slots__ = ("dim", "order", "coeffs")

    def __init__(self, dim: int, order: int, coeffs: np.ndarray):
        self.dim = dim
        self.order = order
        self.coeffs = coeffs

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    def constant_term(self):
        return self.coeffs[..., 0]

    def coefficient(self, alpha: tuple[int, ...]):
        """Taylor coefficient at multi-index ``alpha`` (= d^alpha f / alpha!)."""
        return self.coeffs[..., jet_space(self.dim, self.order).position[tuple(alpha)]]

    def truncated(self, order: int) -> "Jet":
        if order > self.order:
            raise DimensionMismatch(
                f"cannot extend a jet of order {self.order} to order {order}"
            )
        if order == self.order:
            return self
        n = jet_space(self.dim, self.order).ncoeffs_at[order]
        return Jet(self.dim, order, self.coeffs[..., :n])

    def __add__(self, other):
        return jet_add(self, _coerce(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return jet_add(self, -_coerce(other, self))

    def __rsub__(self, other):
        return jet_add(-self, _coerce(other, self))

    def __neg__(self):
        return Jet(self.dim, self.order, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        out = self.coeffs * other
        return Jet(self.dim, self.order, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, jet_compose("reciprocal", other))
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return jet_compose("reciprocal", self) * other

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, coeffs={self.coeffs!r})"


def _coerce(value, template: Jet) -> Jet:
    if isinstance(value, Jet):
        return value
    return jet_constant(template.dim, template.order, value)


def jet_constant(dim: int, order: int, value) -> Jet:
    value = np.asarray(value, dtype=float)
    coeffs = np.zeros(value.shape + (jet_space(dim, order).ncoeffs,))
    coeffs[..., 0] = value
    return Jet(dim, order, coeffs)


def jet_variable(dim: int, order: int, axis: int, value) -> Jet:
    """Jet of the coordinate function x_axis at base value ``value``."""
    if not 0 <= axis < dim:
        raise DimensionMismatch(f"axis {axis} out of range for dim {dim}")
    out = jet_constant(dim, order, value)
    if order >= 1:
        e = tuple(1 if i == axis else 0 for i in range(dim))
        out.coeffs[..., jet_space(dim, order).position[e]] = 1.0
    return out


def _check_compatible(a: Jet, b: Jet):
    if a.dim != b.dim or a.order != b.order:
        raise DimensionMismatch(
            f"jet operands differ: (dim {a.dim}, order {a.order}) vs "
            f"(dim {b.dim}, order {b.order})"
        )


def jet_add(a: Jet, b: Jet) -> Jet:
    _check_compatible(a, b)
    return Jet(a.dim, a.order, a.coeffs + b.coeffs)


def _sparse_positions(coeffs: np.ndarray) -> np.ndarray:
    """Coefficient positions that are nonzero for at least one batch element."""
    if coeffs.ndim == 1:
        return np.nonzero(coeffs)[0]
    return np.nonzero(np.any(coeffs != 0.0, axis=tuple(range(coeffs.ndim - 1))))[0]


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Truncated product: c_gamma = sum over alpha+beta=gamma of a_alpha b_beta.

    When one operand has few nonzero coefficient positions (frame entries are
    typically sparse polynomials) the product is accumulated as a handful of
    shifted copies of the other operand instead of the dense convolution.
    """
    _check_compatible(a, b)
    sp = jet_space(a.dim, a.order)
    nz_a = _sparse_positions(a.coeffs)
    nz_b = _sparse_positions(b.coeffs)
    small, big, nz = (a, b, nz_a) if len(nz_a) <= len(nz_b) else (b, a, nz_b)
    if len(nz) * sp.ncoeffs < len(sp.mul_ia):
        shape = np.broadcast_shapes(a.coeffs.shape[:-1], b.coeffs.shape[:-1])
        out = np.zeros(shape + (sp.ncoeffs,))
        for p in nz:
            dst, src = sp.shift_table(int(p))
            out[..., dst] += small.coeffs[..., p, None] * big.coeffs[..., src]
        return Jet(a.dim, a.order, out)
    prod = a.coeffs[..., sp.mul_ia] * b.coeffs[..., sp.mul_ib]
    out = np.add.reduceat(prod, sp.mul_starts, axis=-1)
    return Jet(a.dim, a.order, out)


def jet_partial(a: Jet, axis: int) -> Jet:
    """Order-(R-1) jet of df/dx_axis: coefficient at alpha is (alpha_axis+1) c_{alpha+e}."""
    if a.order == 0:
        raise OrderUnderflow("cannot differentiate an order-0 jet")
    if not 0 <= axis < a.dim:
        raise DimensionMismatch(f"axis {axis} out of range for dim {a.dim}")
    sp = jet_space(a.dim, a.order)
    out = a.coeffs[..., sp.partial_src[axis]] * sp.partial_fac[axis]
    return Jet(a.dim, a.order - 1, out)


def jet_pow_int(a: Jet, n: int) -> Jet:
    """Integer power by repeated squaring (valid for any sign of the base)."""
    if n < 0:
        return jet_pow_int(jet_compose("reciprocal", a), -n)
    result = jet_constant(a.dim, a.order, np.ones(a.batch_shape))
    base = a
    while n:
        if n & 1:
            result = jet_mul(result, base)
        base_needed = n > 1
        if base_needed:
            base = jet_mul(base, base)
        n >>= 1
    return result


def jet_compose(g: str, a: Jet, strict: bool = True) -> Jet:
    """Truncated composition g(a) for an analytic g from COMPOSABLE.

    Horner evaluation of g's univariate Taylor polynomial at (a - constant
    term); exact on the truncation because (a - c0) has valuation >= 1.
    With ``strict`` false, out-of-domain batch entries yield NaN coefficients
    instead of raising.
    """
    if g not in COMPOSABLE:
        raise DomainError(f"no composition rule for '{g}'")
    series = _univariate_series(g, a.constant_term(), a.order, strict)
    tilde = Jet(a.dim, a.order, a.coeffs.copy())
    tilde.coeffs[..., 0] = 0.0
    out = jet_constant(a.dim, a.order, series[a.order])
    for k in range(a.order - 1, -1, -1):
        out = jet_mul(out, tilde)
        out.coeffs[..., 0] += series[k]
    return out


def _univariate_series(g: str, c0: np.ndarray, order: int, strict: bool):
    """Taylor coefficients [g(c0), g'(c0), g''(c0)/2, ...] up to ``order``.

    Returns an array of shape (order+1,) + c0.shape.
    """
    c0 = np.asarray(c0, dtype=float)
    ks = np.arange(order + 1).reshape((order + 1,) + (1,) * c0.ndim)
    if g == "exp":
        return np.exp(c0) / _fact_col(order, c0.ndim)
    if g == "sin":
        return np.sin(c0 + ks * (np.pi / 2)) / _fact_col(order, c0.ndim)
    if g == "cos":
        return np.cos(c0 + ks * (np.pi / 2)) / _fact_col(order, c0.ndim)
    if g == "sinh":
        pair = np.stack([np.sinh(c0), np.cosh(c0)])
        return pair[ks % 2].reshape(ks.shape[:1] + c0.shape) / _fact_col(order, c0.ndim)
    if g == "cosh":
        pair = np.stack([np.cosh(c0), np.sinh(c0)])
        return pair[ks % 2].reshape(ks.shape[:1] + c0.shape) / _fact_col(order, c0.ndim)
    if g == "log":
        _domain_check(c0 > 0, "log of non-positive constant part", strict)
        out = np.empty((order + 1,) + c0.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[0] = np.where(c0 > 0, np.log(np.where(c0 > 0, c0, 1.0)), np.nan)
            for k in range(1, order + 1):
                out[k] = np.where(c0 > 0, (-1.0) ** (k - 1) / (k * c0**k), np.nan)
        return out
    if g == "sqrt":
        _domain_check(c0 > 0, "sqrt of non-positive constant part", strict)
        out = np.empty((order + 1,) + c0.shape)
        with np.errstate(invalid="ignore", divide="ignore"):
            safe = np.where(c0 > 0, c0, 1.0)
            coef = 1.0
            for k in range(order + 1):
                out[k] = np.where(c0 > 0, coef * safe ** (0.5 - k), np.nan)
                coef *= (0.5 - k) / (k + 1)
        return out
    if g == "reciprocal":
        _domain_check(c0 != 0, "division by jet with zero constant part", strict)
        out = np.empty((order + 1,) + c0.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(c0 != 0, c0, 1.0)
            for k in range(order + 1):
                out[k] = np.where(c0 != 0, (-1.0) ** k / safe ** (k + 1), np.nan)
        return out
    if g == "tan":
        cos_c = np.cos(c0)
        _domain_check(np.abs(cos_c) > 1e-300, "tan at a pole", strict)
        return _series_divide(
            _univariate_series("sin", c0, order, strict),
            _univariate_series("cos", c0, order, strict),
        )
    if g == "tanh":
        return _series_divide(
            _univariate_series("sinh", c0, order, strict),
            _univariate_series("cosh", c0, order, strict),
        )
    if g == "atan":
        # integrate the series of 1/(1 + (c0+h)^2)
        out = np.empty((order + 1,) + c0.shape)
        out[0] = np.arctan(c0)
        if order >= 1:
            q0, q1, q2 = 1.0 + c0 * c0, 2.0 * c0, np.ones_like(c0)
            r = np.empty((order,) + c0.shape)
            r[0] = 1.0 / q0
            for k in range(1, order):
                acc = q1 * r[k - 1]
                if k >= 2:
                    acc = acc + q2 * r[k - 2]
                r[k] = -acc / q0
            for k in range(1, order + 1):
                out[k] = r[k - 1] / k
        return out
    raise DomainError(f"no composition rule for '{g}'")  # pragma: no cover


def _fact_col(order: int, extra_ndim: int) -> np.ndarray:
    f = np.array([_FACT[k] for k in range(order + 1)], dtype=float)
    return f.reshape((order + 1,) + (1,) * extra_ndim)


def _domain_check(ok: np.ndarray, message: str, strict: bool):
    if strict and not np.all(ok):
        raise DomainError(message)


def _series_divide(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Coefficientwise univariate series quotient t with t*w = u."""
    t = np.empty_like(u)
    t[0] = u[0] / w[0]
    for k in range(1, u.shape[0]):
        acc = u[k].copy()
        for j in range(k):
            acc -= t[j] * w[k - j]
        t[k] = acc / w[0]
    return t
