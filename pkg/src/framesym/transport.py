"""Transport of Killing generators and constructive Killing fields.

A candidate Killing field with frame components u satisfies, along every
frame direction i, the linear constraint (X_i.u_k) + sum_j u_j gamma_ijk = 0.
Transporting a generator therefore means co-integrating

    dx/dt = sum_i X_i F_i(x),        du_k/dt = -sum_{i,j} X_i u_j gamma_ijk(x)

along a fixed direction X of frame components.  Starting from a generator of
stabilised order inside the integrability domain, the transported u stays a
generator (checked numerically by :func:`verify_transport_invariance`), the
transport is path independent, and radial transport in all directions
produces a local Killing field (checked by :func:`verify_killing`).

Integration is classical fixed-step RK4: deterministic and reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainExit,
    GeneratorResidualWarning,
    InsufficientSamples,
    PreconditionViolated,
)
from .filtration import (
    DEFAULT_RANK_TOL,
    contract,
    contraction_matrix,
    generator_residual,
    killing_dims,
    killing_spaces,
)
from .frames import FrameSpec, derived_curvature, structure_values, _frame_jets
from .jets import jet_partial


def _check_inside(spec: FrameSpec, points: np.ndarray, t: float):
    # hairline margin so trajectories ending exactly on the box face survive
    # the accumulated rounding of the integrator
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    slack = 1e-9 * (hi - lo)
    points = np.asarray(points)
    inside = np.all((points >= lo - slack) & (points <= hi + slack), axis=-1)
    if not np.all(inside):
        bad = np.atleast_2d(points)[~np.atleast_1d(inside)][0]
        raise DomainExit(t, bad)


# ------------------------------------------------------------------- flows

@dataclass(frozen=True)
class FlowPath:
    times: np.ndarray    # (N+1,)
    points: np.ndarray   # (N+1, ..., n)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]


def flow(spec: FrameSpec, x0, direction, total_time: float, step: float) -> FlowPath:
    """Integrate dx/dt = sum_i X_i (field i)(x) with fixed-step RK4.

    ``direction`` holds constant frame components; the endpoint is the
    exponential of ``total_time * direction`` at x0.  Every step checks the
    domain box and raises DomainExit on leaving it.
    """
    x = np.asarray(x0, dtype=float).copy()
    direction = np.asarray(direction, dtype=float)
    nsteps = max(1, math.ceil(abs(total_time) / abs(step)))
    dt = total_time / nsteps
    _check_inside(spec, x, 0.0)

    def velocity(pts):
        f = spec.frame_values(pts)
        return np.einsum("...i,...im->...m", np.broadcast_to(direction, pts.shape), f)

    times = np.empty(nsteps + 1)
    points = np.empty((nsteps + 1,) + x.shape)
    times[0], points[0] = 0.0, x
    for k in range(nsteps):
        k1 = velocity(x)
        k2 = velocity(x + 0.5 * dt * k1)
        k3 = velocity(x + 0.5 * dt * k2)
        k4 = velocity(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * dt
        _check_inside(spec, x, t)
        times[k + 1], points[k + 1] = t, x
    return FlowPath(times, points)


# ------------------------------------------------------ generator transport

@dataclass(frozen=True)
class TransportPath:
    times: np.ndarray        # (N+1,)
    points: np.ndarray       # (N+1, ..., n)
    generators: np.ndarray   # (N+1, ..., n) frame components u(t)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    @property
    def end_generator(self) -> np.ndarray:
        return self.generators[-1]


def _transport_rhs(spec: FrameSpec, x, u, direction):
    f, gamma = structure_values(spec, x)
    dx = np.einsum("...i,...im->...m", np.broadcast_to(direction, x.shape), f)
    du = -np.einsum("...i,...j,...ijk->...k",
                    np.broadcast_to(direction, x.shape), u, gamma)
    return dx, du


def _integrate_transport(spec: FrameSpec, x0, u0, direction, total_time, nsteps: int):
    x = np.asarray(x0, dtype=float).copy()
    u = np.asarray(u0, dtype=float).copy()
    direction = np.asarray(direction, dtype=float)
    total_time = np.asarray(total_time, dtype=float)
    dt = total_time / nsteps
    dts = dt[..., None] if dt.ndim else dt
    _check_inside(spec, x, 0.0)
    times = np.empty(nsteps + 1)
    points = np.empty((nsteps + 1,) + x.shape)
    gens = np.empty((nsteps + 1,) + u.shape)
    times[0], points[0], gens[0] = 0.0, x, u
    for k in range(nsteps):
        ax1, au1 = _transport_rhs(spec, x, u, direction)
        ax2, au2 = _transport_rhs(spec, x + 0.5 * dts * ax1, u + 0.5 * dts * au1, direction)
        ax3, au3 = _transport_rhs(spec, x + 0.5 * dts * ax2, u + 0.5 * dts * au2, direction)
        ax4, au4 = _transport_rhs(spec, x + dts * ax3, u + dts * au3, direction)
        x = x + (dts / 6.0) * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
        u = u + (dts / 6.0) * (au1 + 2.0 * au2 + 2.0 * au3 + au4)
        t = float(np.max(np.abs(dt))) * (k + 1)
        _check_inside(spec, x, t)
        times[k + 1], points[k + 1], gens[k + 1] = t, x, u
    return times, points, gens


def generator_membership_residual(spec: FrameSpec, x0, a, order: int | None = None):
    """Norm of the smallest-order nonzero contraction of ``a`` at x0.

    Returns (residual, order) with order = 0 when ``a`` is a generator at
    every probed order.
    """
    r_max = order if order is not None else spec.n + 1
    x0 = np.asarray(x0, dtype=float)
    dk = derived_curvature(spec, x0, r_max)
    for r in range(1, r_max + 1):
        res = float(generator_residual(dk, a, r))
        smax = float(np.linalg.norm(contraction_matrix(dk, r), 2))
        if res > DEFAULT_RANK_TOL * max(smax, 1.0) * 10.0:
            return res, r
    return 0.0, 0


def transport_generator(spec: FrameSpec, x0, a, direction, total_time: float,
                        step: float, transport_tol: float = 1e-7,
                        check: bool = True) -> TransportPath:
    """Co-integrate a point and a generator along a fixed frame direction.

    The generator ODE is the horizontal lift du_k/dt = -sum X_i u_j gamma_ijk;
    its solution is the pushforward of ``a`` under the flow, read in the frame
    trivialisation.  Warns (GeneratorResidualWarning) when ``a`` is not a
    top-order generator at x0 or when the transported generator drifts out of
    its stabilised kernel by more than ``transport_tol``.
    """
    a = np.asarray(a, dtype=float)
    s0 = None
    if check:
        res, bad_order = generator_membership_residual(spec, x0, a)
        if bad_order:
            warnings.warn(
                f"generator not in the order-{spec.n + 1} kernel at x0: "
                f"residual {res:.3e} at order {bad_order}",
                GeneratorResidualWarning, stacklevel=2,
            )
        else:
            s0 = killing_spaces(spec, np.asarray(x0, dtype=float)).stabilization_order
    nsteps = max(1, math.ceil(abs(total_time) / abs(step)))
    times, points, gens = _integrate_transport(spec, x0, a, direction, total_time, nsteps)
    times = np.sign(total_time) * times if total_time < 0 else times
    path = TransportPath(times, points, gens)
    if check and s0 is not None:
        idx = np.unique(np.linspace(0, nsteps, min(9, nsteps + 1)).astype(int))
        dk = derived_curvature(spec, points[idx], s0)
        mat = contraction_matrix(dk, s0)
        res = np.linalg.norm(
            np.einsum("...rn,...n->...r", mat, gens[idx]), axis=-1
        ).max()
        if res > transport_tol:
            warnings.warn(
                f"transported generator left its kernel: residual {res:.3e} "
                f"exceeds {transport_tol:.1e} (integrability domain violated?)",
                GeneratorResidualWarning, stacklevel=2,
            )
    return path


# -------------------------------------------------------- sampled fields

def direction_lattice(n: int, radius: float, per_axis: int) -> np.ndarray:
    """Cubic lattice of transport directions in generator space, lex order."""
    axes = [np.linspace(-radius, radius, per_axis) for _ in range(n)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


@dataclass(frozen=True)
class SampledKillingField:
    """A Killing field sampled on an exponential lattice around a base point.

    ``directions[k]`` was transported for unit time from (base_point, seed);
    ``points[k]`` is where it landed, ``frame_components[k]`` the generator
    there and ``coordinate_components[k]`` its pushforward to coordinates.
    """

    spec: FrameSpec
    base_point: np.ndarray
    seed: np.ndarray
    directions: np.ndarray
    points: np.ndarray
    frame_components: np.ndarray
    coordinate_components: np.ndarray
    step: float

    def sample_index(self, x, tol: float = 1e-9) -> int:
        d = np.linalg.norm(self.points - np.asarray(x, dtype=float), axis=-1)
        k = int(np.argmin(d))
        if d[k] > tol:
            raise InsufficientSamples(
                f"point {tuple(np.asarray(x, float))} is not a lattice sample "
                f"(nearest at distance {d[k]:.3e})"
            )
        return k


def killing_field(spec: FrameSpec, x0, a, directions, step: float = 1e-3,
                  check: bool = True) -> SampledKillingField:
    """Transport (x0, a) radially along every lattice direction for unit time.

    Evaluation is only ever radial from x0 (exponential coordinates); the
    leaf through (x0, a) is realised implicitly, never materialised.
    """
    x0 = np.asarray(x0, dtype=float)
    a = np.asarray(a, dtype=float)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if check:
        res, bad_order = generator_membership_residual(spec, x0, a)
        if bad_order:
            warnings.warn(
                f"seed is not an order-{spec.n + 1} generator at x0: residual "
                f"{res:.3e} at order {bad_order}; the sampled field will not be Killing",
                GeneratorResidualWarning, stacklevel=2,
            )
    speeds = np.linalg.norm(directions, axis=-1)
    nsteps = max(4, math.ceil(speeds.max() / step)) if speeds.max() > 0 else 4
    starts = np.broadcast_to(x0, directions.shape)
    seeds = np.broadcast_to(a, directions.shape)
    _, points, gens = _integrate_transport(
        spec, starts, seeds, directions, np.ones(len(directions)), nsteps
    )
    x_end, u_end = points[-1], gens[-1]
    f = spec.frame_values(x_end)
    v_end = np.einsum("...k,...km->...m", u_end, f)
    return SampledKillingField(spec, x0, a, directions, x_end, u_end, v_end, step)


# ------------------------------------------------------------ verification

def _exact_frame_partials(spec: FrameSpec, x):
    """(F values, dF[..., p, i, m] = d_p F_i^m) from order-1 jets."""
    fj = _frame_jets(spec, np.asarray(x, dtype=float), 1, strict=True)
    f = fj.coeffs[..., 0]
    df = np.stack([jet_partial(fj, p).coeffs[..., 0] for p in range(spec.n)], axis=-3)
    return f, df


def _commutator_residual(spec: FrameSpec, x, v, dv):
    """max_i |[field, X_i](x)| from the field's value v and Jacobian dv[p, m]."""
    f, df = _exact_frame_partials(spec, x)
    # [A, X_i]^m = sum_p (v^p d_p F_i^m - F_i^p d_p v^m)
    comm = np.einsum("...p,...pim->...im", v, df) - np.einsum("...ip,...pm->...im", f, dv)
    return float(np.linalg.norm(comm, axis=-1).max())


def verify_killing(spec: FrameSpec, field, x, fd_step: float = 1e-3) -> float:
    """Residual max_i |[field, X_i](x)| by central differences on the field.

    ``field`` is either a callable mapping points to coordinate components or
    a :class:`SampledKillingField`.  For a sampled field the stencil is built
    from the field's own transport (flow legs of length ``fd_step`` along each
    frame direction), which only ever evaluates the leaf radially; frame
    derivatives are exact (jets), so the estimate is O(fd_step^2) accurate.
    """
    x = np.asarray(x, dtype=float)
    if callable(field):
        n = spec.n
        offsets = fd_step * np.eye(n)
        vp = np.asarray(field(x + offsets), dtype=float)   # (p, m)
        vm = np.asarray(field(x - offsets), dtype=float)
        dv = (vp - vm) / (2.0 * fd_step)
        v = np.asarray(field(x), dtype=float)
        return _commutator_residual(spec, x, v, dv)
    if not isinstance(field, SampledKillingField):
        raise InsufficientSamples(
            "field must be a callable of coordinates or a SampledKillingField"
        )
    k = field.sample_index(x)
    u = field.frame_components[k]
    n = spec.n
    # frame-directional derivatives of u by short transport legs from (x, u)
    dirs = np.concatenate([np.eye(n), -np.eye(n)], axis=0)
    starts = np.broadcast_to(x, (2 * n, n)).copy()
    seeds = np.broadcast_to(u, (2 * n, n)).copy()
    _, _, gens = _integrate_transport(
        spec, starts, seeds, dirs, np.full(2 * n, fd_step), 8
    )
    du_frame = (gens[-1][:n] - gens[-1][n:]) / (2.0 * fd_step)   # (i, k)
    f, gamma = structure_values(spec, x)
    defect = du_frame + np.einsum("...j,...ijk->...ik", u, gamma)  # (i, k)
    comm = np.einsum("...ik,...km->...im", defect, f)
    return float(np.linalg.norm(comm, axis=-1).max())


def verify_transport_invariance(spec: FrameSpec, x0, a, direction,
                                total_time: float, step: float,
                                kernel_order: int | None = None,
                                rank_tol: float = DEFAULT_RANK_TOL,
                                n_checks: int = 17) -> float:
    """Max over the path of the order-s contraction norm of the transported u.

    Certifies numerically that transport preserves the order-s kernel.  The
    precondition that k_s and k_{s+1} are constant (and equal) along the path
    is checked at sampled path points; the check samples the path only, which
    under-approximates the neighbourhood constancy the statement assumes.
    """
    x0 = np.asarray(x0, dtype=float)
    s = kernel_order
    if s is None:
        s = killing_spaces(spec, x0, rank_tol=rank_tol).stabilization_order
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeneratorResidualWarning)
        path = transport_generator(spec, x0, a, direction, total_time, step, check=False)
    nsteps = len(path.times) - 1
    idx = np.unique(np.linspace(0, nsteps, min(n_checks, nsteps + 1)).astype(int))
    pts = path.points[idx]
    dims, valid = killing_dims(spec, pts, s + 1, rank_tol)
    if not valid.all():
        raise PreconditionViolated("kernel dimensions not computable along the path")
    if not (np.all(dims[:, s - 1] == dims[0, s - 1])
            and np.all(dims[:, s] == dims[0, s])
            and dims[0, s - 1] == dims[0, s]):
        raise PreconditionViolated(
            f"k_{s} and k_{s + 1} are not constant and equal along the path: "
            f"{[tuple(d) for d in dims[:, s - 1: s + 1]]}"
        )
    dk = derived_curvature(spec, pts, s)
    mat = contraction_matrix(dk, s)
    res = np.linalg.norm(np.einsum("...rn,...n->...r", mat, path.generators[idx]), axis=-1)
    return float(res.max())


def verify_transport_ode(spec: FrameSpec, x0, a, direction, order: int,
                         step: float, total_time: float = 0.5) -> float:
    """Defect of d/dt [D^r K . u(t)] = (D^{r+1} K . u(t)) . X along a transport.

    The time derivative of each contracted block is estimated by central
    differences at the integration step, so the defect must shrink as
    O(step^2); callers check the Richardson ratio between step and step/2.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeneratorResidualWarning)
        path = transport_generator(spec, x0, a, direction, total_time, step, check=False)
    pts, gens, times = path.points, path.generators, path.times
    dt = times[1] - times[0]
    dk = derived_curvature(spec, pts, order + 1)
    cu = contract(dk, gens)            # blocks s' = W_{s'+1} . u(t)
    cux = contract(cu, np.asarray(direction, dtype=float))
    defect = 0.0
    for s in range(1, order + 1):
        lhs_all = cu.blocks[s - 1]     # (N+1, ...) values of W_s . u(t)
        fd = (lhs_all[2:] - lhs_all[:-2]) / (2.0 * dt)
        rhs = cux.blocks[s - 1][1:-1]  # (W_{s+1} . u) . X at interior times
        defect = max(defect, float(np.abs(fd - rhs).max()))
    return defect
