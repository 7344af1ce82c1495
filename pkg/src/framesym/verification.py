"""Self-verification battery behind the ``verify`` subcommand.

Each check certifies one of the identities the construction rests on,
numerically and on the configured geometry: jet arithmetic identities,
bracket reconstruction, the derivative-block consistency, kernel facts,
transport invariance, the transport differential identity's convergence
order, and the constructed fields' commutator residuals.
"""

from __future__ import annotations

import warnings

import numpy as np

from .config import RunConfig
from .errors import DomainExit, GeneratorResidualWarning
from .filtration import (
    contraction_matrix,
    integrability_probe,
    killing_spaces,
)
from .frames import derived_curvature, structure_functions
from .jets import Jet, jet_compose, jet_mul, jet_partial, jet_space
from .orbits import classify_orbits, scan_grid, stratify
from .transport import (
    direction_lattice,
    flow,
    killing_field,
    verify_killing,
    verify_transport_invariance,
    verify_transport_ode,
)

Row = tuple[str, bool, str]


def _random_jet(rng, dim, order, positive=False) -> Jet:
    c = rng.uniform(0.1 if positive else -1.0, 1.0,
                    size=(jet_space(dim, order).ncoeffs,))
    if positive:
        c[0] = rng.uniform(0.5, 1.5)
    return Jet(dim, order, c)


def _check_jets(cfg: RunConfig, rng) -> list[Row]:
    dim = min(cfg.dim, 3)
    order = 4
    leib = chain = comm = mixed = 0.0
    for _ in range(25):
        a = _random_jet(rng, dim, order)
        b = _random_jet(rng, dim, order)
        ab = jet_mul(a, b)
        ba = jet_mul(b, a)
        comm = max(comm, float(np.abs(ab.coeffs - ba.coeffs).max()))
        for axis in range(dim):
            lhs = jet_partial(ab, axis)
            rhs = jet_mul(jet_partial(a, axis), b.truncated(order - 1)) \
                + jet_mul(a.truncated(order - 1), jet_partial(b, axis))
            leib = max(leib, float(np.abs(lhs.coeffs - rhs.coeffs).max()))
        p = _random_jet(rng, dim, order, positive=True)
        g = jet_compose("log", p)
        dg = jet_mul(jet_compose("reciprocal", p.truncated(order - 1)),
                     jet_partial(p, 0))
        chain = max(chain, float(np.abs(jet_partial(g, 0).coeffs - dg.coeffs).max()))
        m1 = jet_partial(jet_partial(a, 0), min(1, dim - 1))
        m2 = jet_partial(jet_partial(a, min(1, dim - 1)), 0)
        mixed = max(mixed, float(np.abs(m1.coeffs - m2.coeffs).max()))
    return [
        ("jet multiplication commutes", comm <= 1e-13, f"max dev {comm:.2e} <= 1e-13"),
        ("jet Leibniz rule", leib <= 1e-12, f"max dev {leib:.2e} <= 1e-12"),
        ("jet chain rule", chain <= 1e-10, f"max dev {chain:.2e} <= 1e-10"),
        ("mixed partials commute", mixed == 0.0, f"max dev {mixed:.2e} (exact)"),
    ]


def _fd_bracket(spec, x, h=1e-3) -> np.ndarray:
    """Coordinate brackets by 5-point finite differences of the frame entries."""
    n = spec.n
    x = np.asarray(x, dtype=float)
    df = np.empty((n, n, n))  # [p, i, m]
    for p in range(n):
        e = np.zeros(n)
        e[p] = 1.0
        f2, f1 = spec.frame_values(x + 2 * h * e), spec.frame_values(x + h * e)
        g1, g2 = spec.frame_values(x - h * e), spec.frame_values(x - 2 * h * e)
        df[p] = (-f2 + 8 * f1 - 8 * g1 + g2) / (12 * h)
    f = spec.frame_values(x)
    return np.einsum("ip,pjm->ijm", f, df) - np.einsum("jp,pim->ijm", f, df)


def _check_structure(cfg: RunConfig) -> list[Row]:
    spec = cfg.frame_spec()
    rows: list[Row] = []
    worst = 0.0
    anti = 0.0
    for x in cfg.samples[: min(5, len(cfg.samples))]:
        st = structure_functions(spec, np.asarray(x, dtype=float), 0)
        gamma = st.full()
        f = spec.frame_values(np.asarray(x, dtype=float))
        recon = np.einsum("ijk,km->ijm", gamma, f)
        fd = _fd_bracket(spec, x)
        scale = max(1.0, float(np.abs(fd).max()))
        worst = max(worst, float(np.abs(recon - fd).max()) / scale)
        anti = max(anti, float(np.abs(gamma + np.swapaxes(gamma, 0, 1)).max()))
    rows.append(("bracket reconstruction vs finite differences", worst <= 1e-8,
                 f"max rel dev {worst:.2e} <= 1e-8"))
    rows.append(("structure functions antisymmetric", anti == 0.0,
                 f"max dev {anti:.2e} (exact)"))
    if spec.n >= 3:
        jac = _jacobi_residual(cfg)
        rows.append(("Jacobi identity of the brackets", jac <= 1e-8,
                     f"max dev {jac:.2e} <= 1e-8"))
    return rows


def _jacobi_residual(cfg: RunConfig) -> float:
    spec = cfg.frame_spec()
    worst = 0.0
    for x in cfg.samples[: min(3, len(cfg.samples))]:
        x = np.asarray(x, dtype=float)
        st = structure_functions(spec, x, 1)
        gamma = st.full()
        # directional derivatives X_j . gamma_ab^p from the gamma jets
        n = spec.n
        f = spec.frame_values(x)
        grads = np.stack(
            [st.gamma.coefficient(tuple(1 if q == m else 0 for q in range(n)))
             for m in range(n)], axis=-1)  # (P, target p, direction m)
        full_grad = np.zeros((n, n, n, n))
        for pidx, (a, b) in enumerate(st.pairs):
            full_grad[a, b] = grads[pidx]
            full_grad[b, a] = -grads[pidx]
        dgam = np.einsum("jm,abpm->jabp", f, full_grad)
        # identity: sum_k (g_j1^k g_k2^p + g_2j^k g_k1^p + g_12^k g_kj^p)
        #         = X_j.g_12^p + X_1.g_2j^p + X_2.g_j1^p   for all j, p
        for j in range(n):
            lhs = (np.einsum("k,kp->p", gamma[j, 0], gamma[:, 1])
                   + np.einsum("k,kp->p", gamma[1, j], gamma[:, 0])
                   + np.einsum("k,kp->p", gamma[0, 1], gamma[:, j]))
            rhs = dgam[j, 0, 1] + dgam[0, 1, j] + dgam[1, j, 0]
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def _check_block_consistency(cfg: RunConfig) -> list[Row]:
    """W_{s+1}(e_i (x) xi) vs central differences of W_s along the flows."""
    spec = cfg.frame_spec()
    x0 = np.asarray(cfg.samples[0], dtype=float)
    h = 1e-4
    worst = 0.0
    dk = derived_curvature(spec, x0, 2)
    for s in (0, 1):
        for i in range(spec.n):
            e = np.zeros(spec.n)
            e[i] = 1.0
            xp = flow(spec, x0, e, h, h / 4).endpoint
            xm = flow(spec, x0, e, -h, h / 4).endpoint
            wp = derived_curvature(spec, xp, s).blocks[s]
            wm = derived_curvature(spec, xm, s).blocks[s]
            fd = (wp - wm) / (2 * h)
            exact = dk.blocks[s + 1][:, :, i]  # fix the outermost slot to e_i
            scale = max(1.0, float(np.abs(exact).max()))
            worst = max(worst, float(np.abs(fd - exact).max()) / scale)
    return [("derivative blocks match flow differences", worst <= 1e-5,
             f"max rel dev {worst:.2e} <= 1e-5")]


def _safe_time(spec, x0, direction, step, want=0.5) -> float | None:
    t = want
    for _ in range(6):
        try:
            flow(spec, x0, direction, t, step)
            return t
        except DomainExit:
            t /= 2.0
    return None


def _check_kernels(cfg: RunConfig) -> list[Row]:
    spec = cfg.frame_spec()
    rows: list[Row] = []
    mono_ok = True
    nest_worst = 0.0
    for x in cfg.samples:
        kf = killing_spaces(spec, np.asarray(x, dtype=float), rank_tol=cfg.rank_tol)
        if any(kf.dims[r] > kf.dims[r - 1] for r in range(1, len(kf.dims))):
            mono_ok = False
        dk = derived_curvature(spec, np.asarray(x, dtype=float), kf.max_order)
        for r in range(1, kf.max_order + 1):
            basis = kf.kernel(r)
            if basis.size == 0:
                continue
            mat = contraction_matrix(dk, r)
            res = np.linalg.norm(mat @ basis, axis=0).max()
            thresh = cfg.rank_tol * max(kf.sigma_max[r - 1], 1.0)
            nest_worst = max(nest_worst, float(res) / max(thresh, 1e-300))
    rows.append(("kernel dimensions monotone", mono_ok, "k_{r+1} <= k_r at all samples"))
    rows.append(("kernel bases annihilate their contractions", nest_worst <= 1.0,
                 f"worst residual/threshold ratio {nest_worst:.2f} <= 1"))
    return rows


def _first_good_sample(cfg: RunConfig):
    spec = cfg.frame_spec()
    for x in cfg.samples:
        pr = integrability_probe(spec, x, cfg.probe_radius, cfg.probe_count,
                                 cfg.rank_tol)
        if pr.in_domain:
            return np.asarray(x, dtype=float)
    return None


def _check_transport(cfg: RunConfig) -> list[Row]:
    spec = cfg.frame_spec()
    rows: list[Row] = []
    x0 = _first_good_sample(cfg)
    if x0 is None:
        detail = "no configured sample passes the integrability probe"
        return [("transport invariance", False, detail),
                ("transport identity converges at order 2", False, detail),
                ("constructed fields are Killing", False, detail)]
    kf = killing_spaces(spec, x0, rank_tol=cfg.rank_tol)
    s0 = kf.stabilization_order
    basis = kf.kernel(s0)
    e0 = np.zeros(spec.n)
    e0[0] = 1.0
    t_safe = _safe_time(spec, x0, e0, cfg.ode_step)
    if t_safe is None or basis.shape[1] == 0:
        rows.append(("transport invariance", False,
                     "no admissible direction or empty kernel"))
    else:
        res = verify_transport_invariance(
            spec, x0, basis[:, 0], e0, t_safe, cfg.ode_step,
            kernel_order=s0, rank_tol=cfg.rank_tol,
        )
        rows.append(("transport invariance", res <= cfg.transport_tol,
                     f"max |C^{s0}(u(t))| = {res:.2e} <= {cfg.transport_tol:g}"))

    if t_safe is not None:
        probe_vec = np.ones(spec.n) / np.sqrt(spec.n)
        d1 = verify_transport_ode(spec, x0, probe_vec, e0, 1, cfg.ode_step, t_safe)
        d2 = verify_transport_ode(spec, x0, probe_vec, e0, 1, cfg.ode_step / 2, t_safe)
        if d1 <= 1e-12 and d2 <= 1e-12:
            rows.append(("transport identity converges at order 2", True,
                         f"defects {d1:.1e}, {d2:.1e} (both sides vanish)"))
        else:
            ratio = d1 / d2 if d2 > 0 else np.inf
            rows.append(("transport identity converges at order 2",
                         3.5 <= ratio <= 4.5,
                         f"defect ratio {ratio:.2f} in [3.5, 4.5]"))

    top = kf.kernel(spec.n + 1)
    if top.shape[1] == 0:
        rows.append(("constructed fields are Killing", True,
                     "top kernel trivial, nothing to integrate"))
        return rows
    lat = direction_lattice(spec.n, 0.02, 3)
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeneratorResidualWarning)
        for col in range(top.shape[1]):
            fld = killing_field(spec, x0, top[:, col], lat, step=cfg.ode_step,
                                check=False)
            centre = int(np.argmin(np.linalg.norm(lat, axis=1)))
            worst = max(worst, verify_killing(spec, fld, fld.points[centre],
                                              fd_step=cfg.ode_step))
        rows.append(("constructed fields are Killing", worst <= cfg.killing_tol,
                     f"max commutator residual {worst:.2e} <= {cfg.killing_tol:g}"))
        if top.shape[1] >= 2:
            a, b = top[:, 0], top[:, 1]
            fa = killing_field(spec, x0, a, lat, step=cfg.ode_step, check=False)
            fb = killing_field(spec, x0, b, lat, step=cfg.ode_step, check=False)
            fab = killing_field(spec, x0, 0.3 * a + 0.7 * b, lat,
                                step=cfg.ode_step, check=False)
            dev = float(np.abs(
                0.3 * fa.frame_components + 0.7 * fb.frame_components
                - fab.frame_components
            ).max())
            rows.append(("transport is linear in the generator", dev <= 1e-9,
                         f"max dev {dev:.2e} <= 1e-9"))
    return rows


def _check_atlas(cfg: RunConfig) -> list[Row]:
    spec = cfg.frame_spec()
    cap = 9 if cfg.dim <= 2 else 5
    res = tuple(min(r, cap) for r in cfg.resolution)
    atlas = classify_orbits(stratify(scan_grid(
        spec, res, rank_tol=cfg.rank_tol, probe_count=cfg.probe_count,
    )), cfg.feature_tol)
    ok_dim = all(row["dim"] == atlas.strata_table[row["stratum"]]["k_top"]
                 for row in atlas.orbit_table)
    per_stratum: dict[int, set[int]] = {}
    for row in atlas.orbit_table:
        per_stratum.setdefault(row["stratum"], set()).add(row["dim"])
    ok_same = all(len(dims) == 1 for dims in per_stratum.values())
    return [
        ("orbit dimension equals top kernel dimension", ok_dim,
         f"{len(atlas.orbit_table)} labels checked (exact)"),
        ("orbits in one stratum share their dimension", ok_same,
         f"{len(per_stratum)} strata checked (exact)"),
    ]


def run_verification(cfg: RunConfig) -> list[Row]:
    rng = np.random.default_rng(20230921)
    rows: list[Row] = []
    rows += _check_jets(cfg, rng)
    rows += _check_structure(cfg)
    rows += _check_block_consistency(cfg)
    rows += _check_kernels(cfg)
    rows += _check_transport(cfg)
    rows += _check_atlas(cfg)
    return rows
