"""Acceptance criteria: one timed test per criterion, one verdict line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict lines.
Budgets are wall-clock seconds; every numeric tolerance is stated inline.
"""

import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from framesym import (
    classify_orbits,
    derived_curvature,
    direction_lattice,
    eval_jet,
    evaluate,
    homogeneity_report,
    integrability_probe,
    killing_field,
    killing_spaces,
    scan_grid,
    stratify,
    structure_functions,
    transport_generator,
    verify_killing,
    verify_transport_invariance,
    verify_transport_ode,
)
from framesym.cli import main as cli_main
from framesym.expressions import Add, Call, Div, Lit, Mul, Neg, Sub, Var
from framesym.jets import jet_mul, jet_partial, jet_compose

from conftest import curved_gamma

DOCS = Path(__file__).resolve().parents[1] / "docs" / "configs"


@contextmanager
def budget(criterion: str, seconds: float):
    start = time.perf_counter()
    failed = False
    try:
        yield
    except BaseException:
        failed = True
        raise
    finally:
        elapsed = time.perf_counter() - start
        verdict = "FAIL" if failed or elapsed >= seconds else "PASS"
        print(f"\nACCEPTANCE {criterion}: {verdict} ({elapsed:.2f}s, budget {seconds:g}s)")
    assert elapsed < seconds, f"{criterion} exceeded its {seconds:g}s budget"


def test_criterion_1_flat_frames(flat2, flat3):
    with budget("1 flat-frame suite", 1.0):
        for spec in (flat2, flat3):
            n = spec.n
            st = structure_functions(spec, np.zeros(n), 1)
            assert np.abs(st.gamma.coeffs).max() == 0.0
            dk = derived_curvature(spec, np.zeros(n), 2)
            assert all(np.abs(b).max() == 0.0 for b in dk.blocks)
            kf = killing_spaces(spec, np.full(n, 0.25))
            assert kf.dims == tuple([n] * (n + 2))
            assert kf.stabilization_order == 1
            hr = homogeneity_report(spec, [np.zeros(n), np.full(n, 0.4)])
            assert hr.homogeneous
            lattice = direction_lattice(n, 0.08, 3)
            for seed in (np.eye(n)[0], np.linspace(0.5, 1.0, n)):
                fld = killing_field(spec, np.zeros(n), seed, lattice, check=False)
                assert np.abs(fld.coordinate_components - seed).max() <= 1e-12


def test_criterion_2_affine_frame(affine):
    with budget("2 affine frame", 5.0):
        rng = np.random.default_rng(42)
        pts = rng.uniform(-2.5, 2.5, size=(100, 2))
        st = structure_functions(affine, pts, 0)
        assert np.abs(st.values()[:, 0, 1] - 1.0).max() < 1e-10

        dk = derived_curvature(affine, pts[:20], 3)
        for s in range(1, 4):
            assert np.abs(dk.blocks[s]).max() < 1e-8

        hr = homogeneity_report(affine, [[0.0, 0.0], [1.0, 0.5], [-1.5, -0.5]])
        assert hr.constant_curvature and hr.full_rank and hr.homogeneous

        path = transport_generator(affine, [0.0, 0.0], [0.0, 1.0], [1.0, 0.0],
                                   2.0, 1e-3, check=False)
        assert np.abs(path.generators[:, 1] - np.exp(-path.times)).max() < 1e-8

        basis = killing_spaces(affine, np.zeros(2)).kernel(3)
        assert basis.shape == (2, 2)
        lattice = direction_lattice(2, 0.05, 3)
        for col in range(2):
            fld = killing_field(affine, np.zeros(2), basis[:, col], lattice,
                                check=False)
            for idx in range(len(lattice)):
                assert verify_killing(affine, fld, fld.points[idx], 1e-3) < 1e-6


def test_criterion_3_curved_frame(curved):
    with budget("3 curved frame", 5.0):
        rng = np.random.default_rng(7)
        xs = rng.uniform(-2.5, 2.5, size=100)
        st = structure_functions(curved, np.stack([xs, np.zeros(100)], axis=-1), 0)
        assert np.abs(st.values()[:, 0, 1] - curved_gamma(xs)).max() < 1e-9

        for x in (0.0, 0.5, 2.0):
            assert killing_spaces(curved, np.array([x, 0.0])).dims[0] == 1
        for x in (1.0, -1.0):
            kf = killing_spaces(curved, np.array([x, 0.0]))
            assert kf.dims[0] == 2 and kf.dims[1] == 1

        for x, expected in ((1.0, False), (-1.0, False), (0.0, True),
                            (0.5, True), (2.0, True)):
            pr = integrability_probe(curved, np.array([x, 0.0]), 0.1)
            assert pr.in_domain is expected

        x0 = 0.5
        path = transport_generator(curved, [x0, 0.0], [0.0, 1.0], [1.0, 0.0],
                                   1.5, 1e-3, check=False)
        closed_form = (1 + x0**2) / (1 + (x0 + path.times) ** 2)
        assert np.abs(path.generators[:, 1] - closed_form).max() < 1e-8

        for x in (-2.0, -1.0, -0.3, 0.0, 0.5, 1.0, 2.0):
            kf = killing_spaces(curved, np.array([x, 0.0]))
            assert kf.stabilization_order <= 3


def test_criterion_4_transport_identity(curved):
    with budget("4 transport differential identity", 2.0):
        for order in (1, 2):
            d1 = verify_transport_ode(curved, [0.0, 0.0], [1.0, 0.0],
                                      [1.0, 0.0], order, 1e-3, total_time=0.4)
            d2 = verify_transport_ode(curved, [0.0, 0.0], [1.0, 0.0],
                                      [1.0, 0.0], order, 5e-4, total_time=0.4)
            assert 3.5 <= d1 / d2 <= 4.5, (order, d1, d2)


def test_criterion_5_transport_invariance(curved):
    with budget("5 kernel transport invariance", 2.0):
        res = verify_transport_invariance(curved, [0.0, 0.0], [0.0, 1.0],
                                          [1.0, 0.0], 0.8, 1e-3, kernel_order=1)
        assert res < 1e-7
        res = verify_transport_invariance(curved, [0.0, 0.0], [1.0, 0.0],
                                          [1.0, 0.0], 0.8, 1e-3, kernel_order=1)
        assert res > 0.1


def test_criterion_6_orbit_atlas(curved, flat_obs):
    with budget("6 orbit atlas", 30.0):
        atlas = classify_orbits(stratify(scan_grid(curved, (61, 61))))
        assert len(atlas.strata_table) == 3
        for row in atlas.orbit_table:
            assert row["dim"] == 1
            assert atlas.strata_table[row["stratum"]]["k_top"] == 1
        middle = [row for row in atlas.orbit_table if row["stratum"] == 1]
        interior = [x for x in np.linspace(-3, 3, 61) if -1 < x < 1]
        assert len(middle) == len(interior)
        for row in middle:
            member_x = atlas.points[atlas.orbit == row["orbit"]][:, 0]
            assert len(set(np.round(member_x, 9))) == 1

        obs_atlas = classify_orbits(stratify(scan_grid(flat_obs, (21, 21))))
        assert all(row["dim"] == 1 for row in obs_atlas.orbit_table)
        assert len(obs_atlas.orbit_table) == 21
        for row in obs_atlas.orbit_table:
            member_y = obs_atlas.points[obs_atlas.orbit == row["orbit"]][:, 1]
            assert len(set(np.round(member_y, 9))) == 1


def test_criterion_7_heisenberg(heisenberg):
    with budget("7 heisenberg frame", 10.0):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1.5, 1.5, size=(30, 3))
        vals = structure_functions(heisenberg, pts, 0).values()
        assert np.abs(vals[:, 0, 2] - 1.0).max() < 1e-12
        spread = vals.reshape(30, -1)
        assert np.abs(spread - spread[0]).max() < 1e-12

        kf = killing_spaces(heisenberg, np.array([0.2, -0.4, 0.6]))
        assert kf.dims == (3, 3, 3, 3, 3)

        hr = homogeneity_report(heisenberg, pts[:5])
        assert hr.homogeneous

        basis = kf.kernel(4)
        assert basis.shape == (3, 3)
        lattice = direction_lattice(3, 0.04, 3)
        centre = int(np.argmin(np.linalg.norm(lattice, axis=1)))
        for col in range(3):
            fld = killing_field(heisenberg, np.array([0.2, -0.4, 0.6]),
                                basis[:, col], lattice, check=False)
            assert verify_killing(heisenberg, fld, fld.points[centre], 1e-3) < 1e-6


def _random_expression(rng, dim, depth):
    """Tame random expressions: bounded leaves, contractive unary wrappers."""
    leaf_kinds = ["lit", "var"]
    if depth == 0:
        kind = leaf_kinds[rng.integers(2)]
        if kind == "lit":
            return Lit(float(np.round(rng.uniform(-1.5, 1.5), 3)))
        idx = int(rng.integers(dim))
        return Var(idx, "xyz"[idx])
    pick = rng.integers(6)
    if pick == 0:
        return Add(_random_expression(rng, dim, depth - 1),
                   _random_expression(rng, dim, depth - 1))
    if pick == 1:
        return Sub(_random_expression(rng, dim, depth - 1),
                   _random_expression(rng, dim, depth - 1))
    if pick == 2:
        return Mul(_random_expression(rng, dim, depth - 1),
                   _random_expression(rng, dim, depth - 1))
    if pick == 3:
        return Neg(_random_expression(rng, dim, depth - 1))
    if pick == 4:
        inner = _random_expression(rng, dim, depth - 1)
        return Div(inner, Add(Lit(2.0), Mul(inner, inner)))
    fn = ("sin", "cos", "tanh", "atan")[rng.integers(4)]
    return Call(fn, Mul(Lit(0.7), _random_expression(rng, dim, depth - 1)))


def _fd_coefficient(expr, x, alpha, h=0.02):
    def partial(f, axis):
        e = np.zeros(len(x))
        e[axis] = 1.0

        def fd(p):
            c = lambda s: (f(p + s * e) - f(p - s * e)) / (2.0 * s)
            return (4.0 * c(h / 2) - c(h)) / 3.0

        return fd

    f = lambda p: evaluate(expr, p)
    for axis, count in enumerate(alpha):
        for _ in range(count):
            f = partial(f, axis)
    return f(x) / math.prod(math.factorial(a) for a in alpha)


def test_criterion_8_jet_engine():
    with budget("8 jet engine identities", 5.0):
        rng = np.random.default_rng(2718)
        for trial in range(100):
            dim = int(rng.integers(1, 4))
            order = int(rng.integers(2, 6))
            x = rng.uniform(-1.0, 1.0, size=dim)
            e1 = _random_expression(rng, dim, 2)
            e2 = _random_expression(rng, dim, 2)
            a = eval_jet(e1, x, order)
            b = eval_jet(e2, x, order)
            scale = max(1.0, np.abs(a.coeffs).max() * np.abs(b.coeffs).max())
            for axis in range(dim):
                lhs = jet_partial(jet_mul(a, b), axis)
                rhs = jet_mul(jet_partial(a, axis), b.truncated(order - 1)) \
                    + jet_mul(a.truncated(order - 1), jet_partial(b, axis))
                assert np.abs(lhs.coeffs - rhs.coeffs).max() <= 1e-12 * scale
            lhs = jet_partial(jet_compose("sin", a), 0)
            rhs = jet_mul(jet_compose("cos", a.truncated(order - 1)),
                          jet_partial(a, 0))
            assert np.abs(lhs.coeffs - rhs.coeffs).max() <= 1e-10 * scale
            if trial % 4 == 0:  # finite-difference cross-check, |alpha| <= 3
                jet = eval_jet(e1, x, 3)
                alphas = [(1,), (2,), (3,)] if dim == 1 else \
                    [(1,) + (0,) * (dim - 1), (1, 1) + (0,) * (dim - 2),
                     (2,) + (0,) * (dim - 1), (2, 1) + (0,) * (dim - 2)]
                for alpha in alphas:
                    got = float(jet.coefficient(alpha))
                    want = float(_fd_coefficient(e1, x, alpha))
                    assert abs(got - want) <= 1e-6 * max(1.0, abs(want)), \
                        (trial, alpha, got, want)


def test_criterion_9_determinism(tmp_path, capsys):
    with budget("9 byte-identical reruns", 60.0):
        for sub in ("a", "b"):
            code = cli_main(["orbits", "--config", str(DOCS / "curved.cfg"),
                             "--out", str(tmp_path / sub)])
            assert code == 0
        capsys.readouterr()
        first = (tmp_path / "a" / "orbit_atlas.csv").read_bytes()
        second = (tmp_path / "b" / "orbit_atlas.csv").read_bytes()
        assert first == second
