import pytest

from framesym import FrameSpec
from framesym.jets import jet_space


@pytest.fixture(scope="session", autouse=True)
def _warm_jet_tables():
    # one-time table construction (akin to import cost), so runtime budgets
    # measure the actual computations
    for dim in (1, 2, 3):
        for order in range(dim + 4):
            jet_space(dim, order)


@pytest.fixture(scope="session")
def flat2():
    return FrameSpec.from_strings(["x", "y"], [["1", "0"], ["0", "1"]],
                                  box=[(-1, 1), (-1, 1)])


@pytest.fixture(scope="session")
def flat3():
    return FrameSpec.from_strings(
        ["x", "y", "z"],
        [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        box=[(-1, 1)] * 3,
    )


@pytest.fixture(scope="session")
def affine():
    # X1 = d/dx, X2 = exp(x) d/dy: constant bracket coefficient
    return FrameSpec.from_strings(["x", "y"], [["1", "0"], ["0", "exp(x)"]],
                                  box=[(-3, 3), (-3, 3)])


@pytest.fixture(scope="session")
def curved():
    # X1 = d/dx, X2 = (1+x^2) d/dy: bracket coefficient 2x/(1+x^2)
    return FrameSpec.from_strings(["x", "y"], [["1", "0"], ["0", "1+x^2"]],
                                  box=[(-3, 3), (-3, 3)])


@pytest.fixture(scope="session")
def heisenberg():
    return FrameSpec.from_strings(
        ["x", "y", "z"],
        [["1", "0", "0"], ["0", "1", "x"], ["0", "0", "1"]],
        box=[(-2, 2)] * 3,
    )


@pytest.fixture(scope="session")
def flat_obs():
    return FrameSpec.from_strings(["x", "y"], [["1", "0"], ["0", "1"]],
                                  observables=["y"], box=[(-1, 1), (-1, 1)])


def curved_gamma(x):
    """Hand bracket of [d/dx, (1+x^2) d/dy]: gamma_12^2 = 2x/(1+x^2)."""
    return 2.0 * x / (1.0 + x * x)


def curved_gamma_prime(x):
    """Hand derivative: gamma' = 2(1-x^2)/(1+x^2)^2, zero exactly at x = +-1."""
    return 2.0 * (1.0 - x * x) / (1.0 + x * x) ** 2


def curved_gamma_second(x):
    """Hand second derivative: gamma'' = 4x(x^2-3)/(1+x^2)^3."""
    return 4.0 * x * (x * x - 3.0) / (1.0 + x * x) ** 3
