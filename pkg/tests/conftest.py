import numpy as np
import pytest

from refsde import (
    CoefficientSet,
    Problem,
    SolverConfig,
    eta_from_callable,
)
from refsde.grids import SamplePath, TimeGrid


def path_on(t0, t1, n, fn, d=1):
    grid = TimeGrid(t0, t1, n)
    vals = np.column_stack([np.asarray(fn(grid.times), dtype=float)] * d) \
        if d > 1 else np.asarray(fn(grid.times), dtype=float)
    return SamplePath(grid, vals)


def linear_coeffs(a=0.2, b=0.1):
    """Scalar linear delay equation: drift x(t-r), diffusion a*x(t-r)+b."""
    return CoefficientSet.from_strings(["xd1"], [["a * xd1 + b"]],
                                       params={"a": a, "b": b})


def nonlinear_coeffs():
    """Scalar nonlinear delay equation: drift cos(x), diffusion sin(t+x(t-r))."""
    return CoefficientSet.from_strings(["cos(x1)"], [["sin(t + xd1)"]])


def linear_problem(n_r, M=1, a=0.2, b=0.1, H=0.75):
    eta = eta_from_callable(lambda t: np.array([t + 1.0]), 1.0, n_r, 1)
    return Problem(eta=eta, coeffs=linear_coeffs(a, b), r=1.0, T=float(M), H=H)


def nonlinear_problem(n_r, M=1, H=0.75):
    eta = eta_from_callable(lambda t: np.array([t * t]), 1.0, n_r, 1)
    return Problem(eta=eta, coeffs=nonlinear_coeffs(), r=1.0, T=float(M), H=H)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
