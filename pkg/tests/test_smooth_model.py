import numpy as np
import pytest

from lptrust.discretization import Grid, GridFunction, Space
from lptrust.regularizer import Tally
from lptrust.smooth_model import (
    QuadraticModel, SmoothObjective, curvature, model_value, omega_k_estimate,
)


class Quadratic(SmoothObjective):
    """f(u) = 1/2 <A u, u>_L2 - <b, u>_L2 with diagonal A."""

    def __init__(self, grid, diag, b):
        self.grid, self.space, self.tally = grid, Space.L2, Tally()
        self.diag, self.b = diag, b

    def value(self, u):
        self.tally.feval += 1
        w = self.grid.h**2
        return 0.5 * w * u.values @ (self.diag * u.values) - w * self.b @ u.values

    def gradient(self, u):
        return u.like(self.diag * u.values - self.b)

    def hess_vec(self, u, s):
        self.tally.hess += 1
        return s.like(self.diag * s.values)


@pytest.fixture
def quad():
    g = Grid(3)
    rng = np.random.default_rng(5)
    return Quadratic(g, rng.uniform(1, 3, 9), rng.standard_normal(9))


def test_model_is_exact_for_quadratics(quad):
    rng = np.random.default_rng(6)
    u = GridFunction(quad.grid, rng.standard_normal(9))
    v = GridFunction(quad.grid, rng.standard_normal(9))
    m = QuadraticModel.build(quad, u)
    assert model_value(m, v) == pytest.approx(quad.value(v) - quad.value(u), rel=1e-12)
    assert model_value(m, u) == 0


def test_curvature_bounds_and_counts(quad):
    u = GridFunction.zeros(quad.grid)
    m = QuadraticModel.build(quad, u)
    s = u.like(np.ones(9))
    c = curvature(m, s)
    assert quad.diag.min() <= c <= quad.diag.max()
    assert omega_k_estimate(m, s) == pytest.approx(c)
    assert quad.tally.hess == 2
    with pytest.raises(ValueError):
        curvature(m, u)


def test_value_of_step_accepts_precomputed_product(quad):
    u = GridFunction.zeros(quad.grid)
    m = QuadraticModel.build(quad, u)
    s = np.linspace(-1, 1, 9)
    before = quad.tally.hess
    assert m.value_of_step(s, quad.diag * s) == pytest.approx(m.value_of_step(s))
    assert quad.tally.hess == before + 1


def test_abstract_interface_enforced():
    with pytest.raises(TypeError):
        SmoothObjective()
