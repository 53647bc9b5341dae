import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lptrust.discretization import BoxBounds, Grid, GridFunction, Space, norm_values
from lptrust.gcp import CauchyPath, Mode, UnsupportedConfiguration, gcp_search
from lptrust.regularizer import RegularizerParams, Tally, phi_values
from lptrust.smooth_model import QuadraticModel
from lptrust.subsolvers import (
    NoFeasibleStepError, SpgParams, largest_negative_t, mm_spg, spg_nonconvex,
)


@given(st.floats(1e-6, 0.999), st.floats(0.1, 100))
def test_largest_negative_t_continuous(root, slope):
    t = largest_negative_t(lambda t: slope * (t - root), rel_width=1e-6)
    assert t <= root * (1 + 1e-12)
    assert t >= root * (1 - 1e-6)


@given(st.floats(1e-6, 0.999))
def test_largest_negative_t_with_jump(root):
    # sign change through a discontinuity
    t = largest_negative_t(lambda t: -1.0 if t <= root else 5.0 + t, rel_width=1e-4)
    assert root * (1 - 1e-4) <= t <= root


def test_largest_negative_t_edge_cases():
    assert largest_negative_t(lambda t: -1.0) == 1.0
    with pytest.raises(NoFeasibleStepError):
        largest_negative_t(lambda t: 1.0)


def make_problem(seed, space=Space.L2, box=True, n=5):
    rng = np.random.default_rng(seed)
    g = Grid(n)
    diag = rng.uniform(-0.5, 4.0, g.size)
    u = GridFunction(g, rng.uniform(-1, 1, g.size), space)
    grad = GridFunction(g, 3 * rng.standard_normal(g.size), space)
    if space is Space.H01:
        hess = lambda s: diag * s / 50 + s  # noqa: E731
        reg = RegularizerParams(0.5, 0.01, 0.05)
    else:
        hess = lambda s: diag * s  # noqa: E731
        reg = RegularizerParams(0.5, 0.01, 0.05, BoxBounds.symmetric(3.0) if box else BoxBounds())
    return QuadraticModel(u, grad, hess), reg


def m_eps(model, reg, eps, step):
    return model.value_of_step(step) + phi_values(model.grid, model.space,
                                                  model.anchor.values + step, reg, eps=eps)


@pytest.mark.parametrize("solver", ["spg", "mm"])
@settings(max_examples=25)
@given(seed=st.integers(0, 10**6), delta=st.floats(1e-2, 5), box=st.booleans())
def test_subsolver_keeps_decrease_and_trust_region(solver, seed, delta, box):
    model, reg = make_problem(seed, box=box)
    eps = 0.05
    mode = Mode.NONCONVEX if solver == "spg" else Mode.CONVEX
    cp = gcp_search(CauchyPath(model, eps, reg, mode), delta, 1.0)
    if solver == "spg":
        res = spg_nonconvex(model, cp, delta, eps, reg, SpgParams())
    else:
        res = mm_spg(model, cp, delta, eps, reg)
    start = m_eps(model, reg, eps, cp.step)
    assert res.model_value <= start + 1e-10 * max(1, abs(start))
    assert res.model_value == pytest.approx(m_eps(model, reg, eps, res.step), rel=1e-8, abs=1e-10)
    np.testing.assert_allclose(res.Bstep, model.hess(res.step), atol=1e-9)
    assert norm_values(model.grid, model.space, res.step) <= delta * (1 + 1e-9)
    assert reg.box.contains(res.u.values)


def test_mm_spg_in_h1_and_reports_progress():
    model, reg = make_problem(11, space=Space.H01)
    cp = gcp_search(CauchyPath(model, 0.05, reg, Mode.CONVEX), 0.5, 1.0)
    seen = []
    res = mm_spg(model, cp, 0.5, 0.05, reg, on_step=seen.append)
    assert len(seen) == res.iterations
    assert all(b <= a + 1e-10 for a, b in zip(seen, seen[1:]))
    assert norm_values(model.grid, Space.H01, res.step) <= 0.5 * (1 + 1e-9)


def test_spg_counts_prox_and_rejects_h1():
    model, reg = make_problem(12)
    cp = gcp_search(CauchyPath(model, 0.05, reg, Mode.NONCONVEX), 1.0, 1.0)
    t = Tally()
    spg_nonconvex(model, cp, 1.0, 0.05, reg, SpgParams(), t)
    assert t.prox_lp > 0
    h1, reg1 = make_problem(13, space=Space.H01)
    cp1 = gcp_search(CauchyPath(h1, 0.05, reg1, Mode.CONVEX), 1.0, 1.0)
    with pytest.raises(UnsupportedConfiguration):
        spg_nonconvex(h1, cp1, 1.0, 0.05, reg1)


def test_zero_iterations_returns_cauchy_point():
    model, reg = make_problem(14)
    cp = gcp_search(CauchyPath(model, 0.05, reg, Mode.CONVEX), 1.0, 1.0)
    res = mm_spg(model, cp, 1.0, 0.05, reg, SpgParams(max_iter=0))
    np.testing.assert_array_equal(res.step, cp.step)


def test_params_validated():
    with pytest.raises(ValueError):
        SpgParams(lambda_min=1.0, lambda_max=0.5)
    with pytest.raises(ValueError):
        SpgParams(beta1=1.5)
