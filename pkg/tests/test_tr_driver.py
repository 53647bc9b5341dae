import math

import numpy as np
import pytest

from lptrust.discretization import Space
from lptrust.gcp import Mode
from lptrust.pde_problems import TrackingObjective, make_spec
from lptrust.regularizer import Tally
from lptrust.schedule import EpsSchedule, FactorialSchedule, GeometricSchedule, default_schedule
from lptrust.smooth_model import QuadraticModel
from lptrust.tr_driver import (
    VARIANTS, Subsolver, TRConfig, TRState, fcd_bound, reductions, solve, stationarity_h,
    stationarity_h_nc, tr_step,
)


def test_schedules():
    s = EpsSchedule()
    assert s(0) == pytest.approx(0.1) and s(2) == pytest.approx(0.1 * 0.01 / 2)
    assert all(s(k + 1) < s(k) for k in range(40))
    assert s(500) == 1e-130
    f = FactorialSchedule(1e-6)
    assert f(0) == pytest.approx(1e-6) and f(3) == pytest.approx(1e-6 / 24)
    assert f(1000) == 1e-130
    g = GeometricSchedule()
    assert g(10) == pytest.approx(0.1 * 0.9**10)
    assert default_schedule(0.1)(0) == pytest.approx(1e-12)
    for bad in (lambda: EpsSchedule(scale=-1), lambda: GeometricSchedule(q=1.5)):
        with pytest.raises(ValueError):
            bad()
    with pytest.raises(ValueError):
        s(-1)


def test_variant_table():
    assert set(VARIANTS) == {"tr-gcp", "tr-nc-gcp", "tr-spg", "tr-nc-spg", "tr-mm-spg",
                             "tr-nc-mm-spg"}
    cfg = TRConfig.for_variant("tr-nc-spg")
    assert (cfg.gcp_mode, cfg.subsolver, cfg.model_mode) == (Mode.NONCONVEX, Subsolver.SPG,
                                                             Mode.NONCONVEX)
    assert cfg.label == "TR-NC-SPG"
    with pytest.raises(ValueError):
        TRConfig.for_variant("tr-foo")
    with pytest.raises(ValueError):
        TRConfig(eta1=0.6, eta2=0.5)
    with pytest.raises(ValueError):
        TRConfig(gamma3=0.5)


def test_fcd_bound():
    assert fcd_bound(2.0, 1.0, 10.0, 0.5) == pytest.approx(0.5 * 2 * 1)
    assert fcd_bound(2.0, 0.0, 0.5, 1.0) == pytest.approx(1.0)


def test_stationarity_vanishes_at_fixed_point():
    spec = make_spec("poisson", 6, 0.5)
    u = spec.zero_control()
    zero = u.like(np.zeros(u.grid.size))
    assert stationarity_h(u, zero, 0.1, spec.regularizer) == 0
    assert stationarity_h_nc(u, zero, 0.1, spec.regularizer) == 0
    h1 = make_spec("s1", 6, 0.5, Space.H01)
    with pytest.raises(ValueError):
        stationarity_h_nc(h1.zero_control(), h1.zero_control(), 0.1, h1.regularizer)


def test_reductions_agree_for_quadratic_smooth_part():
    # Poisson tracking is quadratic, so the model is exact and pred == cred
    spec = make_spec("poisson", 8, 0.5, constrained=False)
    obj = TrackingObjective(spec)
    rng = np.random.default_rng(10)
    u = spec.zero_control().like(rng.standard_normal(64))
    m = QuadraticModel.build(obj, u)
    s = 0.1 * rng.standard_normal(64)
    for mode in Mode:
        pred, cred = reductions(mode, m, s, m.hess(s), obj.value(u), obj.value(u.like(u.values + s)),
                                0.05, spec.regularizer)
        assert pred == pytest.approx(cred, rel=1e-9, abs=1e-12)


def test_rejected_step_shrinks_radius():
    spec = make_spec("s2", 8, 0.8)
    obj = TrackingObjective(spec, Tally())
    cfg = TRConfig.for_variant("tr-gcp", gamma1=0.25)
    u = spec.zero_control()
    state = TRState(u=u, delta=10.0, eps=0.1, f_u=obj.value(u))
    model = QuadraticModel.build(obj, u)
    # a model with the wrong gradient sign predicts decrease where f increases
    wrong = QuadraticModel(u, -model.g, model.hess)
    rec = tr_step(state, obj, spec.regularizer, cfg, EpsSchedule(), wrong, 1.0)
    assert not rec["accepted"] and rec["rho"] < cfg.eta1
    assert state.delta == pytest.approx(2.5)
    assert state.u is u and state.eps == 0.1 and state.k == 1
    state2 = TRState(u=u, delta=10.0, eps=0.1, f_u=obj.value(u))
    rec2 = tr_step(state2, obj, spec.regularizer, cfg, EpsSchedule(), model, 1.0)
    assert rec2["accepted"] and state2.accepted == 1
    assert state2.eps == EpsSchedule()(1)
    assert rec2["rho"] >= cfg.eta1


@pytest.mark.parametrize("variant", list(VARIANTS))
def test_small_runs_converge_monotonically(variant):
    spec = make_spec("s2", 12, 0.8)
    res = solve(spec, TRConfig.for_variant(variant, max_outer=300))
    assert res.converged
    assert res.h_final < 1e-4 * res.h0 or res.h_final == 0
    accepted = [r for r in res.history if r["accepted"]]
    assert all(r["fcd_ok"] for r in accepted)
    F = [r["F"] for r in res.history]
    assert all(b <= a + 1e-12 * max(1, abs(a)) for a, b in zip(F, F[1:]))
    row = res.row
    assert row.alg == variant.upper() and row.iter == len(res.history)
    assert row.h_K_nc is not None and math.isfinite(row.F)
    assert spec.regularizer.box.contains(res.u.values)


def test_h1_runs_and_rejects_nonconvex_variants():
    spec = make_spec("s1", 10, 0.5, Space.H01)
    res = solve(spec, TRConfig.for_variant("tr-mm-spg"))
    assert res.converged and res.row.h_K_nc is None
    with pytest.raises(ValueError):
        solve(spec, TRConfig.for_variant("tr-spg"))


def test_deterministic():
    spec = make_spec("poisson", 10, 0.9)
    a = solve(spec, TRConfig.for_variant("tr-mm-spg"))
    b = solve(spec, TRConfig.for_variant("tr-mm-spg"))
    assert a.row.same_except_time(b.row)
    np.testing.assert_array_equal(a.u.values, b.u.values)


def test_max_outer_zero_reports_start():
    spec = make_spec("poisson", 6, 0.5)
    res = solve(spec, TRConfig(max_outer=0))
    assert not res.converged and res.row.iter == 0
