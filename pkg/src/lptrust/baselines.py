"""Reference solvers: proximal gradient (PG) and majorize-minimization (MM)."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable


from .discretization import GridFunction, Space, inner_values, norm_values
from .pde_problems import ProblemSpec, TrackingObjective
from .regularizer import (
    Tally,
    default_sparsity_tol,
    phi_values,
    prox_majorant_values,
    prox_smoothed_values,
    sparsity_measure,
)
from .report import ReportRow
from .schedule import GeometricSchedule
from .tr_driver import stationarity_h, stationarity_h_nc

MAX_SHRINKS = 60


@dataclass(frozen=True)
class PgParams:
    eta_dec: float = 1e-4
    theta: float = 0.5
    beta_inc: float = 10.0
    M_inc: int = 2
    r0: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-10

    def __post_init__(self):
        if not (0 < self.eta_dec < 1 and 0 < self.theta < 1):
            raise ValueError("eta_dec and theta must lie in (0, 1)")
        if self.max_iter < 0 or self.tol < 0 or self.r0 <= 0:
            raise ValueError("invalid PG limits")


@dataclass(frozen=True)
class MmParams:
    inner_tol: float = 1e-3      # relative to the first inner displacement
    inner_max: int = 1
    max_outer: int = 1000
    tol: float = 1e-9
    eta_dec: float = 1e-4
    theta: float = 0.5
    lambda_min: float = 1e-8
    lambda_max: float = 1e8
    schedule: Callable[[int], float] | None = None  # None: 0.1 * 0.9**k

    def __post_init__(self):
        if self.inner_max <= 0 or self.max_outer <= 0:
            raise ValueError("iteration caps must be positive")


@dataclass(frozen=True, eq=False)
class BaselineResult:
    u: GridFunction
    row: ReportRow
    converged: bool
    history: list           # objective value after each iteration
    inner_failures: int = 0


def pg_solve(spec: ProblemSpec, params: PgParams = PgParams(),
             u0: GridFunction | None = None) -> BaselineResult:
    """Proximal gradient on ``f + phi`` with a bidirectional search on the prox parameter."""
    if spec.space is not Space.L2:
        raise ValueError("PG needs L2 controls")
    start = time.perf_counter()
    reg = spec.regularizer
    tally = Tally()
    obj = TrackingObjective(spec, tally)
    u = u0 if u0 is not None else spec.zero_control()
    grid, space = u.grid, u.space

    def F(v, fv):
        return fv + phi_values(grid, space, v, reg)

    def trial(v, g, r):
        tally.prox_lp += 1
        w = prox_smoothed_values(v - r * g, r, 0.0, reg)
        fw = obj.value(u.like(w))
        dw = norm_values(grid, space, w - v)
        return w, fw, dw

    f_u = obj.value(u)
    F_u = F(u.values, f_u)
    history = [F_u]
    r = params.r0
    k, dF, converged = 0, 0.0, False
    while k < params.max_iter:
        g = obj.gradient(u).values

        def ok(res, r):
            w, fw, dw = res
            return F(w, fw) <= F_u - params.eta_dec * dw * dw / r

        res = trial(u.values, g, r)
        if ok(res, r):
            for _ in range(params.M_inc):
                r_next = r * params.beta_inc
                nxt = trial(u.values, g, r_next)
                if not ok(nxt, r_next):
                    break
                r, res = r_next, nxt
        else:
            for _ in range(MAX_SHRINKS):
                r *= params.theta
                res = trial(u.values, g, r)
                if ok(res, r):
                    break
            else:
                break
        w, fw, dw = res
        k += 1
        if dw == 0:
            converged = True
            break
        u, f_u, F_u, dF = u.like(w), fw, F(w, fw), dw
        history.append(F_u)
        if dw <= params.tol:
            converged = True
            break

    g = obj.gradient(u)
    row = ReportRow(
        alg="PG", F=F_u, iter=k, eps_K=0.0, dF=dF, h_K=None,
        h_K_nc=stationarity_h_nc(u, g, 0.0, reg, 1.0, tally),
        sparsity=sparsity_measure(u, default_sparsity_tol(reg.box)),
        feval=tally.feval, hess=tally.hess, prox_lp=tally.prox_lp,
        time_s=time.perf_counter() - start,
    )
    return BaselineResult(u, row, converged, history)


def mm_solve(spec: ProblemSpec, params: MmParams = MmParams(),
             u0: GridFunction | None = None) -> BaselineResult:
    """Majorize ``phi_eps`` at the current iterate, then take a few convex prox-gradient steps.

    Only majorant proximal maps are used, so both control spaces work.
    """
    start = time.perf_counter()
    reg = spec.regularizer
    tally = Tally()
    obj = TrackingObjective(spec, tally)
    schedule = params.schedule or GeometricSchedule()
    u = u0 if u0 is not None else spec.zero_control()
    grid, space = u.grid, u.space

    def nrm(a):
        return norm_values(grid, space, a)

    def dot(a, b):
        return inner_values(grid, space, a, b)

    eps = schedule(0)
    f_u = obj.value(u)
    g = obj.gradient(u).values
    history = [f_u + phi_values(grid, space, u.values, reg, eps=eps)]
    lam = 1.0
    k, dF, converged, failures = 0, 0.0, False, 0
    s_prev = y_prev = None
    while k < params.max_outer:
        anchor = u.values

        def phi_k(v):
            return phi_values(grid, space, v, reg, anchor=anchor, anchor_eps=eps)

        v, f_v, g_v = u.values, f_u, g
        first = None
        for _ in range(params.inner_max):
            if s_prev is not None:
                sy = dot(s_prev, y_prev)
                lam = dot(s_prev, s_prev) / sy if sy > 0 else lam
                lam = min(params.lambda_max, max(params.lambda_min, lam))
            phi_v = phi_k(v)
            for _ in range(MAX_SHRINKS):
                w = prox_majorant_values(grid, space, v - lam * g_v, lam, anchor, eps, reg)
                dw = w - v
                step = nrm(dw)
                if step == 0:
                    break
                f_w = obj.value(u.like(w))
                if f_w + phi_k(w) <= f_v + phi_v - params.eta_dec * step * step / lam:
                    break
                lam *= params.theta
            else:
                failures += 1
                break
            if step == 0:
                break
            g_w = obj.gradient(u.like(w)).values
            s_prev, y_prev = dw, g_w - g_v
            v, f_v, g_v = w, f_w, g_w
            if first is None:
                first = step / lam
            elif step / lam <= params.inner_tol * first:
                break
        k += 1
        dF = nrm(v - u.values)
        u, f_u, g = u.like(v), f_v, g_v
        eps = schedule(k)
        history.append(f_u + phi_values(grid, space, u.values, reg, eps=eps))
        if dF <= params.tol:
            converged = True
            break

    grad = u.like(g)
    h_nc = stationarity_h_nc(u, grad, eps, reg, 1.0, tally) if space is Space.L2 else None
    row = ReportRow(
        alg="MM", F=f_u + phi_values(grid, space, u.values, reg), iter=k, eps_K=eps,
        dF=dF, h_K=stationarity_h(u, grad, eps, reg), h_K_nc=h_nc,
        sparsity=sparsity_measure(u, default_sparsity_tol(reg.box)),
        feval=tally.feval, hess=tally.hess, prox_lp=tally.prox_lp,
        time_s=time.perf_counter() - start,
    )
    return BaselineResult(u, row, converged, history, failures)
