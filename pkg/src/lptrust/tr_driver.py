"""Smoothed proximal trust-region method for L^p-regularized problems."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretization import GridFunction, Space, norm_values
from .gcp import CauchyPath, DegenerateStepError, GcpParams, Mode, gcp_search
from .pde_problems import ProblemSpec, TrackingObjective
from .regularizer import (
    RegularizerParams,
    Tally,
    default_sparsity_tol,
    phi_values,
    prox_majorant_values,
    prox_smoothed_values,
    sparsity_measure,
)
from .report import ReportRow
from .schedule import default_schedule
from .smooth_model import QuadraticModel, SmoothObjective, curvature
from .subsolvers import SpgParams, mm_spg, spg_nonconvex

# reductions below this multiple of machine precision times |F| are noise
_ROUNDOFF = 100 * np.finfo(float).eps


class Subsolver(str, enum.Enum):
    NONE = "none"
    SPG = "spg"
    MM_SPG = "mm_spg"


VARIANTS = {
    "tr-gcp": (Mode.CONVEX, Subsolver.NONE, Mode.CONVEX),
    "tr-nc-gcp": (Mode.NONCONVEX, Subsolver.NONE, Mode.NONCONVEX),
    "tr-spg": (Mode.CONVEX, Subsolver.SPG, Mode.NONCONVEX),
    "tr-nc-spg": (Mode.NONCONVEX, Subsolver.SPG, Mode.NONCONVEX),
    "tr-mm-spg": (Mode.CONVEX, Subsolver.MM_SPG, Mode.NONCONVEX),
    "tr-nc-mm-spg": (Mode.NONCONVEX, Subsolver.MM_SPG, Mode.NONCONVEX),
}


@dataclass(frozen=True)
class TRConfig:
    delta0: float = 10.0
    eta1: float = 1e-4
    eta2: float = 0.5
    gamma1: float = 0.25
    gamma2: float = 0.25
    gamma3: float = 10.0
    tau0: float = 1e-4
    r0: float = 1.0
    schedule: Callable[[int], float] | None = None  # None: chosen from p
    model_mode: Mode = Mode.NONCONVEX
    gcp_mode: Mode = Mode.CONVEX
    subsolver: Subsolver = Subsolver.MM_SPG
    kappa_fcd: float = 1e-8
    max_outer: int = 200
    gcp: GcpParams = GcpParams()
    spg: SpgParams = SpgParams()
    mm: SpgParams = SpgParams(max_iter=50)
    label: str = "tr"

    def __post_init__(self):
        if self.delta0 <= 0 or self.tau0 <= 0 or self.r0 <= 0 or self.kappa_fcd <= 0:
            raise ValueError("delta0, tau0, r0 and kappa_fcd must be positive")
        if not 0 < self.eta1 < self.eta2 < 1:
            raise ValueError("need 0 < eta1 < eta2 < 1")
        if not 0 < self.gamma1 <= self.gamma2 < 1 <= self.gamma3:
            raise ValueError("need 0 < gamma1 <= gamma2 < 1 <= gamma3")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")
        object.__setattr__(self, "model_mode", Mode(self.model_mode))
        object.__setattr__(self, "gcp_mode", Mode(self.gcp_mode))
        object.__setattr__(self, "subsolver", Subsolver(self.subsolver))

    @classmethod
    def for_variant(cls, variant: str, **kw) -> "TRConfig":
        try:
            gcp_mode, sub, model_mode = VARIANTS[variant]
        except KeyError:
            raise ValueError(f"unknown trust-region variant {variant!r}") from None
        return cls(gcp_mode=gcp_mode, subsolver=sub, model_mode=model_mode,
                   label=variant.upper(), **kw)


@dataclass
class TRState:
    u: GridFunction
    delta: float
    eps: float
    k: int = 0            # outer iterations, accepted or not
    accepted: int = 0
    h0: float = math.nan
    t_prev: float = 1.0
    f_u: float = math.nan
    last_step_norm: float = 0.0
    history: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: GridFunction
    row: ReportRow
    converged: bool
    history: list
    h0: float
    h_final: float


def stationarity_h(u: GridFunction, grad: GridFunction, eps: float,
                   params: RegularizerParams, r0: float = 1.0) -> float:
    """Scaled majorant prox-gradient displacement at ``u``."""
    w = prox_majorant_values(u.grid, u.space, u.values - r0 * grad.values, r0, u.values,
                             eps, params)
    return norm_values(u.grid, u.space, w - u.values) / r0


def stationarity_h_nc(u: GridFunction, grad: GridFunction, eps: float,
                      params: RegularizerParams, r0: float = 1.0,
                      tally: Tally | None = None) -> float:
    if u.space is not Space.L2:
        raise ValueError("the nonconvex stationarity measure needs L2 controls")
    if tally is not None:
        tally.prox_lp += 1
    w = prox_smoothed_values(u.values - r0 * grad.values, r0, eps, params)
    return norm_values(u.grid, u.space, w - u.values) / r0


def _phi_variant(mode: Mode, u: GridFunction, v: np.ndarray, eps: float,
                 params: RegularizerParams) -> float:
    if mode is Mode.CONVEX:
        return phi_values(u.grid, u.space, v, params, anchor=u.values, anchor_eps=eps)
    return phi_values(u.grid, u.space, v, params, eps=eps)


def reductions(mode: Mode | str, model: QuadraticModel, step: np.ndarray, Bstep: np.ndarray,
               f_u: float, f_trial: float, eps: float,
               params: RegularizerParams) -> tuple[float, float]:
    """``(pred, cred)`` for the convex (majorant) or nonconvex (smoothed) model."""
    mode = Mode(mode)
    u = model.anchor
    phi_u = _phi_variant(mode, u, u.values, eps, params)
    phi_t = _phi_variant(mode, u, u.values + step, eps, params)
    pred = -(model.value_of_step(step, Bstep) + phi_t - phi_u)
    cred = f_u + phi_u - f_trial - phi_t
    return pred, cred


def fcd_bound(h: float, omega: float, delta: float, kappa: float) -> float:
    return kappa * h * min(h / (1 + omega), delta)


def _trial(objective: SmoothObjective, model: QuadraticModel, state: TRState,
           config: TRConfig, params: RegularizerParams):
    path = CauchyPath(model, state.eps, params, config.gcp_mode, objective.tally)
    cp = gcp_search(path, state.delta, state.t_prev, config.gcp)
    state.t_prev = cp.t_A
    if config.subsolver is Subsolver.SPG:
        res = spg_nonconvex(model, cp, state.delta, state.eps, params, config.spg,
                            objective.tally)
        return cp, res.step, res.Bstep
    if config.subsolver is Subsolver.MM_SPG:
        res = mm_spg(model, cp, state.delta, state.eps, params, config.mm)
        return cp, res.step, res.Bstep
    return cp, cp.step, cp.Bstep


def tr_step(state: TRState, objective: SmoothObjective, params: RegularizerParams,
            config: TRConfig, schedule: Callable[[int], float],
            model: QuadraticModel, h: float) -> dict:
    """One outer iteration.  ``model`` and ``h`` belong to the current iterate."""
    u = state.u
    cp, step, Bstep = _trial(objective, model, state, config, params)
    record = {"k": state.k, "delta": state.delta, "eps": state.eps, "h": h,
              "t_A": cp.t_A, "accepted": False, "rho": math.nan}
    state.k += 1
    if not np.any(step):
        state.delta *= config.gamma1
        record.update(pred=0.0, cred=0.0, fcd_ok=True)
        state.history.append(record)
        return record
    trial = u.like(u.values + step)
    f_trial = objective.value(trial)
    pred, cred = reductions(config.model_mode, model, step, Bstep, state.f_u, f_trial,
                            state.eps, params)
    scale = abs(state.f_u) + abs(_phi_variant(config.model_mode, u, u.values, state.eps,
                                              params))
    if pred > 0 and abs(pred - cred) <= _ROUNDOFF * max(1.0, scale):
        rho = 1.0
    else:
        rho = cred / pred if pred > 0 else -math.inf
    omega = abs(curvature(model, u.like(step), Bstep))
    fcd_ok = pred >= fcd_bound(h, omega, state.delta, config.kappa_fcd)
    record.update(pred=pred, cred=cred, rho=rho, fcd_ok=fcd_ok)
    if rho < config.eta1:
        state.delta *= config.gamma1
    else:
        record["accepted"] = True
        state.u = trial
        state.f_u = f_trial
        state.last_step_norm = norm_values(u.grid, u.space, step)
        state.accepted += 1
        state.eps = schedule(state.accepted)
        if rho >= config.eta2:
            state.delta *= config.gamma3
    state.history.append(record)
    return record


def solve(spec: ProblemSpec, config: TRConfig = TRConfig(),
          u0: GridFunction | None = None) -> SolveResult:
    """Run the trust-region method from ``u0`` (default zero) until ``h_k < tau0 h_0``."""
    start = time.perf_counter()
    params = spec.regularizer
    tally = Tally()
    objective = TrackingObjective(spec, tally)
    if config.gcp_mode is Mode.NONCONVEX or config.subsolver is Subsolver.SPG:
        if spec.space is not Space.L2:
            raise ValueError(f"{config.label} needs L2 controls")
    schedule = config.schedule or default_schedule(params.p)
    u = u0 if u0 is not None else spec.zero_control()
    state = TRState(u=u, delta=config.delta0, eps=schedule(0), t_prev=config.gcp.t0)
    state.f_u = objective.value(u)

    converged = False
    h = math.nan
    while True:
        model = QuadraticModel.build(objective, state.u)
        h = stationarity_h(state.u, model.g, state.eps, params, config.r0)
        if state.k == 0 and math.isnan(state.h0):
            state.h0 = h
        if h == 0 or h < config.tau0 * state.h0:
            converged = True
            break
        if state.k >= config.max_outer:
            break
        # F_k = f(u_k) + phi_{eps_k}(u_k) before the step, for the monotonicity audit
        F_k = state.f_u + phi_values(state.u.grid, state.u.space, state.u.values, params,
                                     eps=state.eps)
        try:
            rec = tr_step(state, objective, params, config, schedule, model, h)
        except DegenerateStepError:
            converged = True
            break
        rec["F"] = F_k

    g = model.g
    h_nc = None
    if spec.space is Space.L2:
        h_nc = stationarity_h_nc(state.u, g, state.eps, params, config.r0, tally)
    row = ReportRow(
        alg=config.label,
        F=state.f_u + phi_values(state.u.grid, state.u.space, state.u.values, params),
        iter=state.k,
        eps_K=state.eps,
        dF=state.last_step_norm,
        h_K=h,
        h_K_nc=h_nc,
        sparsity=sparsity_measure(state.u, default_sparsity_tol(params.box)),
        feval=tally.feval,
        hess=tally.hess,
        prox_lp=tally.prox_lp,
        time_s=time.perf_counter() - start,
    )
    return SolveResult(state.u, row, converged, state.history, state.h0, h)
