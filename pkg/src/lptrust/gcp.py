"""Generalized Cauchy points along the proximal gradient path.

For a step length ``t`` the path point is ``prox_{t phi}(u_k - t g_k)`` with
``phi`` the convex majorant (``Mode.CONVEX``) or the smoothed L^p regularizer
(``Mode.NONCONVEX``).  A step length is acceptable when

    m(u(t)) - m(u_k) <= mu1 * Q(t)        (sufficient model decrease)
    ||u(t) - u_k||   <= nu1 * Delta_k     (trust region)

with ``Q(t) = <g_k, p(t)> + phi(u(t)) - phi(u_k)``.  The search expands the
previous step length while it stays acceptable and backtracks otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .discretization import GridFunction, Space, norm_values
from .regularizer import (
    RegularizerParams,
    Tally,
    phi_values,
    prox_majorant_values,
    prox_smoothed_values,
)
from .smooth_model import QuadraticModel

MAX_BACKTRACKS = 200


class Mode(str, enum.Enum):
    CONVEX = "convex"
    NONCONVEX = "nonconvex"


class DegenerateStepError(RuntimeError):
    """Backtracking reached a step length at which nothing can change any more."""


class UnsupportedConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class GcpParams:
    mu1: float = 1e-4
    mu2: float = 0.9
    nu1: float = 1.0
    nu2: float = 0.5
    nu3: float = 1e-3
    nu4: float = 0.5
    beta_dec: float = 0.5
    beta_inc: float = 10.0
    M_inc: int = 2
    t0: float = 1.0

    def __post_init__(self):
        if not 0 < self.mu1 < self.mu2 < 1:
            raise ValueError("need 0 < mu1 < mu2 < 1")
        if not 0 < self.nu4 < self.nu1:
            raise ValueError("need 0 < nu4 < nu1")
        if not (0 < self.nu2 < 1 and self.nu3 > 0):
            raise ValueError("need 0 < nu2 < 1 and nu3 > 0")
        if not (0 < self.beta_dec < 1 < self.beta_inc):
            raise ValueError("need 0 < beta_dec < 1 < beta_inc")
        if self.M_inc < 0 or self.t0 <= 0:
            raise ValueError("need M_inc >= 0 and t0 > 0")


@dataclass(frozen=True, eq=False)
class PathPoint:
    t: float
    step: np.ndarray       # p(t) = u(t) - u_k
    Bstep: np.ndarray      # B_k p(t)
    step_norm: float
    q: float               # Q(t)
    decrease: float        # m(u(t)) - m(u_k)


@dataclass(frozen=True, eq=False)
class GcpResult:
    t_A: float
    u_trial: GridFunction
    step: np.ndarray
    Bstep: np.ndarray
    step_norm: float
    q: float
    decrease: float
    mode: Mode
    t_B: float | None
    backtracks: int
    expansions: int


class CauchyPath:
    """Evaluates path points for one outer iteration (fixed ``u_k``, ``g_k``, ``eps_k``)."""

    def __init__(self, model: QuadraticModel, eps: float, params: RegularizerParams,
                 mode: Mode | str, tally: Tally | None = None):
        self.model = model
        self.eps = eps
        self.params = params
        self.mode = Mode(mode)
        self.tally = tally
        if self.mode is Mode.NONCONVEX and model.space is not Space.L2:
            raise UnsupportedConfiguration("nonconvex Cauchy points need L2 controls")
        self.grid = model.grid
        self.u = model.anchor.values
        self.g = model.g.values
        self.phi_u = self.phi(self.u)

    def phi(self, v: np.ndarray) -> float:
        if self.mode is Mode.CONVEX:
            return phi_values(self.grid, self.model.space, v, self.params,
                              anchor=self.u, anchor_eps=self.eps)
        return phi_values(self.grid, self.model.space, v, self.params, eps=self.eps)

    def displacement(self, t: float) -> np.ndarray:
        z = self.u - t * self.g
        if self.mode is Mode.CONVEX:
            w = prox_majorant_values(self.grid, self.model.space, z, t, self.u, self.eps,
                                     self.params)
        else:
            if self.tally is not None:
                self.tally.prox_lp += 1
            w = prox_smoothed_values(z, t, self.eps, self.params)
        return w - self.u

    def q_of(self, step: np.ndarray) -> float:
        return self.model.dot(self.g, step) + self.phi(self.u + step) - self.phi_u

    def point(self, t: float) -> PathPoint:
        step = self.displacement(t)
        q = self.q_of(step)
        Bstep = self.model.hess(step) if np.any(step) else np.zeros_like(step)
        decrease = q + 0.5 * self.model.dot(Bstep, step)
        return PathPoint(t, step, Bstep, norm_values(self.grid, self.model.space, step),
                         q, decrease)


def prox_path(mode, t: float, u_k: GridFunction, g_k: GridFunction, eps: float,
              params: RegularizerParams, tally: Tally | None = None) -> GridFunction:
    """``p(t) = prox_{t phi}(u_k - t g_k) - u_k`` for the chosen regularizer variant."""
    model = QuadraticModel(u_k, g_k, lambda s: np.zeros_like(s))
    return u_k.like(CauchyPath(model, eps, params, mode, tally).displacement(t))


def q_value(mode, t: float, u_k: GridFunction, g_k: GridFunction, eps: float,
            params: RegularizerParams) -> float:
    model = QuadraticModel(u_k, g_k, lambda s: np.zeros_like(s))
    path = CauchyPath(model, eps, params, mode)
    return path.q_of(path.displacement(t))


def conditions_hold(pt: PathPoint, delta: float, gp: GcpParams) -> tuple[bool, bool]:
    desc = pt.decrease <= gp.mu1 * pt.q
    radius = pt.step_norm <= gp.nu1 * delta
    return desc, radius


def gcp_conditions(model: QuadraticModel, t: float, delta: float, eps: float,
                   params: RegularizerParams, mode, gp: GcpParams = GcpParams()) -> dict:
    desc, radius = conditions_hold(CauchyPath(model, eps, params, mode).point(t), delta, gp)
    return {"desc": desc, "radius": radius}


def gcp_search(path: CauchyPath, delta: float, t_prev: float,
               gp: GcpParams = GcpParams()) -> GcpResult:
    """Bidirectional step-length search for a (nonconvex) generalized Cauchy point."""
    if t_prev <= 0 or delta <= 0:
        raise ValueError("need t_prev > 0 and delta > 0")
    first = path.point(t_prev)
    best, t_B = first, None
    backtracks = expansions = 0
    if first.step_norm == 0:
        pass
    elif all(conditions_hold(first, delta, gp)):
        M = gp.M_inc
        if gp.t0 > t_prev:
            M = max(M, math.ceil(math.log(gp.t0 / t_prev, gp.beta_inc) - 1e-12))
        for l in range(1, M + 1):
            pt = path.point(t_prev * gp.beta_inc**l)
            expansions += 1
            if all(conditions_hold(pt, delta, gp)):
                best = pt
            elif t_B is None:
                t_B = pt.t
    else:
        pt = first
        while True:
            t_B = pt.t
            if backtracks >= MAX_BACKTRACKS:
                raise DegenerateStepError(
                    f"no acceptable Cauchy step after {MAX_BACKTRACKS} backtracks")
            pt = path.point(pt.t * gp.beta_dec)
            backtracks += 1
            if all(conditions_hold(pt, delta, gp)):
                best = pt
                break
    u = path.model.anchor
    return GcpResult(
        t_A=best.t, u_trial=u.like(u.values + best.step), step=best.step, Bstep=best.Bstep,
        step_norm=best.step_norm, q=best.q, decrease=best.decrease, mode=path.mode,
        t_B=t_B, backtracks=backtracks, expansions=expansions,
    )


def lower_condition_holds(res: GcpResult, gp: GcpParams = GcpParams()) -> bool:
    """``t_A >= nu2 t_B`` or ``t_A >= nu3``, with the first rejected step as ``t_B``."""
    return res.t_B is None or res.t_A >= gp.nu2 * res.t_B or res.t_A >= gp.nu3
