"""Step improvement after the Cauchy point.

Both solvers start from the Cauchy trial, stay inside the trust region and
never increase the nonconvex model ``m_eps(u) = f_k(u) + phi_eps(u)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretization import GridFunction, Space, norm_values
from .gcp import GcpResult, UnsupportedConfiguration
from .regularizer import (
    RegularizerParams,
    Tally,
    phi_values,
    prox_majorant_values,
    prox_smoothed_values,
)
from .smooth_model import QuadraticModel

LINE_SEARCH_HALVINGS = 60
T_FLOOR = 1e-12


class NoFeasibleStepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpgParams:
    lambda_min: float = 1e-8
    lambda_max: float = 1e8
    max_iter: int = 10
    eps1: float = 1e-6
    eps2: float = 1e-6
    mu1: float = 1e-4
    beta1: float = 0.5

    def __post_init__(self):
        if not 0 < self.lambda_min < self.lambda_max:
            raise ValueError("need 0 < lambda_min < lambda_max")
        for name in ("eps1", "eps2", "mu1", "beta1"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass(frozen=True, eq=False)
class SubsolverResult:
    u: GridFunction
    step: np.ndarray       # u - u_k
    Bstep: np.ndarray      # B_k (u - u_k)
    model_value: float     # m_eps(u) - f(u_k)
    iterations: int


def largest_negative_t(f: Callable[[float], float], rel_width: float = 1e-3) -> float:
    """Largest ``t`` in ``(0, 1]`` with ``f(t) <= 0`` for a nondecreasing ``f``.

    Keeps a bracket ``f(lo) <= 0 < f(hi)`` and proposes secant or inverse
    quadratic points inside it, falling back to bisection whenever the proposal
    is poor.  Since only signs are used for bracketing, jumps in ``f`` are
    harmless.  Stops once ``hi <= lo * (1 + rel_width)``.
    """
    f_hi = f(1.0)
    if f_hi <= 0:
        return 1.0
    hi = 1.0
    lo, f_lo = None, None
    t = 0.5
    while t >= T_FLOOR:
        ft = f(t)
        if ft <= 0:
            lo, f_lo = t, ft
            break
        hi, f_hi = t, ft
        t *= 0.1 if t < 0.1 else 0.5
    if lo is None:
        raise NoFeasibleStepError("no feasible truncation parameter above 1e-12")

    prev = None  # third point for inverse quadratic interpolation
    bisect_next = False
    while hi > lo * (1 + rel_width):
        mid = 0.5 * (lo + hi)
        cand = mid
        if not bisect_next and f_hi > f_lo:
            cand = lo - f_lo * (hi - lo) / (f_hi - f_lo)
            if prev is not None:
                tc, fc = prev
                if len({f_lo, f_hi, fc}) == 3:
                    cand = (lo * f_hi * fc / ((f_lo - f_hi) * (f_lo - fc))
                            + hi * f_lo * fc / ((f_hi - f_lo) * (f_hi - fc))
                            + tc * f_lo * f_hi / ((fc - f_lo) * (fc - f_hi)))
            margin = 0.25 * rel_width * lo
            if not (lo + margin < cand < hi - margin):
                cand = mid
        ft = f(cand)
        width = hi - lo
        if ft <= 0:
            prev = (lo, f_lo)
            lo, f_lo = cand, ft
        else:
            prev = (hi, f_hi)
            hi, f_hi = cand, ft
        # force a bisection when the bracket did not at least halve
        bisect_next = (hi - lo) > 0.5 * width and cand != mid
    return lo


def _clip(v: np.ndarray, reg: RegularizerParams) -> np.ndarray:
    """Undo round-off excursions past the box."""
    return np.clip(v, reg.box.lower, reg.box.upper)


class _NonconvexModel:
    """``m_eps`` evaluated through tracked steps so that ``B s`` is formed once."""

    def __init__(self, model: QuadraticModel, eps: float, reg: RegularizerParams):
        self.m = model
        self.eps = eps
        self.reg = reg
        self.u = model.anchor.values
        self.g = model.g.values

    def phi(self, v):
        return phi_values(self.m.grid, self.m.space, v, self.reg, eps=self.eps)

    def value(self, step, Bstep) -> float:
        return self.m.value_of_step(step, Bstep) + self.phi(self.u + step)

    def norm(self, a) -> float:
        return norm_values(self.m.grid, self.m.space, a)


def spg_nonconvex(model: QuadraticModel, start: GcpResult, delta: float, eps: float,
                  reg: RegularizerParams, params: SpgParams = SpgParams(),
                  tally: Tally | None = None) -> SubsolverResult:
    """Proximal gradient on ``m_eps`` with BB-initialized, backtracked prox parameter.

    Prox points leaving the trust region are pulled back along the curve
    ``t -> prox_{r t phi_eps}(u_k + t (x - u_k))``.  The best iterate seen is
    returned.
    """
    if model.space is not Space.L2:
        raise UnsupportedConfiguration("the nonconvex SPG needs L2 controls")
    nc = _NonconvexModel(model, eps, reg)
    uk = nc.u

    def prox(x, r):
        if tally is not None:
            tally.prox_lp += 1
        return prox_smoothed_values(x, r, eps, reg)

    def trust_prox(x, r):
        w = prox(x, r)
        if nc.norm(w - uk) <= delta:
            return w
        t = largest_negative_t(lambda t: nc.norm(prox(uk + t * (x - uk), r * t) - uk) - delta)
        w = prox(uk + t * (x - uk), r * t)
        if nc.norm(w - uk) > delta:  # guard against round-off at the boundary
            w = uk + (w - uk) * (delta / nc.norm(w - uk))
        return w

    step, Bstep = start.step.copy(), start.Bstep.copy()
    val = nc.value(step, Bstep)
    best = (step, Bstep, val)
    s_bb, b_bb = step, Bstep
    h0 = None
    it = 0
    for it in range(1, params.max_iter + 1):
        d = nc.g + Bstep
        sb = model.dot(s_bb, b_bb)
        r = model.dot(s_bb, s_bb) / sb if sb > 0 else 1.0 / max(nc.norm(d), 1e-300)
        r = min(params.lambda_max, max(params.lambda_min, r))
        v = uk + step
        accepted = False
        for _ in range(LINE_SEARCH_HALVINGS):
            w = trust_prox(v - r * d, r)
            dv = w - v
            if not np.any(dv):
                break
            # u_k + step + dv can leave the box by an ulp
            dv = np.clip(v + dv, reg.box.lower, reg.box.upper) - v
            Bdv = model.hess(dv)
            new_step, new_B = step + dv, Bstep + Bdv
            new_val = nc.value(new_step, new_B)
            if new_val <= val - params.mu1 * model.dot(dv, dv) / r:
                accepted = True
                break
            r *= params.beta1
        if not accepted:
            break
        h = nc.norm(dv) / r
        if h0 is None:
            h0 = h
        s_bb, b_bb = dv, Bdv
        step, Bstep, val = new_step, new_B, new_val
        if val < best[2]:
            best = (step, Bstep, val)
        if h <= min(params.eps1, params.eps2 * h0):
            break
    step, Bstep, val = best
    return SubsolverResult(model.anchor.like(uk + step), step, Bstep, val, it)


def mm_spg(model: QuadraticModel, start: GcpResult, delta: float, eps: float,
           reg: RegularizerParams, params: SpgParams = SpgParams(max_iter=50),
           on_step: Callable[[float], None] | None = None) -> SubsolverResult:
    """Convexified SPG: majorize ``phi_eps`` at each inner iterate and take SPG steps.

    ``on_step`` receives the nonconvex model value after each inner step.
    """
    space = model.space
    grid = model.grid
    uk = model.anchor.values
    g = model.g.values

    def nrm(a):
        return norm_values(grid, space, a)

    def phi_l(v, anchor):
        if nrm(v - uk) > delta * (1 + 1e-12):
            return np.inf
        return phi_values(grid, space, v, reg, anchor=anchor, anchor_eps=eps)

    def prox_l(x, lam, anchor):
        w = prox_majorant_values(grid, space, x, lam, anchor, eps, reg)
        if nrm(w - uk) <= delta:
            return w
        if space is Space.H01:
            return uk + (w - uk) * (delta / nrm(w - uk))
        t = largest_negative_t(lambda t: nrm(
            prox_majorant_values(grid, space, uk + t * (x - uk), lam * t, anchor, eps, reg)
            - uk) - delta)
        w = prox_majorant_values(grid, space, uk + t * (x - uk), lam * t, anchor, eps, reg)
        if nrm(w - uk) > delta:
            w = uk + (w - uk) * (delta / nrm(w - uk))
        return w

    u = uk + start.step
    Bstep = start.Bstep.copy()
    f_l = model.value_of_step(start.step, Bstep)
    d = g + Bstep
    s, b = start.step, start.Bstep
    h0 = None
    l = 0
    while l < params.max_iter:
        sb = model.dot(b, s)
        lam = model.dot(s, s) / sb if sb > 0 else 1.0 / max(nrm(d), 1e-300)
        lam = max(params.lambda_min, min(params.lambda_max, lam))
        s = prox_l(u - lam * d, lam, u) - u
        h = nrm(s) / lam
        if h0 is None:
            h0 = h
        if h <= min(params.eps1, params.eps2 * h0) or not np.any(s):
            break
        b = model.hess(s)
        phi_u = phi_l(u, u)
        ds, bs = model.dot(d, s), model.dot(b, s)
        a1 = 1.0
        for _ in range(LINE_SEARCH_HALVINGS):
            f_next = f_l + a1 * ds + 0.5 * a1 * a1 * bs
            phi_next = phi_l(_clip(u + a1 * s, reg), u)
            if f_next + phi_next <= f_l + phi_u + params.mu1 * (a1 * ds + phi_next - phi_u):
                break
            a1 *= params.beta1
        else:
            break
        u = _clip(u + a1 * s, reg)
        d = d + a1 * b
        Bstep = Bstep + a1 * b
        f_l = f_next
        l += 1
        if on_step is not None:
            on_step(f_l + phi_values(grid, space, u, reg, eps=eps))
    step = u - uk
    val = f_l + phi_values(grid, space, u, reg, eps=eps)
    return SubsolverResult(model.anchor.like(u), step, Bstep, val, l)
