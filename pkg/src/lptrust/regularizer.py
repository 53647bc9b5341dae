"""The L^p regularizer, its smoothing and its convex majorant.

    phi(u)     = beta * int |u|^p            + alpha/2 ||u||^2 + I_box(u)
    phi_eps(u) = beta * int psi_eps(u^2)     + alpha/2 ||u||^2 + I_box(u)
    phi_k(u)   = beta * j_k(u)               + alpha/2 ||u||^2 + I_box(u)

where ``psi_eps`` replaces ``t -> t^(p/2)`` by its tangent line below
``eps^2`` and ``j_k`` linearizes ``psi_eps`` in ``u^2`` at an anchor ``u_k``.
Because ``psi_eps`` is concave, ``j_k >= j_eps`` with equality at the anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import (
    BoxBounds,
    Grid,
    GridFunction,
    ShiftedLaplacian,
    Space,
    norm_values,
)

TIE_RTOL = 1e-12
NEWTON_MAXITER = 100
NEWTON_STEP_TOL = 1e-12


class ProxError(RuntimeError):
    """The scalar prox inner solve hit its iteration cap."""

    def __init__(self, message: str, small_candidate, large_candidate):
        super().__init__(message)
        self.small_candidate = small_candidate
        self.large_candidate = large_candidate


@dataclass
class Tally:
    """Evaluation counters owned by one solver run."""

    feval: int = 0
    grad: int = 0
    hess: int = 0
    prox_lp: int = 0

    def snapshot(self) -> dict:
        return dict(feval=self.feval, grad=self.grad, hess=self.hess, prox_lp=self.prox_lp)


@dataclass(frozen=True)
class RegularizerParams:
    p: float
    alpha: float
    beta: float
    box: BoxBounds = field(default_factory=BoxBounds)

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.beta < 0 or self.alpha < 0:
            raise ValueError("alpha and beta must be nonnegative")

    def check_space(self, space: Space) -> None:
        if space is Space.H01 and (self.alpha <= 0 or self.box.bounded):
            raise ValueError("H01 controls need alpha > 0 and an unbounded box")


@dataclass(frozen=True, eq=False)
class SmoothingState:
    eps: float
    anchor: GridFunction

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"smoothing parameter must be positive, got {self.eps}")


# ---------------------------------------------------------------------------
# scalar smoothing kernel (vectorized over numpy arrays)
# ---------------------------------------------------------------------------

def psi_eps(t, eps: float, p: float):
    t = np.asarray(t, dtype=float)
    if eps == 0:
        return t ** (p / 2)
    below = t < eps * eps
    e = np.float64(eps)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        lin = (p / 2) * np.where(below, t, 0.0) * np.power(e, p - 2) + (1 - p / 2) * e**p
        pw = np.where(below, 0.0, t) ** (p / 2)
    return np.where(below, lin, pw)


def psi_eps_prime(t, eps: float, p: float):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        tail = np.where(t > 0, t, 0.0) ** ((p - 2) / 2)
        cap = np.power(np.float64(eps), p - 2)
    return (p / 2) * np.minimum(cap, tail)


def majorant_weights(anchor: np.ndarray, eps: float, p: float) -> np.ndarray:
    """``psi_eps'(u_k^2)``, the pointwise curvature of the majorant's L^p part."""
    return psi_eps_prime(anchor * anchor, eps, p)


def _quad(grid: Grid, integrand: np.ndarray) -> float:
    return float(grid.h**2 * np.sum(integrand))


def j_exact(u: GridFunction, p: float) -> float:
    return _quad(u.grid, np.abs(u.values) ** p)


def j_eps(u: GridFunction, eps: float, p: float) -> float:
    return _quad(u.grid, psi_eps(u.values**2, eps, p))


def j_majorant(u: GridFunction, state: SmoothingState, p: float) -> float:
    return _quad(u.grid, _majorant_integrand(u.values, state.anchor.values, state.eps, p))


def _majorant_integrand(u, anchor, eps, p):
    t0 = anchor * anchor
    return psi_eps(t0, eps, p) + psi_eps_prime(t0, eps, p) * (u * u - t0)


# ---------------------------------------------------------------------------
# regularizer values
# ---------------------------------------------------------------------------

def phi_values(grid: Grid, space: Space, u: np.ndarray, params: RegularizerParams,
               eps: float | None = None, anchor: np.ndarray | None = None,
               anchor_eps: float | None = None) -> float:
    """Raw-array form of :func:`phi_value`.

    ``anchor`` selects the majorant (built with ``anchor_eps``); otherwise
    ``eps`` selects the smoothed variant and ``eps=None`` the exact one.
    """
    if not params.box.contains(u):
        return math.inf
    if anchor is not None:
        lp = _quad(grid, _majorant_integrand(u, anchor, anchor_eps, params.p))
    elif eps is None:
        lp = _quad(grid, np.abs(u) ** params.p)
    else:
        lp = _quad(grid, psi_eps(u * u, eps, params.p))
    quad = 0.5 * params.alpha * norm_values(grid, space, u) ** 2 if params.alpha else 0.0
    return params.beta * lp + quad


def phi_value(u: GridFunction, params: RegularizerParams, *, eps: float | None = None,
              state: SmoothingState | None = None) -> float:
    """Exact, smoothed (``eps``) or majorant (``state``) regularizer value.

    Returns ``inf`` outside the box.
    """
    if state is not None:
        return phi_values(u.grid, u.space, u.values, params,
                          anchor=state.anchor.values, anchor_eps=state.eps)
    return phi_values(u.grid, u.space, u.values, params, eps=eps)


# ---------------------------------------------------------------------------
# proximal maps of the convex majorant
# ---------------------------------------------------------------------------

def prox_majorant_values(grid: Grid, space: Space, v: np.ndarray, r: float,
                         anchor: np.ndarray, eps: float, params: RegularizerParams,
                         tol: float = 1e-10) -> np.ndarray:
    weights = majorant_weights(anchor, eps, params.p)
    if space is Space.L2:
        with np.errstate(over="ignore"):
            denom = 1.0 + params.alpha * r + 2.0 * r * params.beta * weights
        return np.clip(v / denom, params.box.lower, params.box.upper)
    # ((1 + alpha r) K + 2 beta r D) w = K v
    scale = 1.0 + params.alpha * r
    op = ShiftedLaplacian(grid, 2.0 * params.beta * r * weights / scale, tol=tol)
    return op.solve(grid.laplacian @ v / scale)


def prox_majorant_l2(v: GridFunction, r: float, state: SmoothingState,
                     params: RegularizerParams) -> GridFunction:
    if v.space is not Space.L2:
        raise ValueError("prox_majorant_l2 needs an L2 grid function")
    return v.like(prox_majorant_values(v.grid, v.space, v.values, r,
                                       state.anchor.values, state.eps, params))


def prox_majorant_h1(v: GridFunction, r: float, state: SmoothingState,
                     params: RegularizerParams, tol: float = 1e-10) -> GridFunction:
    if v.space is not Space.H01:
        raise ValueError("prox_majorant_h1 needs an H01 grid function")
    params.check_space(Space.H01)
    return v.like(prox_majorant_values(v.grid, v.space, v.values, r,
                                       state.anchor.values, state.eps, params, tol))


def prox_majorant(v: GridFunction, r: float, state: SmoothingState,
                  params: RegularizerParams, tol: float = 1e-10) -> GridFunction:
    if v.space is Space.L2:
        return prox_majorant_l2(v, r, state, params)
    return prox_majorant_h1(v, r, state, params, tol)


# ---------------------------------------------------------------------------
# proximal map of the smoothed (nonconvex) regularizer
# ---------------------------------------------------------------------------

def inflection_threshold(r: float, params: RegularizerParams) -> float:
    """Magnitude below which the smooth branch of the prox objective is concave."""
    p = params.p
    if p >= 1:
        return 0.0
    return (r * params.beta * p * (1 - p) / (1 + params.alpha * r)) ** (1 / (2 - p))


def prox_objective(w, v, r: float, eps: float, params: RegularizerParams):
    """Pointwise objective ``(w-v)^2/(2r) + alpha/2 w^2 + beta psi_eps(w^2)``."""
    w = np.asarray(w, dtype=float)
    return ((w - v) ** 2 / (2 * r) + 0.5 * params.alpha * w * w
            + params.beta * psi_eps(w * w, eps, params.p))


def _smooth_branch_minimizer(va: np.ndarray, r: float, lower: np.ndarray,
                             params: RegularizerParams) -> np.ndarray:
    """Minimizer of the smooth branch on ``[lower, inf)`` for ``va >= 0``.

    Beyond the inflection point the branch derivative
    ``g(w) = (w - va)/r + alpha w + beta p w^(p-1)`` is increasing and convex,
    so Newton started at ``va`` (where ``g > 0``) decreases monotonically to
    the root.  Bisection on the bracket guards against round-off.
    """
    p, alpha, beta = params.p, params.alpha, params.beta

    def g(w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (w - va) / r + alpha * w + beta * p * w ** (p - 1)

    def dg(w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return 1 / r + alpha + beta * p * (p - 1) * w ** (p - 2)

    out = lower.copy()
    g_low = g(lower)
    active = (g_low < 0) & (va > lower)
    if not np.any(active):
        return out
    idx = np.flatnonzero(active)
    lo = lower[idx].copy()
    hi = va[idx].copy()
    w = hi.copy()
    vv = va[idx]
    for _ in range(NEWTON_MAXITER):
        with np.errstate(divide="ignore", invalid="ignore"):
            gw = (w - vv) / r + alpha * w + beta * p * w ** (p - 1)
            dgw = 1 / r + alpha + beta * p * (p - 1) * w ** (p - 2)
        pos = gw > 0
        hi = np.where(pos, w, hi)
        lo = np.where(pos, lo, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = w - gw / dgw
        bad = ~np.isfinite(trial) | (trial <= lo) | (trial >= hi) | (dgw <= 0)
        trial = np.where(bad, 0.5 * (lo + hi), trial)
        step = np.abs(trial - w)
        w = trial
        if np.all(step <= NEWTON_STEP_TOL * np.maximum(1.0, w)):
            out[idx] = w
            return out
    raise ProxError("scalar prox Newton iteration did not converge", None, w)


def prox_smoothed_values(v: np.ndarray, r: float, eps: float,
                         params: RegularizerParams) -> np.ndarray:
    """Pointwise global minimizer of the smoothed prox objective, box included.

    ``eps = 0`` uses ``|w|^p`` exactly.  Candidates are the minimizer of the
    quadratic branch on ``[0, eps]``, the minimizer of the smooth branch past
    ``max(eps, u0(r))`` and the box endpoints; the best one wins, ties going
    to the candidate of smaller magnitude.
    """
    v = np.asarray(v, dtype=float)
    scalar = v.ndim == 0
    v = np.atleast_1d(v)
    p, alpha, beta = params.p, params.alpha, params.beta
    sign = np.where(v < 0, -1.0, 1.0)
    va = np.abs(v)
    # reflect the box so that the argument is nonnegative
    lo = np.where(sign > 0, params.box.lower, -params.box.upper)
    hi = np.where(sign > 0, params.box.upper, -params.box.lower)

    if eps > 0:
        with np.errstate(over="ignore"):
            curv = beta * r * p * np.power(np.float64(eps), p - 2)
        small = np.minimum(eps, va / (1 + alpha * r + curv))
    else:
        small = np.zeros_like(va)
    threshold = max(eps, inflection_threshold(r, params))
    large = _smooth_branch_minimizer(va, r, np.full_like(va, threshold), params)

    edge_lo = np.where(np.isfinite(lo), lo, small)
    edge_hi = np.where(np.isfinite(hi), hi, small)
    cands = np.stack([small, large, edge_lo, edge_hi])
    cands = np.clip(cands, lo, hi)
    objs = prox_objective(cands, va, r, eps, params)
    best = np.min(objs, axis=0)
    near = objs <= best + TIE_RTOL * np.abs(best) + 1e-300
    mags = np.where(near, np.abs(cands), np.inf)
    pick = np.argmin(mags, axis=0)
    w = sign * cands[pick, np.arange(va.size)]
    return w[0] if scalar else w


def prox_smoothed_scalar(v: float, r: float, eps: float, params: RegularizerParams) -> float:
    return float(prox_smoothed_values(np.asarray(float(v)), r, eps, params))


def prox_smoothed(v: GridFunction, r: float, eps: float, params: RegularizerParams,
                  tally: Tally | None = None) -> GridFunction:
    if v.space is not Space.L2:
        raise ValueError("the L^p prox is only separable in L2")
    if tally is not None:
        tally.prox_lp += 1
    return v.like(prox_smoothed_values(v.values, r, eps, params))


def sparsity_measure(u: GridFunction, tol: float = 1e-6) -> float:
    """Quadrature measure of ``{|u| <= tol}``."""
    return float(u.grid.h**2 * np.count_nonzero(np.abs(u.values) <= tol))


def default_sparsity_tol(box: BoxBounds) -> float:
    """``1e-6 * max(1, b)``: smoothed and majorized iterates only approach zero."""
    b = max(abs(box.lower), abs(box.upper))
    return 1e-6 * (max(1.0, b) if math.isfinite(b) else 1.0)
