"""Tracking-type optimal control problems on the unit square.

    f(u) = 1/2 ||S u - y_d||^2_L2,    -Laplace y (+ y^3) = chi_omega u,  y = 0 on the boundary.

Gradients come from the adjoint equation and Hessian products from the
second-order adjoint; both are returned in the control space's Riesz form.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .discretization import BoxBounds, Grid, GridFunction, ShiftedLaplacian, Space, SolverError
from .regularizer import RegularizerParams, Tally
from .smooth_model import SmoothObjective

NEWTON_MAXITER = 50


class Kind(str, enum.Enum):
    POISSON = "poisson"
    SEMILINEAR = "semilinear"


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    kind: Kind
    y_d: GridFunction
    mask: np.ndarray
    space: Space
    regularizer: RegularizerParams
    pde_tol: float = 1e-10
    tracking_offset: float = 0.0  # boundary-node share of 1/2 ||y_d||^2, where y = 0

    def __post_init__(self):
        if not np.all((self.mask == 0) | (self.mask == 1)):
            raise ValueError("control mask must be 0/1 valued")
        self.regularizer.check_space(self.space)

    @property
    def grid(self) -> Grid:
        return self.y_d.grid

    def zero_control(self) -> GridFunction:
        return GridFunction.zeros(self.grid, self.space)


@dataclass(frozen=True)
class StateSolve:
    y: np.ndarray
    iterations: int
    residual: float


@lru_cache(maxsize=16)
def _laplace_solver(grid: Grid, tol: float) -> ShiftedLaplacian:
    return ShiftedLaplacian(grid, 0.0, tol=tol)


def _l2norm(grid: Grid, r: np.ndarray) -> float:
    return grid.h * float(np.linalg.norm(r))


def solve_state(spec: ProblemSpec, u: GridFunction, tol: float | None = None) -> StateSolve:
    tol = spec.pde_tol if tol is None else tol
    grid = spec.grid
    rhs = spec.mask * u.values
    if spec.kind is Kind.POISSON:
        y = _laplace_solver(grid, tol).solve(rhs)
        return StateSolve(y, 1, _l2norm(grid, grid.laplacian @ y - rhs))
    K = grid.laplacian
    y = np.zeros(grid.size)
    res = K @ y + y**3 - rhs
    for it in range(NEWTON_MAXITER + 1):
        rn = _l2norm(grid, res)
        if rn <= tol:
            return StateSolve(y, it, rn)
        if it == NEWTON_MAXITER:
            break
        y = y - ShiftedLaplacian(grid, 3 * y * y, tol=1e-2 * tol).solve(res)
        res = K @ y + y**3 - rhs
    raise SolverError("semilinear Newton iteration hit its cap", rn)


class TrackingObjective(SmoothObjective):
    """``f`` for a :class:`ProblemSpec`, with per-control state caching."""

    def __init__(self, spec: ProblemSpec, tally: Tally | None = None):
        self.spec = spec
        self.grid = spec.grid
        self.space = spec.space
        self.tally = tally if tally is not None else Tally()
        self._cache: dict[bytes, dict] = {}

    def _entry(self, u: GridFunction) -> dict:
        key = u.values.tobytes()
        entry = self._cache.get(key)
        if entry is None:
            if len(self._cache) >= 4:
                self._cache.pop(next(iter(self._cache)))
            entry = {"y": solve_state(self.spec, u).y}
            self._cache[key] = entry
        return entry

    def _jacobian(self, entry: dict) -> ShiftedLaplacian:
        if "jac" not in entry:
            if self.spec.kind is Kind.POISSON:
                entry["jac"] = _laplace_solver(self.grid, self.spec.pde_tol)
            else:
                y = entry["y"]
                entry["jac"] = ShiftedLaplacian(self.grid, 3 * y * y, tol=self.spec.pde_tol)
        return entry["jac"]

    def _riesz(self, l2_rep: np.ndarray) -> np.ndarray:
        if self.space is Space.L2:
            return l2_rep
        return _laplace_solver(self.grid, self.spec.pde_tol).solve(l2_rep)

    def state(self, u: GridFunction) -> np.ndarray:
        return self._entry(u)["y"]

    def value(self, u: GridFunction) -> float:
        self.tally.feval += 1
        diff = self._entry(u)["y"] - self.spec.y_d.values
        return 0.5 * self.grid.h**2 * float(diff @ diff) + self.spec.tracking_offset

    def _adjoint(self, entry: dict) -> np.ndarray:
        if "q" not in entry:
            entry["q"] = self._jacobian(entry).solve(entry["y"] - self.spec.y_d.values)
        return entry["q"]

    def gradient(self, u: GridFunction) -> GridFunction:
        self.tally.grad += 1
        entry = self._entry(u)
        q = self._adjoint(entry)
        return u.like(self._riesz(self.spec.mask * q))

    def hess_vec(self, u: GridFunction, s: GridFunction) -> GridFunction:
        self.tally.hess += 1
        entry = self._entry(u)
        jac = self._jacobian(entry)
        dy = jac.solve(self.spec.mask * s.values)
        rhs = dy
        if self.spec.kind is Kind.SEMILINEAR:
            rhs = dy - 6 * entry["y"] * self._adjoint(entry) * dy
        w = jac.solve(rhs)
        return u.like(self._riesz(self.spec.mask * w))


def objective_value(spec: ProblemSpec, u: GridFunction) -> float:
    return TrackingObjective(spec).value(u)


def gradient(spec: ProblemSpec, u: GridFunction) -> GridFunction:
    return TrackingObjective(spec).gradient(u)


def hess_vec(spec: ProblemSpec, u: GridFunction, s: GridFunction) -> GridFunction:
    return TrackingObjective(spec).hess_vec(u, s)


# ---------------------------------------------------------------------------
# built-in configurations
# ---------------------------------------------------------------------------

PROBLEMS = ("poisson", "s1", "s2", "s2-localized")

_SETUPS = {
    # id: (kind, desired state, alpha, beta, b)
    "poisson": (Kind.POISSON, lambda x, y: 10 * x * np.sin(5 * x) * np.cos(7 * y), 0.01, 0.01, 4.0),
    "s1": (Kind.SEMILINEAR,
           lambda x, y: 4 * np.sin(2 * np.pi * x) * np.sin(np.pi * y) * np.exp(x), 0.002, 0.03, 12.0),
    "s2": (Kind.SEMILINEAR, lambda x, y: -np.ones_like(x), 1e-4, 1e-2, 25.0),
    "s2-localized": (Kind.SEMILINEAR, lambda x, y: -np.ones_like(x), 1e-4, 1e-2, 25.0),
}

LOCAL_CENTER = (0.6, 0.4)
LOCAL_RADIUS = 0.4


def disc_mask(grid: Grid, center=LOCAL_CENTER, radius=LOCAL_RADIUS) -> np.ndarray:
    x, y = grid.coordinates()
    return ((x - center[0]) ** 2 + (y - center[1]) ** 2 < radius**2).astype(float)


def boundary_tracking(grid: Grid, target) -> float:
    """Trapezoid-rule contribution of ``1/2 y_d^2`` from the boundary nodes.

    The state vanishes there, so adding it turns the interior sum into the
    trapezoid rule on the closed square without touching derivatives.
    """
    t = np.linspace(0.0, 1.0, grid.n + 2)
    inner = t[1:-1]
    total = 0.0
    for x, y in ((t, 0 * t), (t, 0 * t + 1), (0 * inner, inner), (0 * inner + 1, inner)):
        w = np.full(x.shape, 0.5)
        if x.size == t.size:
            w[[0, -1]] = 0.25
        total += float(w @ target(x, y) ** 2)
    return 0.5 * grid.h**2 * total


def make_spec(problem: str, n: int, p: float, space: Space | str = Space.L2,
              constrained: bool = True, pde_tol: float = 1e-10) -> ProblemSpec:
    if problem not in _SETUPS:
        raise ValueError(f"unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}")
    space = Space(space)
    kind, target, alpha, beta, b = _SETUPS[problem]
    grid = Grid(n)
    if space is Space.H01:
        constrained = False
    box = BoxBounds.symmetric(b) if constrained else BoxBounds()
    mask = disc_mask(grid) if problem == "s2-localized" else np.ones(grid.size)
    flavor = "c" if constrained else "u"
    return ProblemSpec(
        name=f"{problem}-{space.value}-{flavor}",
        kind=kind,
        y_d=GridFunction.from_callable(grid, target),
        mask=mask,
        space=space,
        regularizer=RegularizerParams(p, alpha, beta, box),
        pde_tol=pde_tol,
        tracking_offset=boundary_tracking(grid, target),
    )


def builtin_specs(n: int, p: float = 0.5) -> list[ProblemSpec]:
    """Every named configuration in its constrained and unconstrained L2 flavors,
    plus the semilinear examples posed in H01."""
    specs = [make_spec(name, n, p, Space.L2, c) for name in PROBLEMS for c in (True, False)]
    specs += [make_spec(name, n, p, Space.H01, False) for name in ("s1", "s2")]
    return specs
