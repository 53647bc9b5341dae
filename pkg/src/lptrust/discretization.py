"""Uniform interior-node grids on the unit square.

Controls, states and gradients are stored as flat arrays of length ``n*n``
(row-major over the x index).  Integrals use the midpoint rule ``h^2 sum``.
The H_0^1 inner product is the discrete Dirichlet form ``h^2 u^T K v`` with
``K`` the 5-point negative Laplacian scaled by ``1/h^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# relative overshoot of a box bound still treated as feasible
BOX_SLACK = 1e-14


class Space(str, enum.Enum):
    L2 = "l2"
    H01 = "h01"


class SolverError(RuntimeError):
    """A linear or nonlinear solve did not reach its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs n >= 2 interior nodes per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def area(self) -> float:
        """Quadrature area of the node set, ``n^2 h^2``."""
        return self.size * self.h**2

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened node coordinates ``(x, y)``."""
        t = np.arange(1, self.n + 1) * self.h
        X, Y = np.meshgrid(t, t, indexing="ij")
        return X.ravel(), Y.ravel()

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """5-point negative Laplacian with homogeneous Dirichlet data, scaled by 1/h^2."""
        n = self.n
        T = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
        I = sp.identity(n)
        K = (sp.kron(T, I) + sp.kron(I, T)) / self.h**2
        return K.tocsr()

    def __hash__(self):
        return hash(self.n)

    def __eq__(self, other):
        return isinstance(other, Grid) and other.n == self.n


@dataclass(frozen=True)
class BoxBounds:
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"box needs lower < upper, got [{self.lower}, {self.upper}]")

    @classmethod
    def symmetric(cls, b: float) -> "BoxBounds":
        return cls(-b, b)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) or math.isfinite(self.upper)

    def contains(self, values: np.ndarray, slack: float = BOX_SLACK) -> bool:
        """Membership up to ``slack`` relative to the bound, which absorbs round-off."""
        lo = self.lower - slack * max(1.0, abs(self.lower))
        hi = self.upper + slack * max(1.0, abs(self.upper))
        return bool(np.all(values >= lo) and np.all(values <= hi))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray
    space: Space = Space.L2

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", v)

    def like(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values, self.space)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_compatible(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_compatible(self, other)
        return self.like(self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return self.like(scalar * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return self.like(-self.values)

    @classmethod
    def zeros(cls, grid: Grid, space: Space = Space.L2) -> "GridFunction":
        return cls(grid, np.zeros(grid.size), space)

    @classmethod
    def from_callable(cls, grid: Grid, fn, space: Space = Space.L2) -> "GridFunction":
        x, y = grid.coordinates()
        return cls(grid, np.broadcast_to(fn(x, y), (grid.size,)).astype(float), space)


def _check_compatible(u: GridFunction, v: GridFunction) -> None:
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: n={u.grid.n} vs n={v.grid.n}")
    if u.space != v.space:
        raise ValueError(f"space mismatch: {u.space.value} vs {v.space.value}")


def inner_values(grid: Grid, space: Space, u: np.ndarray, v: np.ndarray) -> float:
    """Inner product on raw value arrays; the hot path used by the solvers."""
    if space is Space.L2:
        return float(grid.h**2 * np.dot(u, v))
    return float(grid.h**2 * np.dot(u, grid.laplacian @ v))


def norm_values(grid: Grid, space: Space, u: np.ndarray) -> float:
    return math.sqrt(max(inner_values(grid, space, u, u), 0.0))


def inner(u: GridFunction, v: GridFunction) -> float:
    _check_compatible(u, v)
    return inner_values(u.grid, u.space, u.values, v.values)


def norm(u: GridFunction) -> float:
    return norm_values(u.grid, u.space, u.values)


def project_box(u: GridFunction, box: BoxBounds) -> GridFunction:
    return u.like(np.clip(u.values, box.lower, box.upper))


class ShiftedLaplacian:
    """Factorized operator ``K + diag(c)`` for repeated solves.

    ``method="direct"`` uses a sparse LU factorization; ``method="cg"`` runs
    Jacobi-preconditioned conjugate gradients.  Both check the residual bound
    ``||A y - rhs||_L2 <= tol * max(1, ||rhs||_L2)`` on every return.
    """

    def __init__(self, grid: Grid, c=0.0, tol: float = 1e-10, method: str = "direct",
                 maxiter: int | None = None):
        c = np.broadcast_to(np.asarray(c, dtype=float), (grid.size,))
        if np.any(c < 0):
            raise ValueError("shift c must be nonnegative")
        self.grid = grid
        self.tol = tol
        self.method = method
        self.maxiter = maxiter if maxiter is not None else 20 * grid.size
        self.matrix = (grid.laplacian + sp.diags(c)).tocsc()
        self._diag = self.matrix.diagonal()
        self._lu = spla.splu(self.matrix) if method == "direct" else None

    def _l2(self, r: np.ndarray) -> float:
        return self.grid.h * float(np.linalg.norm(r))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        bound = self.tol * max(1.0, self._l2(rhs))
        if not np.any(rhs):
            return np.zeros_like(rhs)
        if self._lu is not None:
            y = self._lu.solve(rhs)
            res = rhs - self.matrix @ y
            for _ in range(3):
                if self._l2(res) <= bound:
                    return y
                y = y + self._lu.solve(res)
                res = rhs - self.matrix @ y
        else:
            y = self._cg(rhs, bound)
            res = rhs - self.matrix @ y
        achieved = self._l2(res)
        if achieved > bound:
            raise SolverError("shifted Laplacian solve missed its tolerance", achieved)
        return y

    def _cg(self, rhs: np.ndarray, bound: float) -> np.ndarray:
        # residual target in the Euclidean norm of the raw vector
        target = bound / self.grid.h
        A, dinv = self.matrix, 1.0 / self._diag
        y = np.zeros_like(rhs)
        r = rhs.copy()
        z = dinv * r
        d = z.copy()
        rz = float(r @ z)
        for _ in range(self.maxiter):
            if np.linalg.norm(r) <= target:
                break
            Ad = A @ d
            step = rz / float(d @ Ad)
            y += step * d
            r -= step * Ad
            z = dinv * r
            rz_new = float(r @ z)
            d = z + (rz_new / rz) * d
            rz = rz_new
        return y


def solve_shifted_laplacian(c, rhs: GridFunction, tol: float = 1e-10,
                            method: str = "cg") -> GridFunction:
    """Solve ``(K + diag(c)) y = rhs`` with homogeneous Dirichlet boundary."""
    if isinstance(c, GridFunction):
        c = c.values
    op = ShiftedLaplacian(rhs.grid, c, tol=tol, method=method)
    return rhs.like(op.solve(rhs.values))
