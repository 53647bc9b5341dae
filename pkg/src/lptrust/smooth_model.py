"""Smooth part of the composite objective and its local quadratic model."""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretization import Grid, GridFunction, Space, inner_values
from .regularizer import Tally


class SmoothObjective(abc.ABC):
    """Value, gradient and Hessian-vector products of ``f`` in the control space.

    Gradients and Hessian products are Riesz representatives with respect to
    the inner product of ``space``.  Evaluations are counted in ``tally``.
    """

    grid: Grid
    space: Space
    tally: Tally

    @abc.abstractmethod
    def value(self, u: GridFunction) -> float: ...

    @abc.abstractmethod
    def gradient(self, u: GridFunction) -> GridFunction: ...

    @abc.abstractmethod
    def hess_vec(self, u: GridFunction, s: GridFunction) -> GridFunction: ...


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """``f_k(u) = <g_k, u - u_k> + 1/2 <B_k (u - u_k), u - u_k>``.

    ``hess`` maps raw value arrays to raw value arrays; every call counts as
    one Hessian evaluation on the owning objective.
    """

    anchor: GridFunction
    g: GridFunction
    hess: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def build(cls, objective: SmoothObjective, u: GridFunction) -> "QuadraticModel":
        g = objective.gradient(u)
        return cls(u, g, lambda s: objective.hess_vec(u, u.like(s)).values)

    @property
    def grid(self) -> Grid:
        return self.anchor.grid

    @property
    def space(self) -> Space:
        return self.anchor.space

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return inner_values(self.grid, self.space, a, b)

    def value_of_step(self, s: np.ndarray, Bs: np.ndarray | None = None) -> float:
        if Bs is None:
            Bs = self.hess(s)
        return self.dot(self.g.values, s) + 0.5 * self.dot(Bs, s)


def model_value(m: QuadraticModel, u: GridFunction) -> float:
    return m.value_of_step((u - m.anchor).values)


def curvature(m: QuadraticModel, s: GridFunction, Bs: np.ndarray | None = None) -> float:
    """``<s, B s> / ||s||^2``, the exact curvature of a quadratic along ``s``."""
    ss = m.dot(s.values, s.values)
    if ss <= 0:
        raise ValueError("curvature is undefined for a zero step")
    if Bs is None:
        Bs = m.hess(s.values)
    return m.dot(s.values, Bs) / ss


def omega_k_estimate(m: QuadraticModel, s_trial: GridFunction,
                     Bs: np.ndarray | None = None) -> float:
    """Curvature magnitude along the trial step, standing in for the sup over the ball."""
    return abs(curvature(m, s_trial, Bs))
