"""Smoothing-parameter sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FactorialSchedule:
    """``eps_k = eps0 / (k+1)!``, never below ``floor``."""

    eps0: float = 1e-6
    floor: float = 1e-130

    def __call__(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be nonnegative")
        log10 = math.log10(self.eps0) - math.lgamma(k + 2) / math.log(10)
        if log10 <= math.log10(self.floor):
            return self.floor
        return max(self.floor, self.eps0 / math.factorial(k + 1))


@dataclass(frozen=True)
class EpsSchedule:
    """``eps_k = scale * 0.1**k / k!``, never below ``floor``."""

    scale: float = 0.1
    floor: float = 1e-130

    def __post_init__(self):
        if self.scale <= 0 or self.floor <= 0 or self.floor > self.scale:
            raise ValueError("need 0 < floor <= scale")

    def __call__(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be nonnegative")
        log10 = math.log10(self.scale) - k - math.lgamma(k + 1) / math.log(10)
        if log10 <= math.log10(self.floor):
            return self.floor
        return max(self.floor, self.scale * 10.0 ** (-k) / math.factorial(k))


def default_schedule(p: float) -> EpsSchedule:
    """Very small values for strongly nonconvex exponents."""
    return EpsSchedule(scale=0.1 if p >= 0.3 else 1e-12)


@dataclass(frozen=True)
class GeometricSchedule:
    """``eps_k = eps0 * q**k``, never below ``floor``."""

    eps0: float = 0.1
    q: float = 0.9
    floor: float = 1e-130

    def __post_init__(self):
        if not (0 < self.q < 1 and 0 < self.floor <= self.eps0):
            raise ValueError("need 0 < q < 1 and 0 < floor <= eps0")

    def __call__(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be nonnegative")
        return max(self.floor, self.eps0 * self.q**k)
