from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from sglab.errors import SolitonDomainError
from sglab.grid import Field, GridSpec

ArrayLike = Union[float, np.ndarray]

# beyond this phase argument exp() is replaced by the tail asymptotics
ASYMPTOTIC_CUTOFF = 40.0


@dataclass(frozen=True)
class SolitonParams:
    v: float = 0.0
    x0: float = 0.0

    def __post_init__(self) -> None:
        if not abs(self.v) < 1:
            raise SolitonDomainError(f"Kink velocity must satisfy |v| < 1, got {self.v}")

    @property
    def gamma(self) -> float:
        return gamma(self.v)


def gamma(v: float) -> float:
    if not abs(v) < 1:
        raise SolitonDomainError(f"Lorentz factor undefined for |v| >= 1, got {v}")
    return 1 / math.sqrt(1 - v * v)


def _phase(x: ArrayLike, t: float, p: SolitonParams) -> np.ndarray:
    xi = np.asarray(x, dtype=float) - p.x0
    return p.gamma * (xi - p.v * t)


def _sech(s: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(s))
    return 2 * e / (1 + e * e)


def kink(x: ArrayLike, t: float, p: SolitonParams) -> np.ndarray:
    """The 0 → 2π kink 4·arctan(exp(γ(x − vt − x0)))."""
    s = _phase(x, t, p)
    core = 4 * np.arctan(np.exp(np.clip(s, -ASYMPTOTIC_CUTOFF, ASYMPTOTIC_CUTOFF)))
    low = 4 * np.exp(np.minimum(s, 0))
    high = 2 * np.pi - 4 * np.exp(-np.maximum(s, 0))
    return np.where(s > ASYMPTOTIC_CUTOFF, high, np.where(s < -ASYMPTOTIC_CUTOFF, low, core))


def kink_dt(x: ArrayLike, t: float, p: SolitonParams) -> np.ndarray:
    return -2 * p.gamma * p.v * _sech(_phase(x, t, p))


def kink_dx(x: ArrayLike, t: float, p: SolitonParams) -> np.ndarray:
    return 2 * p.gamma * _sech(_phase(x, t, p))


def kink_dtt(x: ArrayLike, t: float, p: SolitonParams) -> np.ndarray:
    s = _phase(x, t, p)
    return -2 * (p.gamma * p.v) ** 2 * _sech(s) * np.tanh(s)


def kink_field(grid: GridSpec, t: float, p: SolitonParams) -> Field:
    return Field(kink(grid.x, t, p), grid)


def kink_dt_field(grid: GridSpec, t: float, p: SolitonParams) -> Field:
    return Field(kink_dt(grid.x, t, p), grid)


def kink_history(grid: GridSpec, p: SolitonParams) -> np.ndarray:
    """φ sampled at every grid time level, shape (Nt, Nx)."""
    return np.stack([kink(grid.x, t, p) for t in grid.t])
