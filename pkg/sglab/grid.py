from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, unique
from typing import Callable

import numpy as np

from sglab.errors import GridError


@unique
class BoundaryKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class GridSpec:
    """
    A uniform space-time grid on [-L, L] x [0, T].

    The time step is derived from the Courant number, ``dt = cfl * dx``,
    and ``Nt`` slices cover ``[0, (Nt - 1) * dt] ⊇ [0, T]``.
    """

    L: float
    Nx: int
    T: float
    cfl: float
    dx: float
    dt: float
    Nt: int

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.Nx)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.Nt) * self.dt

    def same_as(self, other: GridSpec) -> bool:
        return (
            self.Nx == other.Nx
            and self.Nt == other.Nt
            and self.L == other.L
            and self.dt == other.dt
        )

    def check_same(self, other: GridSpec) -> None:
        if not self.same_as(other):
            raise GridError(f"Grid mismatch: {self} vs {other}")


def make_grid(L: float, Nx: int, T: float, cfl: float) -> GridSpec:
    for name, value in (("L", L), ("T", T), ("cfl", cfl)):
        if not math.isfinite(value):
            raise GridError(f"{name} must be finite, got {value}")
    if L <= 0:
        raise GridError(f"L must be positive, got {L}")
    if T <= 0:
        raise GridError(f"T must be positive, got {T}")
    if not 0 < cfl < 1:
        raise GridError(f"cfl must lie in (0, 1), got {cfl}")
    if int(Nx) != Nx or Nx < 3:
        raise GridError(f"Nx must be an integer >= 3, got {Nx}")

    Nx = int(Nx)
    dx = 2 * L / (Nx - 1)
    dt = cfl * dx
    Nt = math.ceil(T / dt) + 1

    return GridSpec(L=L, Nx=Nx, T=T, cfl=cfl, dx=dx, dt=dt, Nt=Nt)


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.Nx,):
            raise GridError(
                f"Field has shape {self.values.shape}, grid expects ({self.grid.Nx},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("Field contains non-finite values")

    @classmethod
    def zeros(cls, grid: GridSpec) -> Field:
        return cls(np.zeros(grid.Nx), grid)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> Field:
        return cls(np.asarray(fn(grid.x), dtype=float), grid)


def diff2_x_array(values: np.ndarray, dx: float, bc: BoundaryKind) -> np.ndarray:
    """
    Second difference along the last axis.

    Neumann rows use mirror ghosts f[-1] = f[1] and f[Nx] = f[Nx-2];
    Dirichlet boundary rows are zero.
    """
    out = np.zeros_like(values)
    out[..., 1:-1] = (values[..., :-2] - 2 * values[..., 1:-1] + values[..., 2:]) / dx**2

    if BoundaryKind(bc) is BoundaryKind.NEUMANN:
        out[..., 0] = 2 * (values[..., 1] - values[..., 0]) / dx**2
        out[..., -1] = 2 * (values[..., -2] - values[..., -1]) / dx**2

    return out


def diff2_x(f: Field, bc: BoundaryKind) -> Field:
    return Field(diff2_x_array(f.values, f.grid.dx, bc), f.grid)


def diff_x_array(values: np.ndarray, dx: float) -> np.ndarray:
    # forward differences, i.e. slopes at the Nx - 1 cell midpoints
    return np.diff(values, axis=-1) / dx


def diff_x(f: Field) -> np.ndarray:
    return diff_x_array(f.values, f.grid.dx)


def l2_inner_array(f: np.ndarray, g: np.ndarray, dx: float) -> np.ndarray:
    """Trapezoid inner product along the last axis; broadcasts over leading axes."""
    prod = f * g
    return dx * (prod.sum(axis=-1) - 0.5 * (prod[..., 0] + prod[..., -1]))


def l2_inner(f: Field, g: Field) -> float:
    f.grid.check_same(g.grid)
    return float(l2_inner_array(f.values, g.values, f.grid.dx))


def l2_norm_sq_array(values: np.ndarray, dx: float) -> np.ndarray:
    return l2_inner_array(values, values, dx)


def gradient_norm_sq_array(values: np.ndarray, dx: float) -> np.ndarray:
    slopes = diff_x_array(values, dx)
    return dx * np.sum(slopes**2, axis=-1)


def h1_norm_sq_array(values: np.ndarray, dx: float) -> np.ndarray:
    return l2_norm_sq_array(values, dx) + gradient_norm_sq_array(values, dx)


def h1_norm_sq(f: Field) -> float:
    """
    Discrete H¹ norm squared: the trapezoid L² norm of f plus the midpoint-rule
    L² norm of its forward-difference slopes.
    """
    return float(h1_norm_sq_array(f.values, f.grid.dx))
