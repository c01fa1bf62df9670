from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, unique
from typing import Optional, Tuple, Union

import numpy as np

from sglab.errors import CFLViolation, GridError, SolutionBlowUp
from sglab.grid import BoundaryKind, Field, GridSpec, diff2_x_array
from sglab.message import Source
from sglab.renderer import NullRenderer, Renderer
from sglab.soliton import SolitonParams, kink, kink_dt

ArrayLike = Union[float, np.ndarray]


@unique
class ProblemKind(str, Enum):
    FULL = "full"
    PERTURBATION = "perturbation"
    LINEARIZED = "linearized"

    @property
    def needs_background(self) -> bool:
        return self is not ProblemKind.FULL


@dataclass(frozen=True)
class ForcingSpec:
    """g(x, t) = A cos(nπx/L) + B cos(nπt/T)."""

    A: float = 0.0
    B: float = 0.0
    n: int = 0
    L: float = 1.0
    T: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"Forcing mode must be non-negative, got {self.n}")
        if not (np.isfinite(self.A) and np.isfinite(self.B)):
            raise ValueError("Forcing amplitudes must be finite")

    @property
    def is_zero(self) -> bool:
        return self.A == 0 and self.B == 0


def forcing_eval(f: ForcingSpec, x: ArrayLike, t: float) -> np.ndarray:
    return f.A * np.cos(f.n * np.pi * np.asarray(x) / f.L) + f.B * np.cos(f.n * np.pi * t / f.T)


def nonlinear_term(
    kind: ProblemKind, phi: ArrayLike, eta: ArrayLike, epsilon: float
) -> np.ndarray:
    """
    The zeroth-order term of each equation variant.

    The perturbation difference quotient uses the product form
    sin(a + b) - sin(a) = 2 cos(a + b/2) sin(b/2), which has no cancellation for small ε.
    """
    eta = np.asarray(eta, dtype=float)
    if kind is ProblemKind.FULL:
        return np.sin(eta)
    elif kind is ProblemKind.PERTURBATION:
        half = 0.5 * epsilon * eta
        return 2 * np.cos(phi + half) * np.sin(half) / epsilon
    elif kind is ProblemKind.LINEARIZED:
        return np.cos(phi) * eta
    else:  # pragma: unreachable
        raise Exception("unreachable")


@dataclass(frozen=True)
class ProblemConfig:
    kind: ProblemKind
    grid: GridSpec
    u0: Field
    v0: Field
    epsilon: float = 1.0
    soliton: SolitonParams = field(default_factory=SolitonParams)
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    bc: BoundaryKind = BoundaryKind.NEUMANN
    lam: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.lam >= 0:
            raise ValueError(f"damping must be non-negative, got {self.lam}")
        self.grid.check_same(self.u0.grid)
        self.grid.check_same(self.v0.grid)

    @property
    def forcing_scale(self) -> float:
        # the Full equation carries ε g on its right-hand side
        return self.epsilon if self.kind is ProblemKind.FULL else 1.0

    def source(self, t: float) -> np.ndarray:
        return self.forcing_scale * forcing_eval(self.forcing, self.grid.x, t)

    def with_initial(self, u0: Field, v0: Field) -> ProblemConfig:
        return replace(self, u0=u0, v0=v0)


@dataclass(frozen=True)
class StateHistory:
    data: np.ndarray
    grid: GridSpec
    kind: ProblemKind
    config: Optional[ProblemConfig] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[1] != self.grid.Nx:
            raise GridError(f"History shape {self.data.shape} does not match Nx={self.grid.Nx}")

    @property
    def Nt(self) -> int:
        return int(self.data.shape[0])

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.Nt) * self.grid.dt

    def field(self, step: int) -> Field:
        return Field(self.data[step], self.grid)

    def step_at(self, t: float) -> int:
        return int(np.clip(round(t / self.grid.dt), 0, self.Nt - 1))

    def snapshot(self, t: float) -> Field:
        return self.field(self.step_at(t))


def lift_initial_data(
    grid: GridSpec, p: SolitonParams, epsilon: float, eta0: Field, eta_t0: Field
) -> Tuple[Field, Field]:
    """Full-equation data u0 = φ(·,0) + ε η0, v0 = φ_t(·,0) + ε η_t0."""
    u0 = kink(grid.x, 0.0, p) + epsilon * eta0.values
    v0 = kink_dt(grid.x, 0.0, p) + epsilon * eta_t0.values
    return Field(u0, grid), Field(v0, grid)


def damping_stability_limit(grid: GridSpec) -> float:
    """
    Largest λ for which the explicit damping term keeps the highest grid mode bounded:
    λ dt / dx² < (1 − (dt/dx)²) / 2.
    """
    courant = grid.dt / grid.dx
    return (1 - courant**2) / 2 * grid.dx**2 / grid.dt


def solve(cfg: ProblemConfig, renderer: Optional[Renderer] = None) -> StateHistory:
    """
    Integrate one equation variant with the explicit leapfrog scheme.

    Raises :class:`SolutionBlowUp` carrying the finite prefix of the history
    if any value becomes non-finite.
    """
    renderer = renderer or NullRenderer()
    grid = cfg.grid
    dx, dt = grid.dx, grid.dt

    if not dt / dx < 1:
        raise CFLViolation(f"dt/dx = {dt / dx} violates the CFL limit 1")
    damping_limit = damping_stability_limit(grid)
    if not cfg.lam < damping_limit:
        raise CFLViolation(
            f"damping {cfg.lam} exceeds the explicit stability limit {damping_limit:.4g} "
            f"of this grid; lower cfl or refine"
        )

    kind = ProblemKind(cfg.kind)
    bc = BoundaryKind(cfg.bc)
    x = grid.x

    renderer.debug(
        f"Solving {kind.value} problem on Nx={grid.Nx}, Nt={grid.Nt}, dx={dx:.4g}, dt={dt:.4g}",
        source=Source.SOLVER,
    )

    def background(step: int) -> Union[float, np.ndarray]:
        return kink(x, step * dt, cfg.soliton) if kind.needs_background else 0.0

    def acceleration(step: int, w: np.ndarray, lap: np.ndarray) -> np.ndarray:
        return lap - nonlinear_term(kind, background(step), w, cfg.epsilon) + cfg.source(step * dt)

    data = np.empty((grid.Nt, grid.Nx))
    w0 = cfg.u0.values
    data[0] = w0

    def pin(w: np.ndarray) -> np.ndarray:
        if bc is BoundaryKind.DIRICHLET:
            w[0], w[-1] = w0[0], w0[-1]
        return w

    def check(step: int, w: np.ndarray) -> None:
        if not np.all(np.isfinite(w)):
            raise SolutionBlowUp(
                step, StateHistory(data[:step].copy(), grid=grid, kind=kind, config=cfg)
            )

    with np.errstate(over="ignore", invalid="ignore"):
        lap_prev = diff2_x_array(w0, dx, bc)
        w1 = (
            w0
            + dt * cfg.v0.values
            + 0.5 * dt**2 * acceleration(0, w0, lap_prev)
            + 0.5 * cfg.lam * dt**2 * diff2_x_array(cfg.v0.values, dx, bc)
        )
        w1 = pin(w1)
        check(1, w1)
        data[1] = w1

        for step in range(1, grid.Nt - 1):
            w, w_prev = data[step], data[step - 1]
            lap = diff2_x_array(w, dx, bc)
            w_next = 2 * w - w_prev + dt**2 * acceleration(step, w, lap)
            if cfg.lam:
                w_next += cfg.lam * dt * (lap - lap_prev)
            w_next = pin(w_next)
            check(step + 1, w_next)
            data[step + 1] = w_next
            lap_prev = lap

    renderer.debug(
        f"Finished {kind.value} problem, max |w| = {np.max(np.abs(data)):.4g}",
        source=Source.SOLVER,
    )

    return StateHistory(data, grid=grid, kind=kind, config=cfg)


def reconstruct(eta: StateHistory, p: SolitonParams, epsilon: float) -> StateHistory:
    """u = φ + ε η, sampled on the history's grid and time levels."""
    x = eta.grid.x
    phi = np.stack([kink(x, t, p) for t in eta.times])
    return StateHistory(phi + epsilon * eta.data, grid=eta.grid, kind=ProblemKind.FULL)
