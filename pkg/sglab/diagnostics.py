"""
Energy functionals and a-priori bounds evaluated on computed histories.

The bounds are sufficient, not sharp: a violation points at a solver or norm bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sglab.errors import ConvergenceInputError, GridError, StabilityViolation
from sglab.grid import (
    Field,
    GridSpec,
    gradient_norm_sq_array,
    h1_norm_sq_array,
    l2_inner_array,
    l2_norm_sq_array,
)
from sglab.solver import ProblemConfig, ProblemKind, StateHistory, nonlinear_term, solve
from sglab.soliton import SolitonParams, kink_dx

# relative slack for comparisons between quantities that agree to rounding
BOUND_RTOL = 1e-10


def time_derivative(h: StateHistory) -> np.ndarray:
    """Centered differences inside, second-order one-sided differences at the ends."""
    if h.Nt < 2:
        raise GridError("A time derivative needs at least two time slices")
    return np.gradient(h.data, h.grid.dt, axis=0, edge_order=2 if h.Nt >= 3 else 1)


def cumulative_trapezoid(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def source_norm_sq(h: StateHistory, config: Optional[ProblemConfig] = None) -> np.ndarray:
    """|g(·, t)|² at every time level of the history (zero when the history has no config)."""
    config = config or h.config
    if config is None or config.forcing.is_zero:
        return np.zeros(h.Nt)
    g = np.stack([config.source(t) for t in h.times])
    return l2_norm_sq_array(g, h.grid.dx)


def sup_gap(a: StateHistory, b: StateHistory) -> float:
    a.grid.check_same(b.grid)
    return float(np.max(np.abs(a.data - b.data)))


@dataclass(frozen=True)
class EnergyReport:
    times: np.ndarray
    E: np.ndarray
    bound: np.ndarray
    satisfied: np.ndarray

    @property
    def holds(self) -> bool:
        # the one-sided derivative at t = 0 and t = T is excluded from the strict check
        return bool(np.all(self.satisfied[1:-1]))

    @property
    def worst_ratio(self) -> float:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.bound > 0, self.E / self.bound, 0.0)
        return float(np.max(ratio[1:-1])) if len(ratio) > 2 else float(np.max(ratio))


def energy_series(h: StateHistory) -> EnergyReport:
    """E(t) = |η′|² + ‖η‖²_{H¹} against the bound e^{2t}(E(0) + ∫₀ᵗ|g|²)."""
    dx = h.grid.dx
    eta_t = time_derivative(h)
    if h.config is not None:
        eta_t[0] = h.config.v0.values

    E = l2_norm_sq_array(eta_t, dx) + h1_norm_sq_array(h.data, dx)
    forcing = cumulative_trapezoid(source_norm_sq(h), h.grid.dt)
    bound = np.exp(2 * h.times) * (E[0] + forcing)
    satisfied = E <= bound * (1 + BOUND_RTOL) + np.finfo(float).tiny

    return EnergyReport(times=h.times, E=E, bound=bound, satisfied=satisfied)


def sine_gordon_energy(h: StateHistory) -> np.ndarray:
    """∫ ½u_t² + ½u_x² + (1 − cos u) dx at every time level."""
    dx = h.grid.dx
    u_t = time_derivative(h)
    potential = l2_inner_array(1 - np.cos(h.data), np.ones_like(h.data), dx)
    return 0.5 * l2_norm_sq_array(u_t, dx) + 0.5 * gradient_norm_sq_array(h.data, dx) + potential


def initial_gap(a: ProblemConfig, b: ProblemConfig) -> float:
    """|v0_b − v0_a|² + ‖u0_b − u0_a‖²_{H¹}."""
    a.grid.check_same(b.grid)
    dx = a.grid.dx
    return float(
        l2_norm_sq_array(b.v0.values - a.v0.values, dx)
        + h1_norm_sq_array(b.u0.values - a.u0.values, dx)
    )


def forcing_gap(a: ProblemConfig, b: ProblemConfig) -> float:
    """‖g_b − g_a‖² in L²(0, T; L²), trapezoid in time over the grid's time levels."""
    a.grid.check_same(b.grid)
    grid = a.grid
    diff = np.stack([b.source(t) - a.source(t) for t in grid.t])
    return float(cumulative_trapezoid(l2_norm_sq_array(diff, grid.dx), grid.dt)[-1])


def stability_gap(h1: StateHistory, h2: StateHistory, d0: float, dg: float) -> float:
    """
    The empirical continuous-dependence constant
    max_t (|η₂′ − η₁′|² + ‖η₂ − η₁‖²_{H¹}) / (d0 + dg).
    """
    h1.grid.check_same(h2.grid)
    if h1.kind is not h2.kind:
        raise GridError(f"Cannot compare a {h1.kind.value} run with a {h2.kind.value} run")

    dx = h1.grid.dx
    z = h2.data - h1.data
    z_t = time_derivative(h2) - time_derivative(h1)
    numerator = float(np.max(l2_norm_sq_array(z_t, dx) + h1_norm_sq_array(z, dx)))

    denominator = d0 + dg
    if denominator == 0:
        if numerator == 0:
            return 0.0
        raise StabilityViolation(
            f"Identical data and forcing produced different solutions (gap {numerator:.3g})"
        )

    ratio = numerator / denominator
    if not math.isfinite(ratio):
        raise StabilityViolation(f"Stability ratio is not finite: {ratio}")
    return ratio


def convergence_order(errors: Sequence[Tuple[float, float]]) -> float:
    """Least-squares slope of log(err) against log(h)."""
    if len(errors) < 2:
        raise ConvergenceInputError("At least two refinement levels are needed")

    h, err = np.asarray(errors, dtype=float).T
    if np.any(h <= 0) or np.any(err <= 0):
        raise ConvergenceInputError("Step sizes and errors must be positive")

    slope, _ = np.polyfit(np.log(h), np.log(err), 1)
    return float(slope)


@dataclass(frozen=True)
class DampedEnergyReport:
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    rhs: float
    constant: float

    @property
    def lhs(self) -> np.ndarray:
        return self.energy + self.dissipation

    @property
    def margin(self) -> float:
        return float(self.rhs - np.max(self.lhs))

    @property
    def satisfied(self) -> bool:
        return bool(np.max(self.lhs) <= self.rhs * (1 + BOUND_RTOL))


def damped_energy_check(h: StateHistory, lam: float) -> DampedEnergyReport:
    """
    |η′(t)|² + ‖η(t)‖² + ∫₀ᵗ ‖η′(s)‖² ds ≤ C (‖u0‖² + |v0|² + ‖g‖²) with
    C = e^{2T} max(1, 1/λ).
    """
    if not lam > 0:
        raise ValueError(f"The damped estimate needs a positive damping coefficient, got {lam}")

    dx, dt = h.grid.dx, h.grid.dt
    eta_t = time_derivative(h)

    v0 = h.config.v0.values if h.config is not None else eta_t[0]
    data_norm = float(h1_norm_sq_array(h.data[0], dx) + l2_norm_sq_array(v0, dx))
    forcing_norm = float(cumulative_trapezoid(source_norm_sq(h), dt)[-1])

    constant = math.exp(2 * h.times[-1]) * max(1.0, 1 / lam)

    return DampedEnergyReport(
        times=h.times,
        energy=l2_norm_sq_array(eta_t, dx) + h1_norm_sq_array(h.data, dx),
        dissipation=cumulative_trapezoid(h1_norm_sq_array(eta_t, dx), dt),
        rhs=constant * (data_norm + forcing_norm),
        constant=constant,
    )


def lipschitz_check(
    phi: np.ndarray, eta1: np.ndarray, eta2: np.ndarray, epsilon: float, grid: GridSpec
) -> Tuple[float, float]:
    """
    Lipschitz ratios of η ↦ f(t, η) for the perturbation nonlinearity.

    Returns the L² ratio |f(η₁) − f(η₂)| / |η₁ − η₂| and the pointwise maximum ratio;
    both are at most 1.
    """
    df = nonlinear_term(ProblemKind.PERTURBATION, phi, eta1, epsilon) - nonlinear_term(
        ProblemKind.PERTURBATION, phi, eta2, epsilon
    )
    d_eta = eta1 - eta2

    l2 = math.sqrt(float(l2_norm_sq_array(df, grid.dx)) / float(l2_norm_sq_array(d_eta, grid.dx)))
    nonzero = d_eta != 0
    pointwise = float(np.max(np.abs(df[nonzero]) / np.abs(d_eta[nonzero])))

    return l2, pointwise


def boundary_truncation(grid: GridSpec, p: SolitonParams) -> float:
    """max over [0, T] of |φ_x(±L, t)|, the slope homogeneous Neumann conditions discard."""
    walls = np.array([-grid.L, grid.L])
    return float(max(np.max(np.abs(kink_dx(walls, t, p))) for t in grid.t))


def perturb_forcing(cfg: ProblemConfig, delta: float) -> ProblemConfig:
    """Shift the spatial forcing amplitude by δ."""
    return replace(cfg, forcing=replace(cfg.forcing, A=cfg.forcing.A + delta))


def perturb_initial(cfg: ProblemConfig, delta: float) -> ProblemConfig:
    """Add δ cos(nπx/L) to the initial displacement, n taken from the forcing."""
    x = cfg.grid.x
    bump = delta * np.cos(cfg.forcing.n * np.pi * x / cfg.grid.L)
    return cfg.with_initial(Field(cfg.u0.values + bump, cfg.grid), cfg.v0)


PERTURBATIONS = {"forcing": perturb_forcing, "initial": perturb_initial}


@dataclass(frozen=True)
class StabilityRow:
    delta: float
    d0: float
    dg: float
    ratio: float


def stability_sweep(
    cfg: ProblemConfig,
    deltas: Sequence[float],
    perturb: str = "forcing",
    base: Optional[StateHistory] = None,
) -> List[StabilityRow]:
    """Continuous-dependence ratios of ``cfg`` against each δ-perturbed copy of it."""
    base = base or solve(cfg)
    rows = []
    for delta in deltas:
        perturbed = PERTURBATIONS[perturb](cfg, delta)
        d0, dg = initial_gap(cfg, perturbed), forcing_gap(cfg, perturbed)
        ratio = stability_gap(base, solve(perturbed), d0, dg)
        rows.append(StabilityRow(delta=delta, d0=d0, dg=dg, ratio=ratio))
    return rows


def stability_spread(rows: Sequence[StabilityRow]) -> float:
    """Largest over smallest ratio; uniform dependence keeps this small."""
    ratios = [row.ratio for row in rows]
    if min(ratios) <= 0:
        return math.inf
    return max(ratios) / min(ratios)
