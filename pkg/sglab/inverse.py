from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple, Optional, Tuple

import numpy as np

from sglab.constants import thread_count
from sglab.diagnostics import time_derivative
from sglab.grid import Field, GridSpec
from sglab.message import Source
from sglab.neural import Batch, InputScaling, MLPParams, TrainingConfig, TrainingResult
from sglab.neural import forward, loss_components, train
from sglab.renderer import NullRenderer, Renderer
from sglab.solver import ProblemConfig, ProblemKind, solve


@dataclass(frozen=True)
class FamilySpec:
    """Initial profiles cos(ωx), −ω sin(ωx) for ω uniform around the target nπ/L."""

    n: int = 4
    L: float = 13.0
    omega_count: int = 50
    half_width: float = 0.5

    def __post_init__(self) -> None:
        if self.omega_count < 2:
            raise ValueError(f"A family needs at least two members, got {self.omega_count}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def target_omega(self) -> float:
        return self.n * np.pi / self.L

    @property
    def omega_lo(self) -> float:
        return self.target_omega - self.half_width

    @property
    def omega_hi(self) -> float:
        return self.target_omega + self.half_width

    def omega_grid(self) -> Tuple[np.ndarray, int]:
        """
        The inclusive uniform grid over [lo, hi] and the index of the target member.

        The member closest to nπ/L is moved onto it exactly.
        """
        omegas = np.linspace(self.omega_lo, self.omega_hi, self.omega_count)
        target_index = int(np.argmin(np.abs(omegas - self.target_omega)))
        omegas[target_index] = self.target_omega
        return omegas, target_index


def family_initials(omega: float, grid: GridSpec) -> Tuple[Field, Field]:
    x = grid.x
    return Field(np.cos(omega * x), grid), Field(-omega * np.sin(omega * x), grid)


def sample_time_indices(n_slices: int, N_t: int) -> np.ndarray:
    """
    Always {0, 1}; the remaining N_t − 2 indices evenly spaced up to the last slice.
    """
    if N_t < 2:
        raise ValueError(f"N_t must be at least 2, got {N_t}")
    extra = np.rint(np.linspace(0, n_slices - 1, N_t - 1))[1:].astype(int)
    indices = np.unique(np.concatenate([[0, 1], extra]))
    if len(indices) != N_t:
        raise ValueError(f"Cannot pick {N_t} distinct time slices out of {n_slices}")
    return indices


def sample_space_indices(Nx: int, N_x: int) -> np.ndarray:
    if not 2 <= N_x <= Nx:
        raise ValueError(f"N_x must lie in [2, {Nx}], got {N_x}")
    indices = np.unique(np.rint(np.linspace(0, Nx - 1, N_x)).astype(int))
    if len(indices) != N_x:  # pragma: no cover
        raise ValueError(f"Cannot pick {N_x} distinct points out of {Nx}")
    return indices


class SampleRow(NamedTuple):
    x: float
    omega: float
    t: float
    eta: float
    eta_t: float
    noisy: bool


@dataclass(frozen=True)
class Dataset:
    """
    Training rows (x, ω, t) → (η, η_t), ordered by ω index, then time, then space.
    """

    inputs: np.ndarray
    targets: np.ndarray
    noisy: np.ndarray
    omega_index: np.ndarray
    family: FamilySpec
    grid: GridSpec
    N_t: int
    N_x: int
    sigma: float
    seed: int

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def rows(self) -> Iterator[SampleRow]:
        for (x, omega, t), (eta, eta_t), noisy in zip(self.inputs, self.targets, self.noisy):
            yield SampleRow(x, omega, t, eta, eta_t, bool(noisy))

    def batch(self) -> Batch:
        return Batch(inputs=self.inputs, targets=self.targets)

    def scaling(self) -> InputScaling:
        return InputScaling.from_bounds(
            [
                (-self.grid.L, self.grid.L),
                (self.family.omega_lo, self.family.omega_hi),
                (0.0, (self.grid.Nt - 1) * self.grid.dt),
            ]
        )

    def without_noisy(self) -> Dataset:
        keep = ~self.noisy
        return replace(
            self,
            inputs=self.inputs[keep],
            targets=self.targets[keep],
            noisy=self.noisy[keep],
            omega_index=self.omega_index[keep],
        )


def _sample_member(
    cfg: ProblemConfig, t_idx: np.ndarray, x_idx: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    h = solve(cfg)
    eta = h.data[np.ix_(t_idx, x_idx)]
    eta_t = time_derivative(h)[np.ix_(t_idx, x_idx)]
    return eta, eta_t


def generate_dataset(
    family: FamilySpec,
    template: ProblemConfig,
    N_t: int,
    N_x: int,
    sigma: float,
    seed: int,
    renderer: Optional[Renderer] = None,
) -> Dataset:
    """
    Solve the η equation for every family member and sample the training rows.

    Only rows of the target member receive additive N(0, σ²) noise, on both targets.
    """
    renderer = renderer or NullRenderer()
    if ProblemKind(template.kind) is ProblemKind.FULL:
        raise ValueError("The inverse dataset is generated from an η equation, not the full one")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")

    grid = template.grid
    omegas, target_index = family.omega_grid()
    t_idx = sample_time_indices(grid.Nt, N_t)
    x_idx = sample_space_indices(grid.Nx, N_x)

    configs = [template.with_initial(*family_initials(omega, grid)) for omega in omegas]

    workers = min(thread_count(), len(configs))
    renderer.info(
        f"Solving {len(configs)} family members on {workers} thread(s)", source=Source.DATASET
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        samples = list(pool.map(lambda c: _sample_member(c, t_idx, x_idx), configs))

    t_mesh, x_mesh = np.meshgrid(grid.t[t_idx], grid.x[x_idx], indexing="ij")
    block = t_mesh.size
    rng = np.random.default_rng(seed)

    inputs, targets, noisy, omega_index = [], [], [], []
    for i, (omega, (eta, eta_t)) in enumerate(zip(omegas, samples)):
        is_noisy = i == target_index and sigma > 0
        if is_noisy:
            eta = eta + rng.normal(0.0, sigma, size=eta.shape)
            eta_t = eta_t + rng.normal(0.0, sigma, size=eta_t.shape)

        inputs.append(np.column_stack([x_mesh.ravel(), np.full(block, omega), t_mesh.ravel()]))
        targets.append(np.column_stack([eta.ravel(), eta_t.ravel()]))
        noisy.append(np.full(block, is_noisy))
        omega_index.append(np.full(block, i))

    dataset = Dataset(
        inputs=np.concatenate(inputs),
        targets=np.concatenate(targets),
        noisy=np.concatenate(noisy),
        omega_index=np.concatenate(omega_index),
        family=family,
        grid=grid,
        N_t=N_t,
        N_x=N_x,
        sigma=sigma,
        seed=seed,
    )
    renderer.info(f"Generated {len(dataset)} rows", source=Source.DATASET)

    return dataset


def reconstruct_initial(p: MLPParams, family: FamilySpec, grid: GridSpec) -> Tuple[Field, Field]:
    """Evaluate the network at t = 0 and ω = nπ/L over the whole grid."""
    x = grid.x
    inputs = np.column_stack([x, np.full_like(x, family.target_omega), np.zeros_like(x)])
    out = forward(p, inputs)
    return Field(out[:, 0], grid), Field(out[:, 1], grid)


def evaluate(u0_nn: Field, v0_nn: Field, truth: Tuple[Field, Field]) -> Tuple[float, float]:
    """Pointwise mean squared error of each reconstructed component."""
    u0, v0 = truth
    for f in (v0_nn, u0, v0):
        u0_nn.grid.check_same(f.grid)
    return (
        float(np.mean((u0_nn.values - u0.values) ** 2)),
        float(np.mean((v0_nn.values - v0.values) ** 2)),
    )


@dataclass(frozen=True)
class InverseReport:
    N_t: int
    N_x: int
    epochs: int
    loss_eta: float
    loss_eta_t: float
    mse_u0: float
    mse_v0: float
    noise_sigma: float
    seed: int


@dataclass(frozen=True)
class InverseRun:
    report: InverseReport
    dataset: Dataset
    training: TrainingResult
    reconstruction: Tuple[Field, Field]
    truth: Tuple[Field, Field]


def run_inverse(
    family: FamilySpec,
    template: ProblemConfig,
    N_t: int,
    N_x: int,
    sigma: float,
    seed: int,
    training: TrainingConfig = TrainingConfig(),
    renderer: Optional[Renderer] = None,
) -> InverseRun:
    """Generate, train, reconstruct and score one sampling configuration."""
    renderer = renderer or NullRenderer()
    grid = template.grid

    dataset = generate_dataset(family, template, N_t, N_x, sigma, seed, renderer=renderer)
    result = train(
        dataset.batch(),
        replace(training, seed=seed),
        scaling=dataset.scaling(),
        renderer=renderer,
    )

    reconstruction = reconstruct_initial(result.params, family, grid)
    truth = family_initials(family.target_omega, grid)
    mse_u0, mse_v0 = evaluate(*reconstruction, truth)
    loss_eta, loss_eta_t = loss_components(result.params, dataset.batch())

    report = InverseReport(
        N_t=N_t,
        N_x=N_x,
        epochs=result.epochs,
        loss_eta=float(loss_eta),
        loss_eta_t=float(loss_eta_t),
        mse_u0=mse_u0,
        mse_v0=mse_v0,
        noise_sigma=sigma,
        seed=seed,
    )

    return InverseRun(
        report=report,
        dataset=dataset,
        training=result,
        reconstruction=reconstruction,
        truth=truth,
    )
