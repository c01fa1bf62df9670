"""
Built-in configurations reproducing the reference experiments.

All forward experiments share L = 13, T = 20, forcing cos(4πx/L) + 2 cos(4πt/T)
and a kink moving at v = 0.5.
"""

from __future__ import annotations

from typing import Callable, Dict

from sglab.config import (
    CosineInitialConfig,
    DiagnoseConfig,
    DocumentConfig,
    ForcingConfig,
    GridConfig,
    InvertConfig,
    ProblemSettings,
    SamplingConfig,
    SimulateConfig,
    TrainingSettings,
)
from sglab.solver import ProblemKind

SWEEP_ROWS = [
    SamplingConfig(N_t=2, N_x=50, sigma=0.0),
    SamplingConfig(N_t=3, N_x=50, sigma=0.0),
    SamplingConfig(N_t=5, N_x=50, sigma=0.0),
    SamplingConfig(N_t=3, N_x=50, sigma=0.05),
    SamplingConfig(N_t=5, N_x=50, sigma=0.05),
]


def full_kink() -> SimulateConfig:
    return SimulateConfig(
        problem=ProblemSettings(kind=ProblemKind.FULL), kinds=[ProblemKind.FULL]
    )


def perturbation() -> SimulateConfig:
    return SimulateConfig(kinds=[ProblemKind.PERTURBATION], reconstruct=True)


def linearized(n: int) -> Callable[[], SimulateConfig]:
    def recipe() -> SimulateConfig:
        return SimulateConfig(
            problem=ProblemSettings(kind=ProblemKind.LINEARIZED, forcing=ForcingConfig(n=n)),
            kinds=[ProblemKind.LINEARIZED],
        )

    return recipe


def cosine_data() -> SimulateConfig:
    return SimulateConfig(
        problem=ProblemSettings(initial=CosineInitialConfig()),
        kinds=[ProblemKind.PERTURBATION],
    )


def sweep_row(index: int) -> Callable[[], InvertConfig]:
    def recipe() -> InvertConfig:
        return InvertConfig(
            problem=ProblemSettings(grid=GridConfig(Nx=201)), runs=[SWEEP_ROWS[index]]
        )

    return recipe


def sweep() -> InvertConfig:
    return InvertConfig(problem=ProblemSettings(grid=GridConfig(Nx=201)), runs=SWEEP_ROWS)


def desk(sigma: float) -> Callable[[], InvertConfig]:
    """Reduced grid and epoch cap; minutes on a laptop."""

    def recipe() -> InvertConfig:
        return InvertConfig(
            problem=ProblemSettings(grid=GridConfig(Nx=101)),
            runs=[SamplingConfig(N_t=3, N_x=50, sigma=sigma)],
            training=TrainingSettings(max_epochs=50_000),
        )

    return recipe


def diagnose() -> DiagnoseConfig:
    return DiagnoseConfig(problem=ProblemSettings(initial=CosineInitialConfig()))


RECIPES: Dict[str, Callable[[], DocumentConfig]] = {
    "kink": full_kink,
    "perturbation": perturbation,
    "linearized-n1": linearized(1),
    "linearized-n4": linearized(4),
    "cosine": cosine_data,
    **{f"sweep-row{i + 1}": sweep_row(i) for i in range(len(SWEEP_ROWS))},
    "sweep": sweep,
    "desk": desk(0.0),
    "desk-noisy": desk(0.05),
    "diagnose": diagnose,
}
