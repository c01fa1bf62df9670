from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Type, TypeVar, Union

import rtoml
import yaml
from identify import identify
from pydantic import BaseModel, Extra, Field, validator
from rich.console import Console
from typing_extensions import Literal

from sglab.constants import PACKAGE_NAME
from sglab.errors import UnknownFormat
from sglab.grid import BoundaryKind, GridSpec, make_grid
from sglab.grid import Field as GridField
from sglab.inverse import FamilySpec, family_initials
from sglab.message import Verbosity
from sglab.neural import DEFAULT_LAYER_DIMS, TrainingConfig
from sglab.renderer import LogRenderer, NullRenderer, Renderer
from sglab.solver import ForcingSpec, ProblemConfig, ProblemKind, lift_initial_data
from sglab.soliton import SolitonParams


class BaseConfig(BaseModel):
    class Config:
        frozen = True
        use_enum_values = True
        validate_all = True
        extra = Extra.forbid


class GridConfig(BaseConfig):
    L: float = Field(default=13.0, gt=0, description="Half-width of the spatial domain [-L, L].")
    Nx: int = Field(default=201, ge=3, description="Number of spatial grid points, ends included.")
    T: float = Field(default=20.0, gt=0, description="Final time.")
    cfl: float = Field(
        default=0.2, gt=0, lt=1, description="Courant number; the time step is cfl * dx."
    )

    def build(self) -> GridSpec:
        return make_grid(L=self.L, Nx=self.Nx, T=self.T, cfl=self.cfl)


class SolitonConfig(BaseConfig):
    v: float = Field(default=0.5, gt=-1, lt=1, description="Kink velocity, |v| < 1.")
    x0: float = Field(default=0.0, description="Kink position at t = 0.")

    def build(self) -> SolitonParams:
        return SolitonParams(v=self.v, x0=self.x0)


class ForcingConfig(BaseConfig):
    A: float = Field(default=1.0, description="Amplitude of the spatial mode cos(nπx/L).")
    B: float = Field(default=2.0, description="Amplitude of the temporal mode cos(nπt/T).")
    n: int = Field(default=4, ge=0, description="Mode number shared by both forcing terms.")

    def build(self, grid: GridSpec) -> ForcingSpec:
        return ForcingSpec(A=self.A, B=self.B, n=self.n, L=grid.L, T=grid.T)


class ZeroInitialConfig(BaseConfig):
    type: Literal["zero"] = "zero"

    def build(self, grid: GridSpec, n: int) -> Tuple[GridField, GridField]:
        return GridField.zeros(grid), GridField.zeros(grid)


class CosineInitialConfig(BaseConfig):
    type: Literal["cosine"] = "cosine"

    omega: Optional[float] = Field(
        default=None,
        description="Frequency of η(x, 0) = cos(ωx). Defaults to nπ/L with the forcing's n.",
    )
    velocity: bool = Field(
        default=True,
        description="If true, η_t(x, 0) = -ω sin(ωx); otherwise the initial velocity is zero.",
    )

    def frequency(self, grid: GridSpec, n: int) -> float:
        return self.omega if self.omega is not None else n * math.pi / grid.L

    def build(self, grid: GridSpec, n: int) -> Tuple[GridField, GridField]:
        u0, v0 = family_initials(self.frequency(grid, n), grid)
        return u0, (v0 if self.velocity else GridField.zeros(grid))


class ProblemSettings(BaseConfig):
    kind: ProblemKind = Field(
        default=ProblemKind.PERTURBATION, description="Which equation variant to solve."
    )
    epsilon: float = Field(
        default=0.05, gt=0, le=1, description="Perturbation size ε in u = φ + εη."
    )
    grid: GridConfig = GridConfig()
    soliton: SolitonConfig = SolitonConfig()
    forcing: ForcingConfig = ForcingConfig()
    bc: BoundaryKind = Field(
        default=BoundaryKind.NEUMANN, description="Boundary condition at x = ±L."
    )
    damping: float = Field(
        default=0.0, ge=0, description="Coefficient λ of the damping term λ η_xxt."
    )
    initial: Union[ZeroInitialConfig, CosineInitialConfig] = Field(
        default=ZeroInitialConfig(),
        description="Perturbation initial data. Full runs start from φ + ε times these data.",
    )

    def build(self, kind: Optional[ProblemKind] = None) -> ProblemConfig:
        grid = self.grid.build()
        soliton = self.soliton.build()
        kind = ProblemKind(kind or self.kind)

        eta0, eta_t0 = self.initial.build(grid, self.forcing.n)
        if kind is ProblemKind.FULL:
            u0, v0 = lift_initial_data(grid, soliton, self.epsilon, eta0, eta_t0)
        else:
            u0, v0 = eta0, eta_t0

        return ProblemConfig(
            kind=kind,
            grid=grid,
            u0=u0,
            v0=v0,
            epsilon=self.epsilon,
            soliton=soliton,
            forcing=self.forcing.build(grid),
            bc=BoundaryKind(self.bc),
            lam=self.damping,
        )


class FamilyConfig(BaseConfig):
    n: int = Field(default=4, ge=0, description="Mode number of the target frequency nπ/L.")
    omega_count: int = Field(default=50, ge=2, description="Number of initial profiles.")
    half_width: float = Field(
        default=0.5, gt=0, description="Half-width of the frequency interval around nπ/L."
    )

    def build(self, L: float) -> FamilySpec:
        return FamilySpec(n=self.n, L=L, omega_count=self.omega_count, half_width=self.half_width)


class SamplingConfig(BaseConfig):
    N_t: int = Field(default=3, ge=2, description="Number of sampled time slices.")
    N_x: int = Field(default=50, ge=2, description="Number of sampled grid points.")
    sigma: float = Field(
        default=0.0, ge=0, description="Noise standard deviation at the target frequency."
    )


class TrainingSettings(BaseConfig):
    max_epochs: int = Field(default=100_000, ge=1, description="Epoch cap.")
    loss_threshold: float = Field(default=1e-3, gt=0, description="Stop below this loss.")
    plateau_window: int = Field(
        default=2000, ge=1, description="Epochs over which a plateau is detected."
    )
    plateau_tolerance: float = Field(
        default=1e-6,
        ge=0,
        description="Stop if the best loss improved by less than this fraction over the window.",
    )
    learning_rate: float = Field(default=1e-3, gt=0, description="Adam step size.")
    beta1: float = Field(default=0.9, ge=0, lt=1, description="Adam first-moment decay.")
    beta2: float = Field(default=0.999, ge=0, lt=1, description="Adam second-moment decay.")
    eps_hat: float = Field(default=1e-8, gt=0, description="Adam denominator offset.")
    layer_dims: List[int] = Field(
        default=list(DEFAULT_LAYER_DIMS),
        description="Layer widths from the (x, ω, t) input to the (η, η_t) output.",
    )
    log_every: int = Field(
        default=1000, ge=0, description="Report the loss every this many epochs (0 disables)."
    )

    @validator("layer_dims")
    def check_layer_dims(cls, dims: List[int]) -> List[int]:
        if len(dims) < 2 or dims[0] != 3 or dims[-1] != 2:
            raise ValueError("layer_dims must start at 3 inputs and end at 2 outputs")
        if any(d < 1 for d in dims):
            raise ValueError("every layer needs at least one unit")
        return dims

    def build(self, seed: int) -> TrainingConfig:
        return TrainingConfig(
            max_epochs=self.max_epochs,
            loss_threshold=self.loss_threshold,
            plateau_window=self.plateau_window,
            plateau_tolerance=self.plateau_tolerance,
            seed=seed,
            lr=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            eps_hat=self.eps_hat,
            layer_dims=tuple(self.layer_dims),
            log_every=self.log_every,
        )


class RendererConfig(BaseConfig):
    def build(self, verbosity: Verbosity, console: Console) -> Renderer:
        raise NotImplementedError


class NullRendererConfig(RendererConfig):
    type: Literal["null"] = "null"

    def build(self, verbosity: Verbosity, console: Console) -> Renderer:
        return NullRenderer(verbosity=verbosity)


class LogRendererConfig(RendererConfig):
    type: Literal["log"] = "log"

    internal_prefix: str = Field(
        default="{timestamp:%H:%M:%S.%f} {source} ",
        description="The format string for the prefix displayed before each message.",
    )
    internal_prefix_style: str = Field(
        default="dim", description="The style to apply to the prefix of each message."
    )
    internal_message_style: str = Field(
        default="", description="The style to apply to each message."
    )
    warning_style: str = Field(
        default="yellow", description="The style to apply to warnings and errors."
    )

    def build(self, verbosity: Verbosity, console: Console) -> Renderer:
        return LogRenderer(
            verbosity=verbosity,
            console=console,
            internal_prefix=self.internal_prefix,
            internal_prefix_style=self.internal_prefix_style,
            internal_message_style=self.internal_message_style,
            warning_style=self.warning_style,
        )


ConfigFormat = Literal["json", "toml", "yaml"]

FORMATS: Set[ConfigFormat] = {"json", "toml", "yaml"}

C = TypeVar("C", bound="DocumentConfig")


class DocumentConfig(BaseConfig):
    """A top-level config file for one command."""

    schema_version: Literal[1] = Field(default=1, description="Version of this file layout.")

    renderer: Union[NullRendererConfig, LogRendererConfig] = Field(
        default=LogRendererConfig(), description="The renderer to use."
    )

    @classmethod
    def load(cls: Type[C], path: Path) -> C:
        tags = identify.tags_from_path(str(path))
        intersection = tags & FORMATS

        if not intersection:
            raise UnknownFormat(f"Could not load config from {path}: unknown format.")

        text = path.read_text()
        for fmt in intersection:
            return cls.from_format(text, fmt)  # type: ignore[arg-type]
        else:  # pragma: unreachable
            raise UnknownFormat(f"No valid converter for {path}.")

    def save(self, path: Path) -> None:
        tags = identify.tags_from_filename(str(path))
        intersection = tags & FORMATS

        if not intersection:
            raise UnknownFormat(f"Could not write config to {path}: unknown format.")

        for fmt in intersection:
            path.write_text(self.to_format(fmt))  # type: ignore[arg-type]
            return None
        else:  # pragma: unreachable
            raise UnknownFormat(f"No valid converter for {path}.")

    @classmethod
    def from_format(cls: Type[C], t: str, format: ConfigFormat) -> C:
        return getattr(cls, f"from_{format}")(t)  # type: ignore[no-any-return]

    def to_format(self, format: ConfigFormat) -> str:
        return getattr(self, f"to_{format}")()  # type: ignore[no-any-return]

    @classmethod
    def from_json(cls: Type[C], j: str) -> C:
        return cls.parse_raw(j)

    def to_json(self) -> str:
        return self.json(indent=2)

    @classmethod
    def from_toml(cls: Type[C], t: str) -> C:
        return cls.parse_obj(rtoml.loads(t))

    def to_toml(self) -> str:
        # TOML has no null
        return rtoml.dumps(self.dict(exclude_none=True))

    @classmethod
    def from_yaml(cls: Type[C], y: str) -> C:
        return cls.parse_obj(yaml.safe_load(y))

    def to_yaml(self) -> str:
        return yaml.dump(self.dict())


class SimulateConfig(DocumentConfig):
    problem: ProblemSettings = ProblemSettings()
    kinds: List[ProblemKind] = Field(
        default=[ProblemKind.PERTURBATION],
        min_items=1,
        description="The equation variants to solve, each with the same problem settings.",
    )
    snapshot_times: List[float] = Field(
        default=[2.0, 5.0, 8.0, 10.0, 15.0],
        description="Times at which spatial profiles are written.",
    )
    reconstruct: bool = Field(
        default=True,
        description="For perturbation and linearized runs, also write u = φ + εη.",
    )
    binary: bool = Field(
        default=True, description="Also write each history in the binary SGH1 format."
    )
    colormap: bool = Field(default=True, description="Write a PPM colormap of each history.")

    @validator("snapshot_times", each_item=True)
    def check_snapshot_time(cls, t: float) -> float:
        if not t >= 0:
            raise ValueError("snapshot times must be non-negative")
        return t


class InvertConfig(DocumentConfig):
    problem: ProblemSettings = ProblemSettings(grid=GridConfig(Nx=101))
    family: FamilyConfig = FamilyConfig()
    runs: List[SamplingConfig] = Field(
        default=[SamplingConfig()],
        min_items=1,
        description="Sampling configurations, one trained network and report row each.",
    )
    training: TrainingSettings = TrainingSettings()
    seed: int = Field(
        default=0,
        ge=0,
        lt=2**64,
        description=(
            "Seed for noise and network initialization. "
            f"Overridden by {PACKAGE_NAME} invert --seed."
        ),
    )

    @validator("problem")
    def check_problem(cls, problem: ProblemSettings) -> ProblemSettings:
        if ProblemKind(problem.kind) is ProblemKind.FULL:
            raise ValueError("the inverse dataset is generated from an η equation, not 'full'")
        return problem

    @validator("family")
    def check_family_mode(cls, family: FamilyConfig, values: Dict[str, Any]) -> FamilyConfig:
        problem = values.get("problem")
        if problem is not None and family.n != problem.forcing.n:
            raise ValueError(
                f"family.n ({family.n}) must match the forcing mode problem.forcing.n "
                f"({problem.forcing.n})"
            )
        return family


class DiagnoseConfig(DocumentConfig):
    problem: ProblemSettings = ProblemSettings()
    deltas: List[float] = Field(
        default=[1e-1, 1e-2, 1e-3],
        min_items=1,
        description="Perturbation sizes for the continuous-dependence sweep.",
    )
    perturb: Literal["forcing", "initial"] = Field(
        default="forcing",
        description="Whether the sweep perturbs the forcing amplitude or the initial data.",
    )
    damping: float = Field(
        default=0.1,
        ge=0,
        description="λ of an extra damped run checked against the damped energy bound; 0 skips it.",
    )

    @validator("problem")
    def check_problem(cls, problem: ProblemSettings) -> ProblemSettings:
        if ProblemKind(problem.kind) is ProblemKind.FULL:
            raise ValueError("energy bounds are stated for the η equations, not 'full'")
        return problem

    @validator("deltas", each_item=True)
    def check_delta(cls, delta: float) -> float:
        if not delta > 0:
            raise ValueError("deltas must be positive")
        return delta


COMMAND_CONFIGS = {
    "simulate": SimulateConfig,
    "invert": InvertConfig,
    "diagnose": DiagnoseConfig,
}
