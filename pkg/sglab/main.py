from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import NoReturn, Optional, Type, TypeVar

from pydantic import ValidationError
from rich.console import Console
from rich.json import JSON
from rich.panel import Panel
from rich.table import Table
from rich.text import Text
from typer import Argument, Exit, Option, Typer

from sglab.colormap import render_colormap
from sglab.config import (
    COMMAND_CONFIGS,
    DiagnoseConfig,
    DocumentConfig,
    InvertConfig,
    ProblemSettings,
    SimulateConfig,
)
from sglab.constants import PACKAGE_NAME, __python_version__, __version__
from sglab.diagnostics import (
    boundary_truncation,
    damped_energy_check,
    energy_series,
    stability_spread,
    stability_sweep,
)
from sglab.errors import SGLabError, SolutionBlowUp, TrainingDiverged
from sglab.inverse import run_inverse
from sglab.message import Source, Verbosity
from sglab.recipes import RECIPES
from sglab.renderer import LogRenderer, Renderer
from sglab.serialize import (
    read_history,
    save_checkpoint,
    write_damped_csv,
    write_dataset_csv,
    write_energy_csv,
    write_history_binary,
    write_history_csv,
    write_loss_history_csv,
    write_overlay_csv,
    write_reports_csv,
    write_snapshots_csv,
    write_stability_csv,
)
from sglab.solver import ProblemConfig, ProblemKind, StateHistory, reconstruct, solve

app = Typer(help="Forward and inverse experiments for the perturbed sine-Gordon kink.")

EFFECTIVE_CONFIG = "effective-config.json"

EXIT_CONFIG = 1
EXIT_BLOW_UP = 2
EXIT_DIVERGED = 3

C = TypeVar("C", bound=DocumentConfig)


CONFIG_OPTION = Option(
    None,
    "--config",
    exists=True,
    readable=True,
    dir_okay=False,
    help="The path to the configuration file (json, toml or yaml).",
)
RECIPE_OPTION = Option(
    None, "--recipe", help="Use a built-in configuration instead of a file; see 'recipe'."
)
OUT_OPTION = Option(Path("sglab-out"), "--out", help="The directory to write results into.")
VERBOSITY_OPTION = Option(
    Verbosity.INFO,
    "-v",
    "--verbosity",
    case_sensitive=False,
    help="Set the verbosity level for progress and diagnostic messages.",
)


def fail(console: Console, message: str, code: int) -> NoReturn:
    console.print(Text(message, style="bold red"))
    raise Exit(code=code)


def load_config(
    cls: Type[C], config_path: Optional[Path], recipe: Optional[str], console: Console
) -> C:
    if (config_path is None) == (recipe is None):
        fail(console, "Give exactly one of --config or --recipe.", EXIT_CONFIG)

    try:
        if recipe is not None:
            if recipe not in RECIPES:
                fail(console, f"Unknown recipe {recipe!r}.", EXIT_CONFIG)
            config = RECIPES[recipe]()
            if not isinstance(config, cls):
                fail(console, f"Recipe {recipe!r} is not a {cls.__name__}.", EXIT_CONFIG)
            return config
        assert config_path is not None
        return cls.load(config_path)
    except (ValidationError, SGLabError) as e:
        fail(console, f"Invalid configuration: {e}", EXIT_CONFIG)


def build_problem(
    settings: ProblemSettings, console: Console, kind: Optional[ProblemKind] = None
) -> ProblemConfig:
    try:
        return settings.build(kind)
    except (ValueError, SGLabError) as e:
        fail(console, f"Invalid problem settings: {e}", EXIT_CONFIG)


def prepare(
    config: DocumentConfig, out: Path, verbosity: Verbosity, console: Console
) -> Renderer:
    if verbosity.is_debug:
        console.print(
            Panel(
                JSON.from_data(config.dict()),
                title="Configuration",
                title_align="left",
            )
        )

    out.mkdir(parents=True, exist_ok=True)
    config.save(out / EFFECTIVE_CONFIG)

    return config.renderer.build(verbosity, console)


def solve_or_exit(
    cfg: ProblemConfig, out: Path, console: Console, renderer: Renderer
) -> StateHistory:
    try:
        return solve(cfg, renderer)
    except SolutionBlowUp as e:
        write_history_csv(e.history, out / f"{ProblemKind(cfg.kind).value}-partial.csv")
        fail(console, str(e), EXIT_BLOW_UP)


def write_history(
    h: StateHistory, name: str, config: SimulateConfig, out: Path, renderer: Renderer
) -> None:
    write_history_csv(h, out / f"{name}.csv")
    if config.binary:
        write_history_binary(h, out / f"{name}.sgh")
    if config.snapshot_times:
        write_snapshots_csv(h, config.snapshot_times, out / f"{name}-snapshots.csv")
    if config.colormap:
        render_colormap(h, out / f"{name}.ppm", renderer=renderer)

    renderer.info(f"Wrote {name} history ({h.Nt} x {h.grid.Nx})", source=Source.CLI)


@app.command()
def simulate(
    config_path: Optional[Path] = CONFIG_OPTION,
    recipe: Optional[str] = RECIPE_OPTION,
    out: Path = OUT_OPTION,
    verbosity: Verbosity = VERBOSITY_OPTION,
) -> None:
    """
    Solve the configured equation variants and write histories, snapshots and colormaps.

    Exits with code 1 for an invalid configuration and 2 if a solution blows up.
    """
    console = Console(stderr=True)

    config = load_config(SimulateConfig, config_path, recipe, console)
    renderer = prepare(config, out, verbosity, console)

    for kind in map(ProblemKind, config.kinds):
        problem = build_problem(config.problem, console, kind)
        history = solve_or_exit(problem, out, console, renderer)
        write_history(history, kind.value, config, out, renderer)

        if config.reconstruct and kind.needs_background:
            u = reconstruct(history, problem.soliton, problem.epsilon)
            write_history(u, f"{kind.value}-reconstructed", config, out, renderer)


@app.command()
def invert(
    config_path: Optional[Path] = CONFIG_OPTION,
    recipe: Optional[str] = RECIPE_OPTION,
    out: Path = OUT_OPTION,
    seed: Optional[int] = Option(
        None, "--seed", min=0, max=2**64 - 1, help="Override the configured seed."
    ),
    verbosity: Verbosity = VERBOSITY_OPTION,
) -> None:
    """
    Generate the frequency-family dataset, train a network per sampling run
    and reconstruct the initial data at the target frequency.

    Exits with code 1 for an invalid configuration, 2 if a forward solve blows up
    and 3 if training diverges.
    """
    console = Console(stderr=True)

    config = load_config(InvertConfig, config_path, recipe, console)
    if seed is not None:
        config = config.copy(update={"seed": seed})
    renderer = prepare(config, out, verbosity, console)

    problem = build_problem(config.problem, console)
    family = config.family.build(problem.grid.L)
    training = config.training.build(config.seed)

    reports = []
    for index, run in enumerate(config.runs, start=1):
        renderer.info(
            f"Run {index}/{len(config.runs)}: N_t={run.N_t}, N_x={run.N_x}, σ={run.sigma}",
            source=Source.CLI,
        )
        try:
            result = run_inverse(
                family,
                problem,
                N_t=run.N_t,
                N_x=run.N_x,
                sigma=run.sigma,
                seed=config.seed,
                training=training,
                renderer=renderer,
            )
        except SolutionBlowUp as e:
            fail(console, str(e), EXIT_BLOW_UP)
        except TrainingDiverged as e:
            write_loss_history_csv(e.history, out / f"loss-{index}.csv")
            fail(console, str(e), EXIT_DIVERGED)
        except ValueError as e:
            fail(console, f"Invalid sampling for run {index}: {e}", EXIT_CONFIG)

        write_dataset_csv(result.dataset, out / f"dataset-{index}.csv")
        write_loss_history_csv(result.training.history, out / f"loss-{index}.csv")
        write_overlay_csv(result.truth, result.reconstruction, out / f"overlay-{index}.csv")
        save_checkpoint(
            result.training.params,
            out / f"checkpoint-{index}.sgnn",
            epoch=result.training.epochs,
            loss=result.training.final_loss,
        )
        reports.append(result.report)

    write_reports_csv(reports, out / "report.csv")

    table = Table(title="Reconstruction")
    for column in ("N_t", "N_x", "noise", "epochs", "loss η", "loss η_t", "MSE u0", "MSE v0"):
        table.add_column(column, justify="right")
    for r in reports:
        table.add_row(
            str(r.N_t),
            str(r.N_x),
            f"{r.noise_sigma:g}",
            str(r.epochs),
            *(f"{v:.3e}" for v in (r.loss_eta, r.loss_eta_t, r.mse_u0, r.mse_v0)),
        )
    Console().print(table)


@app.command()
def diagnose(
    config_path: Optional[Path] = CONFIG_OPTION,
    recipe: Optional[str] = RECIPE_OPTION,
    out: Path = OUT_OPTION,
    verbosity: Verbosity = VERBOSITY_OPTION,
) -> None:
    """
    Check a run against the energy bound, the continuous-dependence estimate
    and (with damping) the damped energy bound.
    """
    console = Console(stderr=True)

    config = load_config(DiagnoseConfig, config_path, recipe, console)
    renderer = prepare(config, out, verbosity, console)

    problem = build_problem(config.problem, console)
    history = solve_or_exit(problem, out, console, renderer)

    table = Table(title="Diagnostics", show_header=False)
    table.add_column("check")
    table.add_column("value", justify="right")

    energy = energy_series(history)
    write_energy_csv(energy, out / "energy.csv")
    table.add_row("energy bound holds", str(energy.holds))
    table.add_row("worst energy / bound", f"{energy.worst_ratio:.3e}")
    if not energy.holds:
        renderer.warning("The energy bound is violated", source=Source.DIAGNOSTICS)

    try:
        rows = stability_sweep(problem, config.deltas, config.perturb, base=history)
    except SolutionBlowUp as e:
        fail(console, str(e), EXIT_BLOW_UP)
    write_stability_csv(rows, out / "stability.csv")
    table.add_row("stability ratio spread", f"{stability_spread(rows):.3g}")

    if config.damping > 0:
        damped_problem = replace(problem, lam=config.damping)
        damped = solve_or_exit(damped_problem, out, console, renderer)
        report = damped_energy_check(damped, config.damping)
        write_damped_csv(report, out / "damped.csv")
        table.add_row("damped bound holds", str(report.satisfied))
        if not report.satisfied:
            renderer.warning("The damped energy bound is violated", source=Source.DIAGNOSTICS)

    slope = boundary_truncation(problem.grid, problem.soliton)
    (out / "boundary.txt").write_text(f"{slope!r}\n")
    table.add_row("max |φ_x(±L, t)|", f"{slope:.3e}")

    Console().print(table)


@app.command()
def render(
    history_path: Path = Argument(
        ...,
        metavar="history",
        exists=True,
        readable=True,
        dir_okay=False,
        help="A history file, either .csv or binary .sgh.",
    ),
    out: Optional[Path] = Option(
        None, "--out", help="The image to write. Defaults to the history path with .ppm."
    ),
    verbosity: Verbosity = VERBOSITY_OPTION,
) -> None:
    """
    Render a stored history as a PPM colormap.
    """
    console = Console(stderr=True)

    try:
        data = read_history(history_path)
    except (SGLabError, ValueError) as e:
        fail(console, f"Could not read {history_path}: {e}", EXIT_CONFIG)

    render_colormap(
        data,
        out or history_path.with_suffix(".ppm"),
        renderer=LogRenderer(verbosity=verbosity, console=console),
    )


@app.command()
def recipe(
    name: Optional[str] = Argument(None, help="The recipe to display. Lists all if omitted."),
    save: Optional[Path] = Option(
        None, "--save", help="Write the recipe to this config file instead of displaying it."
    ),
    plain: bool = Option(False),
) -> None:
    """
    Display or save a built-in configuration.
    """
    console = Console()

    if name is None:
        table = Table(title="Recipes")
        table.add_column("name")
        table.add_column("command")
        for recipe_name, build in RECIPES.items():
            config = build()
            command = next(c for c, cls in COMMAND_CONFIGS.items() if isinstance(config, cls))
            table.add_row(recipe_name, command)
        console.print(table)
        return

    if name not in RECIPES:
        fail(Console(stderr=True), f"Unknown recipe {name!r}.", EXIT_CONFIG)

    config = RECIPES[name]()
    if save is not None:
        try:
            config.save(save)
        except SGLabError as e:
            fail(Console(stderr=True), str(e), EXIT_CONFIG)
        return

    j = config.json(indent=2)
    if plain:
        print(j)
    else:
        console.print(Panel(JSON(j), title=f"Recipe {name}", title_align="left"))


@app.command()
def schema(
    command: str = Argument("simulate", help="Which command's configuration to describe."),
    plain: bool = Option(False),
) -> None:
    """
    Display the configuration file schema of a command.
    """
    console = Console()

    if command not in COMMAND_CONFIGS:
        fail(Console(stderr=True), f"Unknown command {command!r}.", EXIT_CONFIG)

    j = COMMAND_CONFIGS[command].schema_json(indent=2)

    if plain:
        print(j)
    else:
        console.print(
            Panel(
                JSON(j),
                title=f"{command} configuration schema",
                title_align="left",
            ),
        )


@app.command()
def version() -> None:
    """
    Display version and debugging information.
    """
    console = Console()

    console.print(f"{PACKAGE_NAME} {__version__}")
    console.print(f"python {__python_version__}")
