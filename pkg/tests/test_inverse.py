import numpy as np
import pytest

from sglab.constants import THREADS_ENV_VAR
from sglab.grid import Field, GridSpec, make_grid
from sglab.inverse import (
    FamilySpec,
    evaluate,
    family_initials,
    generate_dataset,
    reconstruct_initial,
    run_inverse,
    sample_space_indices,
    sample_time_indices,
)
from sglab.message import Source, Verbosity
from sglab.neural import StopReason, TrainingConfig, init_params
from sglab.renderer import RecordingRenderer
from sglab.solver import ForcingSpec, ProblemConfig, ProblemKind
from sglab.soliton import SolitonParams

SMALL_FAMILY = FamilySpec(n=4, L=13, omega_count=3, half_width=0.5)


def template(grid: GridSpec, kind: ProblemKind = ProblemKind.PERTURBATION) -> ProblemConfig:
    return ProblemConfig(
        kind=kind,
        grid=grid,
        u0=Field.zeros(grid),
        v0=Field.zeros(grid),
        epsilon=0.05,
        soliton=SolitonParams(v=0.5),
        forcing=ForcingSpec(A=1, B=2, n=4, L=grid.L, T=grid.T),
    )


def test_omega_grid_is_snapped_to_target() -> None:
    family = FamilySpec()

    omegas, target_index = family.omega_grid()

    assert len(omegas) == 50
    assert omegas[target_index] == 4 * np.pi / 13
    assert omegas[0] == pytest.approx(4 * np.pi / 13 - 0.5)
    assert omegas[-1] == pytest.approx(4 * np.pi / 13 + 0.5)
    assert np.all(np.diff(omegas) > 0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(omega_count=1),
        dict(half_width=0),
    ],
)
def test_family_rejects(kwargs: dict) -> None:
    with pytest.raises(ValueError):
        FamilySpec(**kwargs)


def test_family_initials(small_grid: GridSpec) -> None:
    u0, v0 = family_initials(0.5, small_grid)

    assert u0.values == pytest.approx(np.cos(0.5 * small_grid.x))
    assert v0.values == pytest.approx(-0.5 * np.sin(0.5 * small_grid.x))


@pytest.mark.parametrize(
    "n_slices, N_t, expected",
    [
        (771, 2, [0, 1]),
        (771, 3, [0, 1, 770]),
        (771, 5, [0, 1, 257, 513, 770]),
        (3, 3, [0, 1, 2]),
    ],
)
def test_sample_time_indices(n_slices: int, N_t: int, expected: list) -> None:
    assert sample_time_indices(n_slices, N_t).tolist() == expected


@pytest.mark.parametrize("n_slices, N_t", [(10, 1), (2, 3), (4, 5)])
def test_sample_time_indices_rejects(n_slices: int, N_t: int) -> None:
    with pytest.raises(ValueError):
        sample_time_indices(n_slices, N_t)


def test_sample_space_indices() -> None:
    indices = sample_space_indices(201, 50)

    assert len(indices) == 50
    assert indices[0] == 0
    assert indices[-1] == 200


@pytest.mark.parametrize("N_x", [1, 102])
def test_sample_space_indices_rejects(N_x: int) -> None:
    with pytest.raises(ValueError):
        sample_space_indices(101, N_x)


def test_dataset_rows(small_grid: GridSpec) -> None:
    dataset = generate_dataset(SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0, seed=0)

    assert len(dataset) == 3 * 3 * 10
    assert dataset.inputs.shape == (90, 3)
    assert dataset.targets.shape == (90, 2)
    assert not dataset.noisy.any()
    assert dataset.omega_index.tolist() == [0] * 30 + [1] * 30 + [2] * 30

    row = next(dataset.rows())
    assert row.x == -13
    assert row.t == 0
    assert row.omega == pytest.approx(4 * np.pi / 13 - 0.5)


def test_dataset_starts_from_family_profiles(small_grid: GridSpec) -> None:
    dataset = generate_dataset(SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0, seed=0)

    initial = dataset.inputs[:, 2] == 0
    x, omega, _ = dataset.inputs[initial].T
    eta, eta_t = dataset.targets[initial].T

    assert eta == pytest.approx(np.cos(omega * x), abs=1e-12)
    assert eta_t == pytest.approx(-omega * np.sin(omega * x), abs=0.05)


def test_noise_touches_only_the_target_member(small_grid: GridSpec) -> None:
    clean = generate_dataset(SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0, seed=0)
    noisy = generate_dataset(
        SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0.05, seed=0
    )

    _, target_index = SMALL_FAMILY.omega_grid()
    target = noisy.omega_index == target_index

    assert np.array_equal(noisy.noisy, target)
    assert np.array_equal(noisy.inputs, clean.inputs)
    assert np.array_equal(noisy.targets[~target], clean.targets[~target])
    assert np.all(noisy.targets[target] != clean.targets[target])
    assert len(noisy.without_noisy()) == len(noisy) - np.count_nonzero(target)


def test_dataset_is_deterministic(small_grid: GridSpec, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv(THREADS_ENV_VAR, "1")
    a = generate_dataset(SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0.05, seed=4)
    monkeypatch.setenv(THREADS_ENV_VAR, "3")
    b = generate_dataset(SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0.05, seed=4)

    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.targets, b.targets)


def test_dataset_rejects_full_template(small_grid: GridSpec) -> None:
    with pytest.raises(ValueError):
        generate_dataset(
            SMALL_FAMILY,
            template(small_grid, ProblemKind.FULL),
            N_t=3,
            N_x=10,
            sigma=0,
            seed=0,
        )


def test_dataset_rejects_negative_sigma(small_grid: GridSpec) -> None:
    with pytest.raises(ValueError):
        generate_dataset(SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=-1, seed=0)


def test_dataset_reports_progress(small_grid: GridSpec) -> None:
    renderer = RecordingRenderer(verbosity=Verbosity.INFO)

    generate_dataset(
        SMALL_FAMILY, template(small_grid), N_t=2, N_x=5, sigma=0, seed=0, renderer=renderer
    )

    assert [m.source for m in renderer.messages] == [Source.DATASET, Source.DATASET]


def test_scaling_covers_the_inputs(small_grid: GridSpec) -> None:
    dataset = generate_dataset(SMALL_FAMILY, template(small_grid), N_t=5, N_x=10, sigma=0, seed=0)

    scaled = dataset.scaling().apply(dataset.inputs)

    assert np.all(scaled >= -1 - 1e-12)
    assert np.all(scaled <= 1 + 1e-12)


def test_evaluate() -> None:
    grid = make_grid(L=13, Nx=101, T=1, cfl=0.5)
    truth = family_initials(4 * np.pi / 13, grid)
    shifted = Field(truth[0].values + 0.1, grid)

    mse_u0, mse_v0 = evaluate(shifted, truth[1], truth)

    assert mse_u0 == pytest.approx(0.01)
    assert mse_v0 == 0


def test_zero_network_reconstructs_zero(small_grid: GridSpec) -> None:
    p = init_params(0, (3, 4, 2))
    p = p.with_arrays([np.zeros_like(a) for a in p.arrays()])

    u0, v0 = reconstruct_initial(p, SMALL_FAMILY, small_grid)

    assert np.all(u0.values == 0)
    assert np.all(v0.values == 0)


def test_run_inverse_report(small_grid: GridSpec) -> None:
    training = TrainingConfig(max_epochs=20, layer_dims=(3, 8, 2), log_every=0)

    run = run_inverse(
        SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0.05, seed=3, training=training
    )

    assert run.report.epochs == 20
    assert run.report.seed == 3
    assert run.report.noise_sigma == 0.05
    assert run.training.params.seed == 3
    assert run.report.loss_eta >= 0
    assert run.report.mse_u0 == pytest.approx(evaluate(*run.reconstruction, run.truth)[0])


def test_run_inverse_is_deterministic(small_grid: GridSpec) -> None:
    training = TrainingConfig(max_epochs=20, layer_dims=(3, 8, 2), log_every=0)

    a, b = (
        run_inverse(
            SMALL_FAMILY, template(small_grid), N_t=3, N_x=10, sigma=0.05, seed=3, training=training
        )
        for _ in range(2)
    )

    assert a.report == b.report


@pytest.mark.slow
def test_reduced_grid_reconstruction() -> None:
    grid = make_grid(L=13, Nx=101, T=20, cfl=0.2)
    training = TrainingConfig(max_epochs=50_000, loss_threshold=1e-3)

    run = run_inverse(
        FamilySpec(), template(grid), N_t=3, N_x=50, sigma=0, seed=0, training=training
    )

    assert run.training.stop_reason is StopReason.THRESHOLD
    assert run.training.final_loss < 1e-3
    assert run.report.mse_u0 < 5e-3
    assert run.report.mse_v0 < 5e-3


@pytest.mark.slow
def test_reduced_grid_reconstruction_with_noise() -> None:
    grid = make_grid(L=13, Nx=101, T=20, cfl=0.2)
    training = TrainingConfig(max_epochs=50_000, loss_threshold=1e-3)

    run = run_inverse(
        FamilySpec(), template(grid), N_t=3, N_x=50, sigma=0.05, seed=0, training=training
    )

    assert run.report.noise_sigma == 0.05
    assert run.report.mse_u0 < 1e-2
