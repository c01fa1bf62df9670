import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sglab.diagnostics import convergence_order
from sglab.errors import SolitonDomainError
from sglab.grid import BoundaryKind, GridSpec, diff2_x_array, make_grid
from sglab.soliton import (
    SolitonParams,
    gamma,
    kink,
    kink_dt,
    kink_dtt,
    kink_dx,
    kink_dt_field,
    kink_field,
    kink_history,
)


@pytest.mark.parametrize(
    "v, expected",
    [
        (0, 1),
        (0.6, 1.25),
        (-0.6, 1.25),
        (0.99, 7.088812050083354),
    ],
)
def test_gamma(v: float, expected: float) -> None:
    assert gamma(v) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("v", [1, -1, 1.5])
def test_gamma_domain(v: float) -> None:
    with pytest.raises(SolitonDomainError):
        gamma(v)


def test_params_domain() -> None:
    with pytest.raises(SolitonDomainError):
        SolitonParams(v=1)


def test_kink_center_is_pi() -> None:
    p = SolitonParams(v=0.5, x0=2)
    t = 3.0

    assert kink(p.v * t + p.x0, t, p) == pytest.approx(np.pi)


def test_kink_limits() -> None:
    p = SolitonParams(v=0.3)

    assert kink(-1e6, 0, p) == pytest.approx(0, abs=1e-300)
    assert kink(1e6, 0, p) == pytest.approx(2 * np.pi)


def test_kink_value() -> None:
    assert kink(1.0, 7.0, SolitonParams()) == pytest.approx(4 * math.atan(math.e), rel=1e-14)


@pytest.mark.parametrize("s", [-45.0, -40.0, -39.0, 39.0, 40.0, 45.0])
def test_kink_asymptotics_are_continuous(s: float) -> None:
    p = SolitonParams()

    assert kink(s, 0, p) == pytest.approx(4 * math.atan(math.exp(s)), rel=1e-12)


def test_kink_does_not_overflow() -> None:
    p = SolitonParams(v=0.9999)

    with np.errstate(over="raise", invalid="raise"):
        values = kink(np.linspace(-1e4, 1e4, 101), 0, p)

    assert np.all(np.isfinite(values))


@given(
    v=st.floats(-0.95, 0.95),
    x0=st.floats(-10, 10),
    t=st.floats(0, 20),
)
def test_kink_is_monotone_and_bounded(v: float, x0: float, t: float) -> None:
    values = kink(np.linspace(-13, 13, 201), t, SolitonParams(v=v, x0=x0))

    assert np.all(np.diff(values) >= 0)
    assert np.all(values >= 0)
    assert np.all(values <= 2 * np.pi)


@given(
    v=st.floats(-0.95, 0.95),
    x0=st.floats(-10, 10),
    t=st.floats(0, 20),
)
def test_kink_translation_covariance(v: float, x0: float, t: float) -> None:
    x = np.linspace(-13, 13, 51)

    assert np.array_equal(
        kink(x, t, SolitonParams(v=v, x0=x0)), kink(x - x0, t, SolitonParams(v=v))
    )


def test_kink_dt_static_is_zero() -> None:
    assert np.all(kink_dt(np.linspace(-5, 5, 11), 1.0, SolitonParams()) == 0)


def test_kink_dt_at_center() -> None:
    p = SolitonParams(v=0.5)

    assert kink_dt(0.0, 0.0, p) == pytest.approx(-2 * gamma(0.5) * 0.5)
    assert kink_dt(0.0, 0.0, p) == pytest.approx(-1.1547005383792517)


@pytest.mark.parametrize("v", [-0.7, 0.2, 0.5])
def test_kink_derivatives_match_finite_differences(v: float) -> None:
    p = SolitonParams(v=v, x0=1)
    x = np.linspace(-13, 13, 101)
    t, h = 2.0, 1e-4

    dt = (kink(x, t + h, p) - kink(x, t - h, p)) / (2 * h)
    dx = (kink(x + h, t, p) - kink(x - h, t, p)) / (2 * h)
    dtt = (kink_dt(x, t + h, p) - kink_dt(x, t - h, p)) / (2 * h)

    assert kink_dt(x, t, p) == pytest.approx(dt, abs=1e-7)
    assert kink_dx(x, t, p) == pytest.approx(dx, abs=1e-7)
    assert kink_dtt(x, t, p) == pytest.approx(dtt, abs=1e-7)


def test_kink_field_on_three_points() -> None:
    grid = make_grid(L=13, Nx=3, T=1, cfl=0.5)

    values = kink_field(grid, 0, SolitonParams()).values

    assert values[0] == pytest.approx(4 * math.atan(math.exp(-13)))
    assert values[1] == pytest.approx(np.pi)
    assert values[2] == pytest.approx(2 * np.pi, abs=1e-5)


def test_kink_fields_sample_the_formulas(small_grid: GridSpec) -> None:
    p = SolitonParams(v=0.5)

    assert np.array_equal(kink_field(small_grid, 1.0, p).values, kink(small_grid.x, 1.0, p))
    assert np.array_equal(kink_dt_field(small_grid, 1.0, p).values, kink_dt(small_grid.x, 1.0, p))
    assert np.all(np.diff(kink_field(small_grid, 1.0, p).values) > 0)


def test_kink_satisfies_discrete_sine_gordon_at_second_order() -> None:
    p = SolitonParams(v=0.5)
    residuals = []
    for Nx in (101, 201, 401):
        grid = make_grid(L=13, Nx=Nx, T=2, cfl=0.5)
        phi = kink_history(grid, p)
        dtt = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / grid.dt**2
        dxx = diff2_x_array(phi[1:-1], grid.dx, BoundaryKind.DIRICHLET)
        r = dtt - dxx + np.sin(phi[1:-1])
        residuals.append((grid.dx, float(np.max(np.abs(r[:, 1:-1])))))

    assert convergence_order(residuals) == pytest.approx(2, abs=0.3)
