from io import StringIO
from typing import List

import pytest
from _pytest.config import Config
from _pytest.config.argparsing import Parser
from rich.console import Console
from typer.testing import CliRunner

from sglab.grid import GridSpec, make_grid


def pytest_addoption(parser: Parser) -> None:
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="Also run full-scale experiments."
    )


def pytest_collection_modifyitems(config: Config, items: List[pytest.Item]) -> None:
    if config.getoption("--run-slow"):
        return

    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def output() -> StringIO:
    return StringIO()


@pytest.fixture
def console(output: StringIO) -> Console:
    return Console(
        file=output,
        force_terminal=True,
        width=80,
    )


@pytest.fixture
def small_grid() -> GridSpec:
    return make_grid(L=13.0, Nx=101, T=2.0, cfl=0.2)


@pytest.fixture
def tiny_grid() -> GridSpec:
    return make_grid(L=13.0, Nx=41, T=1.0, cfl=0.5)
