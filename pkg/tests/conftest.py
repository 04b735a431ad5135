from __future__ import annotations

import pytest

from onlinematch.factor_lp import Family, FactorLPSpec, solve_factor_lp
from onlinematch.pricing import PriceSystem

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_addoption(parser):
    parser.addoption("--run-hours", action="store_true", default=False,
                     help="run the full-scale reproductions marked 'hours'")


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-hours"):
        return
    skip = pytest.mark.skip(reason="full-scale run; pass --run-hours to include it")
    for item in items:
        if "hours" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion check and assert it."""
    sink = request.config.stash[_ACCEPTANCE_KEY]

    def record(criterion: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        sink.append(line)
        print(line)
        assert ok, line

    return record


@pytest.fixture(scope="session")
def solved_grids():
    """Factor-LP solutions shared across test modules, solved lazily on first use."""
    cache: dict = {}

    def get(family: str, n: int, row_generation: bool = False):
        key = (family, n, row_generation)
        if key not in cache:
            cache[key] = solve_factor_lp(FactorLPSpec(Family.parse(family), n, use_row_generation=row_generation))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def fully_grid_40(solved_grids):
    return solved_grids("fully", 40, True)


@pytest.fixture(scope="session")
def general_grid_100(solved_grids):
    return solved_grids("general", 100)


@pytest.fixture(scope="session")
def fully_prices_10(solved_grids):
    return PriceSystem(solved_grids("fully", 10).grid)
