import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from transonic_ep.base import SubsonicBase  # noqa: E402
from transonic_ep.eos import PressureLaw  # noqa: E402
from transonic_ep.fitter import solution_with_shock_at  # noqa: E402
from transonic_ep.steady import BackgroundCharge  # noqa: E402

# benchmark: gamma = 2, k = 1, J = 1, b = 0.5, rho_l = 0.4, E_l = 0.2, L = 1
BENCH = dict(J=1.0, rho_l=0.4, E_l=0.2, L=1.0, x0=0.4)


@pytest.fixture(scope="session")
def law2():
    return PressureLaw.gamma_law(1.0, 2.0)


@pytest.fixture(scope="session")
def bench_b():
    return BackgroundCharge.constant(0.5, BENCH["L"])


@pytest.fixture(scope="session")
def bench_solution(law2, bench_b):
    return solution_with_shock_at(law2, BENCH["J"], bench_b, BENCH["rho_l"], BENCH["E_l"],
                                  BENCH["L"], BENCH["x0"])


@pytest.fixture(scope="session")
def bench_base(bench_solution):
    return SubsonicBase(bench_solution, 100)


@pytest.fixture(scope="session")
def bench_base200(bench_solution):
    return SubsonicBase(bench_solution, 200)


@pytest.fixture(scope="session")
def unstable_solution(law2):
    # negative field at the shock: E_l = -1 makes E(x0) close to -1
    b = BackgroundCharge.constant(0.5, 0.3)
    return solution_with_shock_at(law2, 1.0, b, 0.4, -1.0, 0.3, 0.2)


@pytest.fixture(scope="session")
def unstable_base(unstable_solution):
    return SubsonicBase(unstable_solution, 128)


# one PASS/FAIL line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
