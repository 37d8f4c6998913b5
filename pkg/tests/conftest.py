import itertools

import numpy as np
import pytest

from parqubo.qubo import Qubo


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # JIT once per session so timing-sensitive tests measure steady state
    from parqubo.solvers import warmup

    warmup()


def random_qubo(rng: np.random.Generator, n: int, density: float = 0.6, scale: float = 1.0,
                label: str = "") -> Qubo:
    terms = {}
    for i in range(n):
        for j in range(i, n):
            if rng.random() < density:
                terms[(i, j)] = float(rng.uniform(-scale, scale))
    return Qubo.from_terms(n, terms, label)


def dense_energy(q: Qubo, x) -> float:
    """Independent oracle: full double loop over a dense matrix."""
    m = np.zeros((q.dimension, q.dimension))
    for (i, j), v in q.coefficients.items():
        m[i, j] = v
    total = 0.0
    for i in range(q.dimension):
        for j in range(q.dimension):
            total += m[i, j] * x[i] * x[j]
    return total


def brute_force(q: Qubo) -> tuple[float, list[tuple[int, ...]]]:
    """Minimum energy and every minimizing assignment, by plain enumeration."""
    best, arg = None, []
    for bits in itertools.product((0, 1), repeat=q.dimension):
        e = dense_energy(q, bits)
        if best is None or e < best - 1e-9 * max(1.0, abs(best)):
            best, arg = e, [bits]
        elif abs(e - best) <= 1e-9 * max(1.0, abs(best)):
            arg.append(bits)
    return best, arg


_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and (report.when == "call" or report.failed):
        name = report.nodeid.split("::")[-1].removeprefix("test_")
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{outcome}  {name}")
