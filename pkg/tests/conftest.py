import functools

import numpy as np
import pytest

from xxpulse import GateSpec, PulseBasis, StabilizationSpec, five_ion_chain, synthesize

TAU = 300e-6
NA = 1000

ACCEPTANCE_LINES = {}


def record(criterion, ok, detail):
    """Store the one-line verdict for an acceptance criterion; printed at session end."""
    prev = ACCEPTANCE_LINES.get(criterion)
    if prev is not None:
        ok = ok and prev[0]
        detail = f"{prev[1]}; {detail}"
    ACCEPTANCE_LINES[criterion] = (ok, detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'} | {detail}")


@functools.lru_cache(maxsize=None)
def cached_result(pair=(1, 3), tau=TAU, na=NA, parity="negative", order=0, project=0):
    chain = five_ion_chain()
    return synthesize(chain, GateSpec(*pair), PulseBasis(tau, na, parity),
                      StabilizationSpec(order, project))


@pytest.fixture(scope="session")
def chain():
    return five_ion_chain()


@pytest.fixture(scope="session")
def gate13():
    return GateSpec(1, 3)


@pytest.fixture(scope="session")
def result13():
    return cached_result()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
