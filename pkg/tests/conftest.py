import numpy as np
import pytest

from bcprecond.kkt import ChannelProblem, build_stokes_kkt


@pytest.fixture(scope="session")
def problem2():
    return ChannelProblem.build(2)


@pytest.fixture(scope="session")
def problem3():
    return ChannelProblem.build(3)


@pytest.fixture(scope="session")
def stokes3(problem3):
    return build_stokes_kkt(problem3, 1e-3, 1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.geomspace(1.0, cond, n)
    return (Q * w) @ Q.T


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance check under its criterion number."""
    store = request.config._acceptance

    def record(number: int, label: str, ok: bool, detail: str = ""):
        prev = store.get(number)
        passed = ok and (prev is None or prev[1])
        text = label if prev is None else prev[0]
        details = ([prev[2]] if prev and prev[2] else []) + ([detail] if detail else [])
        store[number] = (text, passed, "; ".join(details))
        print(f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_acceptance", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        label, ok, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {label}  ({detail})")
