import numpy as np
import pytest

from dtrwols.tabular import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def binary_dataset(n, rng, psi=(1.0, 1.0), propensity=None):
    """One-stage data: x ~ N(0,1), a ~ B(expit(x)) and y = 1 + x + a(psi0 + psi1 x) + e."""
    x = rng.standard_normal(n)
    p = 1 / (1 + np.exp(-x)) if propensity is None else np.full(n, propensity)
    a = (rng.random(n) < p).astype(float)
    y = 1 + x + a * (psi[0] + psi[1] * x) + rng.standard_normal(n)
    return Dataset({"x": x, "a": a, "y": y})


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's checks, then assert them."""

    def record(number: int, title: str, checks: dict, detail: str = ""):
        ok = all(bool(v) for v in checks.values())
        failed = [k for k, v in checks.items() if not v]
        status = "PASS" if ok else "FAIL"
        line = f"criterion {number:2d} {status}: {title}"
        if detail:
            line += f" | {detail}"
        if failed:
            line += f" | failed: {'; '.join(failed)}"
        ACCEPTANCE_LINES[number] = line
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
