from __future__ import annotations

import numpy as np
import pytest


def random_tuples(rng: np.random.Generator, count: int, m: int, n: int) -> np.ndarray:
    """Gaussian (m+2)-tuples in R^n with a random scale per tuple."""
    scale = np.exp(rng.uniform(-3, 3, size=(count, 1, 1)))
    return rng.normal(size=(count, m + 2, n)) * scale


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Store and print a one-line verdict; the test still asserts on ``ok``."""
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
