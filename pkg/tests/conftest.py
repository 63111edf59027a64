import numpy as np
import pytest

from twostage.dataset import Dataset


def blobs(counts, dim=2, spread=0.3, seed=0, separation=4.0):
    """Small Gaussian blobs with the given per-class counts."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c, n in enumerate(counts):
        centre = np.zeros(dim)
        centre[c % dim] = separation * (1 + c // dim)
        xs.append(centre + spread * rng.standard_normal((n, dim)))
        ys.append(np.full(n, c))
    return Dataset(np.concatenate(xs), np.concatenate(ys), len(counts))


@pytest.fixture
def make_blobs():
    return blobs


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
