import numpy as np
import pytest

from bundlechoice import CrossSectionDataset, PanelDataset


def tiny_cross(n=6, seed=0, k3=1):
    rng = np.random.default_rng(seed)
    x1 = np.column_stack([rng.normal(size=n), rng.integers(0, 2, n)])
    x2 = np.column_stack([rng.normal(size=n), rng.integers(0, 2, n)])
    w = rng.normal(size=(n, 2))
    d1 = rng.integers(0, 2, n)
    d2 = rng.integers(0, 2, n)
    s = rng.normal(size=(n, k3))
    return CrossSectionDataset(x1, x2, w, d1, d2, s=s, x_discrete=[False, True])


def tiny_panel(n=6, seed=0, t=2):
    rng = np.random.default_rng(seed)
    x1 = np.stack([rng.normal(size=(n, t)), rng.integers(0, 2, (n, t))], axis=-1)
    x2 = np.stack([rng.normal(size=(n, t)), rng.integers(0, 2, (n, t))], axis=-1)
    w = rng.normal(size=(n, t, 2))
    s = rng.normal(size=(n, t, 1))
    d1 = rng.integers(0, 2, (n, t))
    d2 = rng.integers(0, 2, (n, t))
    return PanelDataset(x1, x2, w, d1, d2, s=s, x_discrete=[False, True])


@pytest.fixture
def cross6():
    return tiny_cross()


@pytest.fixture
def panel6():
    return tiny_panel()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
