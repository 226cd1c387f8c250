import math

import numpy as np
import pytest

from convective_ch.spectral import make_grid

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def pi_grid():
    return make_grid(4, math.pi, math.pi)


@pytest.fixture(scope="session")
def acceptance():
    """Collects ``criterion -> (passed, detail)`` for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


# -- independent oracles (no package code paths) ----------------------------

def direct_sum(a, L1, L2, x, y):
    """Sum the sine series point by point, O(M^2) per point."""
    M = a.shape[0]
    out = np.zeros(np.broadcast(x, y).shape)
    for k1 in range(1, M + 1):
        for k2 in range(1, M + 1):
            out += a[k1 - 1, k2 - 1] * np.sin(k1 * math.pi * x / L1) * np.sin(k2 * math.pi * y / L2)
    return out


def direct_sum_dx(a, L1, L2, x, y):
    M = a.shape[0]
    out = np.zeros(np.broadcast(x, y).shape)
    for k1 in range(1, M + 1):
        for k2 in range(1, M + 1):
            kx = k1 * math.pi / L1
            out += a[k1 - 1, k2 - 1] * kx * np.cos(kx * x) * np.sin(k2 * math.pi * y / L2)
    return out


def gauss_grid(points, L1, L2):
    t, w = np.polynomial.legendre.leggauss(points)
    x, wx = 0.5 * L1 * (t + 1), 0.5 * L1 * w
    y, wy = 0.5 * L2 * (t + 1), 0.5 * L2 * w
    X, Y = np.meshgrid(x, y, indexing="ij")
    return X, Y, np.outer(wx, wy)
