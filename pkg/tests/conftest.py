import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sqrtcox import SurvivalDataset  # noqa: E402

# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def random_dataset(rng, n, p, censor=0.4, ties=False, signal=0.0):
    X = rng.standard_normal((n, p))
    mu = signal * X[:, 0] if p else np.zeros(n)
    t = rng.exponential(size=n) / np.exp(mu)
    if ties:
        t = np.round(t * 4) / 4 + 0.25
    c = (rng.random(n) > censor).astype(int)
    if not c.any():
        c[0] = 1
    return SurvivalDataset(t, c, X)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:>2}. {title}: {detail}")
