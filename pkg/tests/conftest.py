import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from endograph.generators import random_small_instance  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

# criterion lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def small_instances(count, seed, *, unipartite=False, banded=False, with_gamma=False, max_a=6, max_r=10):
    """Deterministic batch of random r-driven instances for enumeration checks."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        if unipartite:
            n = int(rng.integers(2, max_r + 1))
            n_a = n_r = n
        else:
            n_a = int(rng.integers(1, max_a + 1))
            n_r = int(rng.integers(1, max_r + 1))
        out.append(random_small_instance(rng, n_a, n_r, unipartite=unipartite, banded=banded, with_gamma=with_gamma))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
