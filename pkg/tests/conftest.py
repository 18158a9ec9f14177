import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedgat.data import BiGraph  # noqa: E402


def random_tree_edges(n, rng):
    return [(int(rng.integers(c)), c) for c in range(1, n)]


def random_graph(n, in_dim, rng, label=None, density=0.6):
    feats = rng.uniform(0, 3, size=(n, in_dim)) * (rng.random((n, in_dim)) < density)
    lab = int(rng.integers(4)) if label is None else label
    return BiGraph.from_edges(feats, random_tree_edges(n, rng), lab, event_id=f"g{n}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
