import numpy as np
import pytest

from dsigma.groups import AuxInfo, GroupAssignment

# owner -> members, in the order the worked example lists them (1-based)
ILLUSTRATION_GROUPS = {
    5: [5, 2, 3, 8, 4],
    8: [8, 3, 5],
    4: [4, 5, 7],
    2: [2, 5, 1],
    3: [3, 5, 8, 6],
    1: [1, 2],
    6: [6, 3],
    7: [7, 4],
}

# ten-node friendship graph (1-based edges)
FRIEND_EDGES = [(1, 2), (1, 7), (7, 8), (2, 5), (2, 6), (5, 3), (3, 4), (8, 9), (9, 10)]


@pytest.fixture
def illustration_groups():
    return GroupAssignment.from_groups([ILLUSTRATION_GROUPS[i] for i in range(1, 9)], one_based=True)


@pytest.fixture
def friend_graph():
    return AuxInfo.from_edges(10, [(u - 1, v - 1) for u, v in FRIEND_EDGES])


def random_points_grouping(rng, n, low=0.1, high=0.6):
    from dsigma.groups import compute_groups

    pts = rng.uniform(0, 1, size=(n, 1))
    return compute_groups(AuxInfo.from_points(pts), rng.uniform(low, high))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
