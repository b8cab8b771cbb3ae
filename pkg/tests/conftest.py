import numpy as np
import pytest

from returntime import Graph, gen_gnm, gen_random_regular, gen_regular_sbm

ACCEPTANCE = []


def random_tree(n, seed) -> Graph:
    """Random recursive tree: node v attaches to a uniform earlier node."""
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(v)), v) for v in range(1, n)]
    return Graph(n, edges)


def corpus():
    """Twenty connected random graphs of mixed models, n <= 2000.

    Small members make sure some nodes capture essentially all their return
    mass within the horizon; large ones exercise the sparse paths.
    """
    return [
        gen_random_regular(8, 3, seed=1),
        gen_random_regular(10, 3, seed=2),
        gen_random_regular(16, 5, seed=3),
        gen_random_regular(20, 4, seed=4),
        gen_random_regular(50, 3, seed=5),
        gen_random_regular(200, 6, seed=6),
        gen_random_regular(1000, 6, seed=7),
        gen_random_regular(2000, 4, seed=8),
        gen_gnm(10, 20, seed=9),
        gen_gnm(15, 25, seed=10),
        gen_gnm(30, 60, seed=11),
        gen_gnm(100, 300, seed=12),
        gen_gnm(300, 450, seed=13),
        gen_gnm(500, 1500, seed=14),
        gen_gnm(2000, 6000, seed=15),
        gen_regular_sbm(40, 4, 4, 2 / 3, seed=16),
        gen_regular_sbm(60, 3, 3, 2 / 3, seed=17),
        gen_regular_sbm(100, 6, 5, 2 / 3, seed=18),
        gen_regular_sbm(500, 6, 20, 2 / 3, seed=19),
        gen_regular_sbm(1000, 6, 50, 2 / 3, seed=20),
    ]


_CORPUS = None


@pytest.fixture(scope="session")
def graph_corpus():
    global _CORPUS
    if _CORPUS is None:
        _CORPUS = corpus()
    return _CORPUS


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    return Graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def square():
    return Graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
