import pathlib
import sys

try:
    import semalg  # noqa: F401
except ImportError:
    sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import numpy as np
import pytest

from semalg.graphs import MixedGraph

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fig1():
    """Four-node bow-free graph imposing one non-pcorr equality constraint."""
    return MixedGraph.from_edges(
        4,
        directed=[("a", "b"), ("b", "d")],
        bidirected=[("a", "c"), ("a", "d"), ("b", "c")],
    )


@pytest.fixture(scope="session")
def instrumental():
    return MixedGraph.from_edges(
        3, directed=[("a", "b"), ("b", "c")], bidirected=[("b", "c")]
    )


@pytest.fixture(scope="session")
def saturated3():
    return MixedGraph.from_edges(3, directed=[(0, 1), (0, 2), (1, 2)])


@pytest.fixture(scope="session")
def union3():
    """Edge union of the instrumental graph and its saturated DAG peer."""
    return MixedGraph.from_edges(
        3, directed=[("a", "b"), ("b", "c"), ("a", "c")], bidirected=[("b", "c")]
    )


@pytest.fixture(scope="session")
def two_node_bow():
    return MixedGraph.from_edges(2, directed=[(0, 1)], bidirected=[(0, 1)])


@pytest.fixture(scope="session")
def star_bows():
    """Three bows out of the hub node; finite-to-one but not identifiable."""
    return MixedGraph.from_edges(
        4, directed=[(0, 1), (0, 2), (0, 3)], bidirected=[(0, 1), (0, 2), (0, 3)]
    )


@pytest.fixture(scope="session")
def inconclusive_quartet(star_bows):
    b = MixedGraph.from_edges(
        4, directed=[(0, 1), (0, 2), (2, 3)], bidirected=[(0, 1), (0, 2), (0, 3)]
    )
    c = MixedGraph.from_edges(
        4, directed=[(0, 1), (1, 2), (2, 3)], bidirected=[(0, 1), (0, 2), (0, 3)]
    )
    d = MixedGraph.from_edges(
        4, directed=[(0, 2), (2, 1), (2, 3)], bidirected=[(0, 1), (0, 2), (0, 3)]
    )
    return [star_bows, b, c, d]


@pytest.fixture(scope="session")
def tetrad_chain():
    """Bow into a, middle confounding, bow out to d; one tetrad constraint."""
    return MixedGraph.from_edges(
        4,
        directed=[("b", "a"), ("c", "d")],
        bidirected=[("a", "b"), ("b", "c"), ("c", "d")],
    )


@pytest.fixture(scope="session")
def a_star_dag():
    return MixedGraph.from_edges(4, directed=[("a", "b"), ("a", "c"), ("a", "d")])


@pytest.fixture(scope="session")
def clustering4():
    from semalg.equivalence import cluster_all

    return cluster_all(4)


@pytest.fixture(scope="session")
def class_table4(clustering4):
    from semalg.equivalence import merge_clusters

    return merge_clusters(clustering4)


@pytest.fixture(scope="session")
def identity_cov():
    def make(n, n_samples=1000):
        from semalg.fitting import SampleCov
        from semalg.graphs import default_names

        return SampleCov(np.eye(n), n_samples, default_names(n))

    return make
