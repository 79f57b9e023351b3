"""Shared fixtures: bundled graphs, random graph factory, CLI runner."""

import importlib.resources

import numpy as np
import pytest

from commsens import bundled_graph
from commsens.cli import main as cli_main
from commsens.graph import AdjacencyMatrix


@pytest.fixture(scope="session")
def demo4():
    return bundled_graph("demo4")


@pytest.fixture(scope="session")
def flow8():
    return bundled_graph("flow8")


@pytest.fixture(scope="session")
def hub7():
    return bundled_graph("hub7")


@pytest.fixture(scope="session")
def path8():
    return bundled_graph("path8")


def fixture_path(name):
    """Filesystem path of a bundled edge-list file."""
    return str(importlib.resources.files("commsens") / "fixtures"
               / f"{name}.edges")


@pytest.fixture(scope="session")
def demo4_path():
    return fixture_path("demo4")


@pytest.fixture(scope="session")
def path8_path():
    return fixture_path("path8")


def random_strong(rng, n, density, low=None, high=5.0):
    """Random strongly connected directed graph with weights in (0, high].

    A Bernoulli(density) mask picks the edges, weights are uniform, and a
    random permutation cycle is added so every node lies on a directed
    cycle through the whole graph (strong connectivity by construction).
    """
    if low is None:
        low = np.nextafter(0.0, 1.0)
    mask = rng.random((n, n)) < density
    w = rng.uniform(low, high, size=(n, n))
    a = np.where(mask, w, 0.0)
    np.fill_diagonal(a, 0.0)
    perm = rng.permutation(n)
    for k in range(n):
        i, j = perm[k], perm[(k + 1) % n]
        if a[i, j] == 0.0:
            a[i, j] = rng.uniform(0.1, high)
    return AdjacencyMatrix.from_dense(a, directed=True)


@pytest.fixture
def cli(capsys):
    """Run the CLI in-process; returns (exit_code, stdout, stderr)."""

    def run(*argv):
        try:
            code = cli_main(list(argv))
        except SystemExit as exc:  # argparse errors exit directly
            code = exc.code if isinstance(exc.code, int) else 1
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return run
