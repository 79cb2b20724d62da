import os

import numpy as np
import pytest

from hyphin.hingraph import HeteroGraph
from hyphin.hypergraph import Hypergraph

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

# collected by the acceptance module, printed after the run summary
_criterion_lines: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    _criterion_lines[number] = f"criterion {number}: {verdict} - {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_criterion_lines):
            terminalreporter.write_line(_criterion_lines[number])


@pytest.fixture
def tiny_graph_dir():
    return os.path.join(DATA_DIR, "tiny_hin")


def random_hypergraph(rng, max_nodes=20, max_edges=15, unit_weights=False):
    """Random small hypergraph; every hyperedge has at least one member."""
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(1, max_edges + 1))
    hyperedges = []
    for _ in range(m):
        size = int(rng.integers(1, n + 1))
        members = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
        hyperedges.append(members)
    # drop duplicate member sets; weights must stay aligned
    hyperedges = sorted(set(hyperedges))
    if unit_weights:
        weights = [1.0] * len(hyperedges)
    else:
        weights = (rng.random(len(hyperedges)) * 3.0 + 1e-3).tolist()
    return Hypergraph(
        n=n,
        hyperedges=hyperedges,
        weights=weights,
        provenance=["rand"] * len(hyperedges),
    )


def random_hetero_graph(rng, n_anchor=12, n_aux=8):
    """Three-type graph with random P-A / P-S / P-P edges."""
    edges = []
    a0, s0 = n_anchor, n_anchor + n_aux
    for i in range(n_anchor):
        for j in range(n_aux):
            if rng.random() < 0.3:
                edges.append((i, a0 + j, "PA"))
            if rng.random() < 0.2:
                edges.append((i, s0 + j, "PS"))
    for i in range(n_anchor):
        for j in range(i + 1, n_anchor):
            if rng.random() < 0.1:
                edges.append((i, j, "PP"))
    features = rng.standard_normal((n_anchor, 4))
    return HeteroGraph(
        node_types=["P", "A", "S"],
        type_ranges={
            "P": range(0, n_anchor),
            "A": range(a0, a0 + n_aux),
            "S": range(s0, s0 + n_aux),
        },
        anchor_type="P",
        features=features,
        edges=edges,
        edge_schema={},
        labels={i: i % 3 for i in range(n_anchor)},
    )
