"""Hypergraph assembly from meta-path neighborhoods and its propagation operator.

One hyperedge is generated per (anchor node, meta-path) as the node plus
its meta-path neighbors; duplicate sets collapse to one hyperedge. The
normalized adjacency factorizes as B @ B.T with
B = N^{-1/2} S (W A^{-1})^{1/2}, which makes it symmetric positive
semidefinite by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .errors import ConfigError, ContractError, DimensionError, EmptyInputError
from .numkern import SparseBinaryMatrix, spmm
from .rng import coerce_rng

DENSE_LIMIT = 4096


@dataclass
class Hypergraph:
    n: int
    hyperedges: list[tuple[int, ...]]  # sorted member tuples, deduplicated
    weights: list[float]
    provenance: list[str]

    def __post_init__(self):
        seen = set()
        for members in self.hyperedges:
            if len(members) == 0:
                raise ContractError("empty hyperedge")
            if members in seen:
                raise ContractError(f"duplicate hyperedge {members}")
            seen.add(members)
            if members[-1] >= self.n or members[0] < 0:
                raise DimensionError(
                    f"hyperedge member out of range for n={self.n}: {members}"
                )
        if any(w <= 0 for w in self.weights):
            raise ContractError("hyperedge weights must be positive")
        if not (len(self.hyperedges) == len(self.weights) == len(self.provenance)):
            raise DimensionError("hyperedge/weight/provenance lengths differ")

    @property
    def num_edges(self) -> int:
        return len(self.hyperedges)


class IncidenceDegrees(NamedTuple):
    S: SparseBinaryMatrix
    node_degrees: np.ndarray
    edge_degrees: np.ndarray
    edge_weights: np.ndarray  # includes weight-1 padding columns
    isolated: tuple[int, ...]


@dataclass
class NormalizedAdjacency:
    """Degree-normalized propagation operator, dense below DENSE_LIMIT."""

    S: SparseBinaryMatrix
    node_degrees: np.ndarray
    edge_degrees: np.ndarray
    edge_weights: np.ndarray
    dense: np.ndarray | None

    @property
    def n(self) -> int:
        return self.S.rows

    def apply(self, x: np.ndarray) -> np.ndarray:
        """M @ x via the dense matrix when held, else the factored chain."""
        if self.dense is not None:
            return self.dense @ x
        return self.apply_chain(x)

    def apply_chain(self, x: np.ndarray) -> np.ndarray:
        inv_sqrt_n = 1.0 / np.sqrt(self.node_degrees)
        lifted = spmm(
            self.S.transpose(), x, row_scale=self.edge_weights / self.edge_degrees,
            col_scale=inv_sqrt_n,
        )
        return spmm(self.S, lifted, row_scale=inv_sqrt_n)


def build_hypergraph(
    neighborhoods: Mapping[str, Mapping[int, set[int]]],
    weighting: str = "unit",
) -> Hypergraph:
    """Collapse per-meta-path neighborhoods into a weighted hypergraph.

    ``unit`` gives every hyperedge weight 1; ``multiplicity`` weights each
    deduplicated set by how many (anchor, meta-path) pairs generated it.
    """
    if weighting not in ("unit", "multiplicity"):
        raise ConfigError(f"unknown weighting {weighting!r}")
    if not neighborhoods:
        raise EmptyInputError("no meta-path neighborhoods given")
    tables = list(neighborhoods.items())
    universe = sorted(tables[0][1].keys())
    if not universe:
        raise EmptyInputError("empty anchor universe")
    for name, table in tables[1:]:
        if sorted(table.keys()) != universe:
            raise ContractError(
                f"neighborhood table {name} covers a different anchor universe"
            )
    local = {gid: i for i, gid in enumerate(universe)}

    counts: dict[tuple[int, ...], int] = {}
    origin: dict[tuple[int, ...], str] = {}
    for name, table in tables:
        for anchor in universe:
            members = tuple(sorted(local[v] for v in table[anchor] | {anchor}))
            counts[members] = counts.get(members, 0) + 1
            origin.setdefault(members, name)

    hyperedges = list(counts)
    weights = [
        1.0 if weighting == "unit" else float(counts[e]) for e in hyperedges
    ]
    return Hypergraph(
        n=len(universe),
        hyperedges=hyperedges,
        weights=weights,
        provenance=[origin[e] for e in hyperedges],
    )


def incidence_and_degrees(h: Hypergraph) -> IncidenceDegrees:
    """Incidence matrix plus unweighted node degrees and edge degrees.

    Nodes left out of every hyperedge would have degree zero, which the
    normalization cannot tolerate, so each gets a private weight-1
    singleton hyperedge appended; the affected ids are returned (and
    warned about) rather than raised.
    """
    edges = list(h.hyperedges)
    weights = list(h.weights)
    covered = np.zeros(h.n, dtype=bool)
    for members in edges:
        covered[list(members)] = True
    isolated = tuple(int(v) for v in np.flatnonzero(~covered))
    if isolated:
        warnings.warn(
            f"{len(isolated)} isolated nodes padded with singleton hyperedges: "
            f"{list(isolated)}",
            stacklevel=2,
        )
        existing = set(edges)
        for v in isolated:
            if (v,) not in existing:
                edges.append((v,))
                weights.append(1.0)

    coords = [(v, e) for e, members in enumerate(edges) for v in members]
    s = SparseBinaryMatrix(h.n, len(edges), coords)
    return IncidenceDegrees(
        S=s,
        node_degrees=s.row_sums(),
        edge_degrees=s.col_sums(),
        edge_weights=np.asarray(weights, dtype=np.float64),
        isolated=isolated,
    )


def normalized_adjacency(
    s: SparseBinaryMatrix,
    weights: np.ndarray,
    node_degrees: np.ndarray,
    edge_degrees: np.ndarray,
    dense_limit: int = DENSE_LIMIT,
) -> NormalizedAdjacency:
    """M = N^{-1/2} S W A^{-1} S^T N^{-1/2} with all degrees positive."""
    weights = np.asarray(weights, dtype=np.float64)
    node_degrees = np.asarray(node_degrees, dtype=np.float64)
    edge_degrees = np.asarray(edge_degrees, dtype=np.float64)
    if weights.shape != (s.cols,) or edge_degrees.shape != (s.cols,):
        raise DimensionError(
            f"per-edge vectors must have length {s.cols}, got "
            f"{weights.shape} and {edge_degrees.shape}"
        )
    if node_degrees.shape != (s.rows,):
        raise DimensionError(
            f"node degree vector must have length {s.rows}, got {node_degrees.shape}"
        )
    if np.any(node_degrees <= 0) or np.any(edge_degrees <= 0):
        raise ContractError("normalized adjacency requires positive degrees")
    if np.any(weights <= 0):
        raise ContractError("hyperedge weights must be positive")

    dense = None
    if s.rows <= dense_limit:
        half = s.to_dense() * np.sqrt(weights / edge_degrees)[None, :]
        half *= (1.0 / np.sqrt(node_degrees))[:, None]
        dense = half @ half.T  # B B^T keeps M symmetric PSD
    return NormalizedAdjacency(
        S=s,
        node_degrees=node_degrees,
        edge_degrees=edge_degrees,
        edge_weights=weights,
        dense=dense,
    )


def adjacency_from_hypergraph(
    h: Hypergraph, dense_limit: int = DENSE_LIMIT
) -> NormalizedAdjacency:
    inc = incidence_and_degrees(h)
    return normalized_adjacency(
        inc.S, inc.edge_weights, inc.node_degrees, inc.edge_degrees, dense_limit
    )


def augment(
    h: Hypergraph,
    x: np.ndarray,
    feature_mask_rate: float,
    hyperedge_drop_rate: float,
    seed,
) -> tuple[Hypergraph, np.ndarray]:
    """Stochastically mask feature entries and drop whole hyperedges.

    A node's last remaining hyperedge is never dropped, so augmented
    hypergraphs keep every node covered. Deterministic per seed.
    """
    for label, rate in (
        ("feature_mask_rate", feature_mask_rate),
        ("hyperedge_drop_rate", hyperedge_drop_rate),
    ):
        if not 0.0 <= rate <= 0.5:
            raise ConfigError(f"{label} {rate} outside [0, 0.5]")
    rng = coerce_rng(seed)
    x = np.asarray(x, dtype=np.float64)

    if feature_mask_rate > 0:
        keep = rng.random(x.shape) >= feature_mask_rate
        x_out = np.where(keep, x, 0.0)
    else:
        x_out = x.copy()

    if hyperedge_drop_rate > 0 and h.num_edges > 0:
        kept = set(np.flatnonzero(rng.random(h.num_edges) >= hyperedge_drop_rate))
        # re-add the last containing hyperedge of any node left uncovered
        last_edge = {}
        for e, members in enumerate(h.hyperedges):
            for v in members:
                last_edge[v] = e
        covered = np.zeros(h.n, dtype=bool)
        for e in kept:
            covered[list(h.hyperedges[e])] = True
        for v in np.flatnonzero(~covered):
            # nodes the input never covered have nothing to restore
            if int(v) in last_edge:
                kept.add(last_edge[int(v)])
        indices = sorted(kept)
    else:
        indices = range(h.num_edges)

    h_out = Hypergraph(
        n=h.n,
        hyperedges=[h.hyperedges[i] for i in indices],
        weights=[h.weights[i] for i in indices],
        provenance=[h.provenance[i] for i in indices],
    )
    return h_out, x_out


def dump_hypergraph(h: Hypergraph, path: str) -> None:
    """Debug dump: one line per hyperedge (index, weight, member csv)."""
    with open(path, "w", encoding="utf-8") as handle:
        for e, members in enumerate(h.hyperedges):
            member_csv = ",".join(str(v) for v in members)
            handle.write(f"{e}\t{h.weights[e]!r}\t{member_csv}\n")
