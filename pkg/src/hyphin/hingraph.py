"""Heterogeneous graph model, TSV ingestion, meta-path neighborhoods, splits.

A graph holds typed nodes over contiguous global-id ranges, attribute
rows for the anchor type, typed edges, and an optional label table. Edges
are traversed as undirected relations: a meta-path step between two types
may use a declared edge type in either orientation.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    FormatError,
    IngestionError,
    InsufficientLabelsError,
    ReferentialIntegrityError,
    SchemaError,
)
from .rng import coerce_rng

MAX_METAPATH_TYPES = 5


@dataclass(frozen=True)
class MetaPath:
    """A palindromic node-type sequence anchored on both ends."""

    types: tuple[str, ...]

    def __post_init__(self):
        if len(self.types) < 3:
            raise SchemaError(f"meta-path {self.types} has fewer than 3 types")
        if len(self.types) > MAX_METAPATH_TYPES:
            raise SchemaError(
                f"meta-path {self.types} exceeds the {MAX_METAPATH_TYPES}-type cap"
            )
        if self.types[0] != self.types[-1]:
            raise SchemaError(
                f"meta-path {self.types} must start and end on the same type"
            )

    @property
    def name(self) -> str:
        return "-".join(self.types)


@dataclass
class HeteroGraph:
    node_types: list[str]
    type_ranges: dict[str, range]
    anchor_type: str
    features: np.ndarray
    edges: list[tuple[int, int, str]]
    edge_schema: dict[str, tuple[str, str]]
    labels: dict[int, int] | None = None
    num_classes: int = 0
    _type_of: dict[int, str] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for t, r in self.type_ranges.items():
            for gid in r:
                self._type_of[gid] = t
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise FormatError("feature table must be 2-D")
        if self.features.shape[0] != self.num_nodes(self.anchor_type):
            raise FormatError(
                f"feature rows {self.features.shape[0]} != anchor count "
                f"{self.num_nodes(self.anchor_type)}"
            )
        for src, dst, etype in self.edges:
            if src not in self._type_of or dst not in self._type_of:
                raise ReferentialIntegrityError(
                    f"edge ({src}, {dst}, {etype}) references an unknown node"
                )
            declared = self.edge_schema.get(etype)
            actual = (self._type_of[src], self._type_of[dst])
            if declared is None:
                self.edge_schema[etype] = actual
            elif declared != actual:
                raise SchemaError(
                    f"edge type {etype} declared {declared} but edge "
                    f"({src}, {dst}) connects {actual}"
                )
        if self.labels:
            for gid, cls in self.labels.items():
                if self._type_of.get(gid) != self.anchor_type:
                    raise ReferentialIntegrityError(
                        f"label on node {gid}, which is not an anchor node"
                    )
                if cls < 0:
                    raise FormatError(f"negative class index {cls} on node {gid}")
            self.num_classes = max(self.labels.values()) + 1

    def num_nodes(self, node_type: str) -> int:
        return len(self.type_ranges[node_type])

    @property
    def anchor_range(self) -> range:
        return self.type_ranges[self.anchor_type]

    @property
    def num_anchor(self) -> int:
        return len(self.anchor_range)

    def anchor_local(self, gid: int) -> int:
        return gid - self.anchor_range.start

    def type_of(self, gid: int) -> str:
        return self._type_of[gid]

    def type_features(self, node_type: str) -> np.ndarray:
        """Attribute rows for the anchor type, one-hot rows otherwise."""
        if node_type == self.anchor_type:
            return self.features
        return np.eye(self.num_nodes(node_type))

    def typed_adjacency(self, t_src: str, t_dst: str) -> np.ndarray:
        """Boolean (n_src, n_dst) adjacency, edges read in both orientations."""
        adj = np.zeros((self.num_nodes(t_src), self.num_nodes(t_dst)), dtype=bool)
        r_src, r_dst = self.type_ranges[t_src], self.type_ranges[t_dst]
        for a, b, _ in self.edges:
            ta, tb = self._type_of[a], self._type_of[b]
            if ta == t_src and tb == t_dst:
                adj[a - r_src.start, b - r_dst.start] = True
            if tb == t_src and ta == t_dst:
                adj[b - r_src.start, a - r_dst.start] = True
        return adj

    def has_edge_type_between(self, t1: str, t2: str) -> bool:
        return any(
            {t1, t2} == {s, d} or (t1 == t2 == s == d)
            for s, d in self.edge_schema.values()
        )

    def label_array(self) -> np.ndarray:
        """Per-anchor-row class indices, -1 where unlabeled."""
        y = np.full(self.num_anchor, -1, dtype=np.int64)
        if self.labels:
            for gid, cls in self.labels.items():
                y[self.anchor_local(gid)] = cls
        return y


@dataclass
class LabelSplit:
    """Disjoint train/val/test sets of anchor row indices plus labels."""

    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray
    ratio: float
    labels: np.ndarray
    num_classes: int


def _read_rows(path: str, expected_fields: int):
    if not os.path.isfile(path):
        raise IngestionError(f"missing input file: {path}")
    rows = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != expected_fields:
                raise FormatError(
                    f"{path}:{lineno}: expected {expected_fields} fields, "
                    f"got {len(parts)}"
                )
            rows.append((lineno, parts))
    return rows


def load_graph(directory: str, anchor_type: str | None = None) -> HeteroGraph:
    """Load a graph from nodes/edges/features/labels TSV files.

    The anchor type is the type whose nodes carry feature rows; it is
    inferred from features.tsv unless given explicitly. Global ids must
    tile 0..N-1 with one contiguous range per type.
    """
    node_rows = _read_rows(os.path.join(directory, "nodes.tsv"), 2)
    by_type: dict[str, list[int]] = {}
    for lineno, (gid_s, type_name) in node_rows:
        try:
            gid = int(gid_s)
        except ValueError:
            raise FormatError(f"nodes.tsv:{lineno}: bad node id {gid_s!r}") from None
        by_type.setdefault(type_name, []).append(gid)

    all_ids = sorted(g for ids in by_type.values() for g in ids)
    if len(all_ids) != len(set(all_ids)):
        raise FormatError("nodes.tsv contains duplicate node ids")
    if all_ids != list(range(len(all_ids))):
        raise FormatError("node ids must tile 0..N-1 without gaps")

    type_ranges: dict[str, range] = {}
    for type_name, ids in by_type.items():
        lo, hi = min(ids), max(ids)
        if sorted(ids) != list(range(lo, hi + 1)):
            raise FormatError(
                f"ids of type {type_name} do not form a contiguous range"
            )
        type_ranges[type_name] = range(lo, hi + 1)
    node_types = sorted(type_ranges, key=lambda t: type_ranges[t].start)

    feature_rows = _read_rows(os.path.join(directory, "features.tsv"), 2)
    if not feature_rows:
        raise FormatError("features.tsv has no data rows")
    feat_map: dict[int, list[float]] = {}
    arity = None
    for lineno, (gid_s, vec_s) in feature_rows:
        gid = int(gid_s)
        try:
            values = [float(v) for v in vec_s.split(",")]
        except ValueError:
            raise FormatError(
                f"features.tsv:{lineno}: bad feature vector"
            ) from None
        if arity is None:
            arity = len(values)
        elif len(values) != arity:
            raise FormatError(
                f"features.tsv:{lineno}: ragged row (got {len(values)} values, "
                f"expected {arity})"
            )
        if gid in feat_map:
            raise FormatError(f"features.tsv:{lineno}: duplicate id {gid}")
        feat_map[gid] = values

    id_to_type = {g: t for t, r in type_ranges.items() for g in r}
    feat_types = {id_to_type.get(g) for g in feat_map}
    if None in feat_types:
        bad = next(g for g in feat_map if g not in id_to_type)
        raise ReferentialIntegrityError(f"features.tsv references unknown id {bad}")
    if anchor_type is None:
        if len(feat_types) != 1:
            raise FormatError(
                f"features.tsv spans several types {sorted(feat_types)}; "
                "pass anchor_type explicitly"
            )
        anchor_type = feat_types.pop()
    anchor_range = type_ranges.get(anchor_type)
    if anchor_range is None:
        raise SchemaError(f"anchor type {anchor_type!r} not present in nodes.tsv")
    missing = [g for g in anchor_range if g not in feat_map]
    if missing:
        raise FormatError(f"features.tsv missing anchor node {missing[0]}")
    features = np.array([feat_map[g] for g in anchor_range])

    edge_rows = _read_rows(os.path.join(directory, "edges.tsv"), 3)
    edges: list[tuple[int, int, str]] = []
    for lineno, (src_s, dst_s, etype) in edge_rows:
        try:
            src, dst = int(src_s), int(dst_s)
        except ValueError:
            raise FormatError(f"edges.tsv:{lineno}: bad endpoint id") from None
        if src not in id_to_type or dst not in id_to_type:
            raise ReferentialIntegrityError(
                f"edges.tsv:{lineno}: endpoint ({src}, {dst}) not in nodes.tsv"
            )
        edges.append((src, dst, etype))

    labels = None
    labels_path = os.path.join(directory, "labels.tsv")
    if os.path.isfile(labels_path):
        labels = {}
        for lineno, (gid_s, cls_s) in _read_rows(labels_path, 2):
            gid, cls = int(gid_s), int(cls_s)
            if gid not in id_to_type:
                raise ReferentialIntegrityError(
                    f"labels.tsv:{lineno}: unknown node id {gid}"
                )
            if gid in labels:
                raise FormatError(f"labels.tsv:{lineno}: duplicate id {gid}")
            labels[gid] = cls

    return HeteroGraph(
        node_types=node_types,
        type_ranges=type_ranges,
        anchor_type=anchor_type,
        features=features,
        edges=edges,
        edge_schema={},
        labels=labels,
    )


def write_graph(g: HeteroGraph, directory: str) -> None:
    """Write the TSV file set that load_graph reads back.

    Feature values are written with full repr precision so a round-trip
    reproduces the array bit for bit; files are byte-identical for equal
    graphs.
    """
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "nodes.tsv"), "w", encoding="utf-8") as fh:
        for t in sorted(g.type_ranges, key=lambda t: g.type_ranges[t].start):
            for gid in g.type_ranges[t]:
                fh.write(f"{gid}\t{t}\n")
    with open(os.path.join(directory, "features.tsv"), "w", encoding="utf-8") as fh:
        for row, gid in enumerate(g.anchor_range):
            vec = ",".join(repr(v) for v in g.features[row].tolist())
            fh.write(f"{gid}\t{vec}\n")
    with open(os.path.join(directory, "edges.tsv"), "w", encoding="utf-8") as fh:
        for src, dst, etype in g.edges:
            fh.write(f"{src}\t{dst}\t{etype}\n")
    if g.labels:
        with open(os.path.join(directory, "labels.tsv"), "w", encoding="utf-8") as fh:
            for gid in sorted(g.labels):
                fh.write(f"{gid}\t{g.labels[gid]}\n")


def metapath_neighbors(g: HeteroGraph, mp: MetaPath) -> dict[int, set[int]]:
    """Anchor nodes reachable by typed walks following ``mp``.

    Result maps each anchor global id to the set of anchor global ids
    reachable along the type sequence; every node is included in its own
    set, and palindromic paths make the relation symmetric.
    """
    if mp.types[0] != g.anchor_type:
        raise SchemaError(
            f"meta-path {mp.name} does not start on anchor type {g.anchor_type}"
        )
    for t in mp.types:
        if t not in g.type_ranges:
            raise SchemaError(f"meta-path type {t!r} not in graph schema")
    # an edgeless graph is legal and yields singleton neighborhoods; the
    # step check only applies once some edge type is declared
    if g.edges:
        for t1, t2 in zip(mp.types, mp.types[1:]):
            if not g.has_edge_type_between(t1, t2):
                raise SchemaError(
                    f"meta-path step {t1}-{t2} has no declared edge type"
                )

    # walk counts via boolean chain product; > 0 means reachable
    reach = g.typed_adjacency(mp.types[0], mp.types[1]).astype(np.int64)
    for t1, t2 in zip(mp.types[1:], mp.types[2:]):
        reach = (reach @ g.typed_adjacency(t1, t2).astype(np.int64)) > 0
        reach = reach.astype(np.int64)

    start = g.anchor_range.start
    result: dict[int, set[int]] = {}
    for local in range(g.num_anchor):
        ids = set((np.flatnonzero(reach[local]) + start).tolist())
        ids.add(local + start)
        result[local + start] = ids
    return result


def split_labels(
    g: HeteroGraph, ratio: float, val_fraction: float, seed
) -> LabelSplit:
    """Stratified train/val/test split over labeled anchor rows.

    Per class, round(ratio * size) nodes (at least one) go to train and
    round(val_fraction * size) (at least one) to validation; the rest are
    the test set. Deterministic for a given seed.
    """
    if g.labels is None or not g.labels:
        raise InsufficientLabelsError("graph has no labels to split")
    if not 0 < ratio < 1 or not 0 < val_fraction < 1 or ratio + val_fraction >= 1:
        raise InsufficientLabelsError(
            f"ratio {ratio} + val fraction {val_fraction} must fit inside (0, 1)"
        )
    rng = coerce_rng(seed)
    y = g.label_array()

    train, val, test = [], [], []
    for cls in range(g.num_classes):
        members = np.flatnonzero(y == cls)
        n_train = max(1, round(ratio * len(members)))
        n_val = max(1, round(val_fraction * len(members)))
        if n_train + n_val > len(members):
            raise InsufficientLabelsError(
                f"class {cls} has {len(members)} labeled nodes, needs at "
                f"least {n_train + n_val} for this split"
            )
        order = rng.permutation(len(members))
        shuffled = members[order]
        train.extend(shuffled[:n_train].tolist())
        val.extend(shuffled[n_train : n_train + n_val].tolist())
        test.extend(shuffled[n_train + n_val :].tolist())

    return LabelSplit(
        train_ids=np.array(sorted(train), dtype=np.int64),
        val_ids=np.array(sorted(val), dtype=np.int64),
        test_ids=np.array(sorted(test), dtype=np.int64),
        ratio=ratio,
        labels=y,
        num_classes=g.num_classes,
    )
