"""Planted benchmark, frozen-embedding probe, clustering metric, reports.

The synthetic generator plants a class partition in a three-type graph:
anchor nodes connect to class-affiliated auxiliary nodes with one
probability inside the class and a smaller one across classes, and carry
class-mean features under Gaussian noise. Representation quality is then
read off with a logistic-regression probe on frozen embeddings and a
k-means/NMI diagnostic, and reported in ratio-grouped TSV tables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import normalized_mutual_info_score

from .errors import ConfigError, DimensionError, ProtocolError, ReportError
from .hingraph import HeteroGraph, LabelSplit
from .numkern import softmax_rows
from .rng import coerce_rng, substream


@dataclass
class SyntheticSpec:
    num_classes: int = 3
    anchors_per_class: int = 100
    aux_a: int = 40
    aux_s: int = 40
    p_in: float = 0.2
    p_out: float = 0.02
    feature_dim: int = 32
    noise_std: float = 0.5
    class_sep: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if min(self.anchors_per_class, self.aux_a, self.aux_s) < 1:
            raise ConfigError("all node counts must be >= 1")
        if not (0.0 <= self.p_out < self.p_in <= 1.0):
            raise ConfigError(
                f"need 0 <= p_out < p_in <= 1, got p_in={self.p_in} "
                f"p_out={self.p_out}"
            )
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.noise_std < 0 or self.class_sep < 0:
            raise ConfigError("noise_std and class_sep must be non-negative")


def synth_hin(spec: SyntheticSpec) -> HeteroGraph:
    """Draw one planted-partition HIN (types P/A/S, anchor P).

    Anchor classes are contiguous blocks; auxiliary nodes are affiliated
    with classes round-robin. Anchor-auxiliary edges appear with p_in when
    affiliations match and p_out otherwise. Deterministic per seed: draw
    order is features, then P-A edges, then P-S edges.
    """
    rng = substream(spec.seed, "synth")
    c, per = spec.num_classes, spec.anchors_per_class
    n_p = c * per
    anchor_class = np.arange(n_p) // per

    means = np.zeros((c, spec.feature_dim))
    for cls in range(c):
        means[cls, cls % spec.feature_dim] = spec.class_sep
    features = means[anchor_class] + spec.noise_std * rng.standard_normal(
        (n_p, spec.feature_dim)
    )

    edges: list[tuple[int, int, str]] = []
    offset = n_p
    for etype, count in (("PA", spec.aux_a), ("PS", spec.aux_s)):
        affil = np.arange(count) % c
        prob = np.where(anchor_class[:, None] == affil[None, :], spec.p_in, spec.p_out)
        hits = rng.random((n_p, count)) < prob
        for i, j in zip(*np.nonzero(hits)):
            edges.append((int(i), offset + int(j), etype))
        offset += count

    return HeteroGraph(
        node_types=["P", "A", "S"],
        type_ranges={
            "P": range(0, n_p),
            "A": range(n_p, n_p + spec.aux_a),
            "S": range(n_p + spec.aux_a, n_p + spec.aux_a + spec.aux_s),
        },
        anchor_type="P",
        features=features,
        edges=edges,
        edge_schema={},
        labels={i: int(anchor_class[i]) for i in range(n_p)},
    )


def kmeans(
    z: np.ndarray, k: int, rng, iters: int = 20
) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd iterations; an emptied cluster keeps its old center.

    Returns (centers, assignment). The seeded initial-center choice makes
    the whole procedure deterministic.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > n:
        raise ConfigError(f"cannot place {k} clusters over {n} points")
    rng = coerce_rng(rng)
    centers = z[rng.choice(n, size=k, replace=False)].copy()
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        dists = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = dists.argmin(axis=1)
        for j in range(k):
            members = assign == j
            if members.any():
                centers[j] = z[members].mean(axis=0)
    return centers, assign


def linear_probe(
    z: np.ndarray,
    split: LabelSplit,
    epochs: int = 300,
    seed=None,
    eval_on: str = "test",
    lr: float = 0.5,
) -> float:
    """Accuracy (percent) of a logistic regression on frozen embeddings.

    Features are standardized with train-split statistics; the weight
    matrix starts at zero and follows full-batch gradient descent, so the
    probe is deterministic (the seed argument is accepted for protocol
    symmetry with the stochastic evaluation stages).
    """
    del seed
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionError(f"embeddings must be 2-D, got shape {z.shape}")
    if eval_on == "test":
        eval_ids = split.test_ids
    elif eval_on == "val":
        eval_ids = split.val_ids
    else:
        raise ProtocolError(f"unknown eval split {eval_on!r}")
    if len(eval_ids) == 0:
        raise ProtocolError(f"{eval_on} split is empty")
    if max(int(split.train_ids.max()), int(eval_ids.max())) >= z.shape[0]:
        raise DimensionError("split references rows beyond the embedding matrix")

    train = z[split.train_ids]
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0

    def design(rows):
        x = (z[rows] - mu) / sd
        return np.hstack([x, np.ones((len(rows), 1))])

    x_train = design(split.train_ids)
    y_train = split.labels[split.train_ids]
    n_cls = split.num_classes
    onehot = np.eye(n_cls)[y_train]
    w = np.zeros((x_train.shape[1], n_cls))
    for _ in range(epochs):
        probs = softmax_rows(x_train @ w)
        w -= lr * x_train.T @ (probs - onehot) / len(y_train)

    pred = (design(eval_ids) @ w).argmax(axis=1)
    truth = split.labels[eval_ids]
    return float(100.0 * np.mean(pred == truth))


def clustering_nmi(z: np.ndarray, labels: np.ndarray, k: int, seed) -> float:
    """k-means the embeddings, then NMI against the given labels."""
    if k < 2:
        raise ConfigError("clustering needs k >= 2")
    labels = np.asarray(labels)
    z = np.asarray(z, dtype=np.float64)
    if labels.shape[0] != z.shape[0]:
        raise DimensionError("labels and embeddings disagree on row count")
    _, assign = kmeans(z, k, coerce_rng(seed), iters=50)
    return float(normalized_mutual_info_score(labels, assign))


@dataclass
class ResultRow:
    model: str
    acc: float
    setting: int  # label-ratio percent

    def __post_init__(self):
        self.acc = round(float(self.acc), 2)
        self.setting = int(self.setting)
        if not 0.0 <= self.acc <= 100.0:
            raise ReportError(f"accuracy {self.acc} outside [0, 100]")


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)

    def __post_init__(self):
        self.rows = [
            r if isinstance(r, ResultRow) else ResultRow(*r) for r in self.rows
        ]
        seen = set()
        for r in self.rows:
            key = (r.model, r.setting)
            if key in seen:
                raise ReportError(f"duplicate result for model {r.model!r} at {r.setting}%")
            seen.add(key)
        self.rows.sort(key=lambda r: (r.setting, -r.acc, r.model))


def emit_tables(rows, out_dir: str) -> ResultTable:
    """Write results.tsv (model/acc/setting) and the plot-ready variant."""
    table = rows if isinstance(rows, ResultTable) else ResultTable(list(rows))
    if not table.rows:
        raise ReportError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.tsv"), "w", encoding="utf-8") as fh:
        fh.write("model\tacc\tsetting\n")
        for r in table.rows:
            fh.write(f"{r.model}\t{r.acc:.2f}\t{r.setting}%\n")
    with open(
        os.path.join(out_dir, "results_bars.tsv"), "w", encoding="utf-8"
    ) as fh:
        fh.write("setting\tmodel\tacc\n")
        for r in table.rows:
            fh.write(f"{r.setting}%\t{r.model}\t{r.acc:.2f}\n")
    return table


def parse_results(path: str) -> ResultTable:
    """Read a results.tsv back into the table it was emitted from."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "model\tacc\tsetting":
            raise ReportError(f"{path}: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not parts[2].endswith("%"):
                raise ReportError(f"{path}:{lineno}: malformed row {line!r}")
            rows.append(ResultRow(parts[0], float(parts[1]), int(parts[2][:-1])))
    return ResultTable(rows)
