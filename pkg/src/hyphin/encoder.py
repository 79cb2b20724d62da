"""Two-view encoder over a heterogeneous graph.

View one (z_nep) reads the network schema: per-type node-level attention
over typed neighbor sets, then type-level attention that fuses the
per-type aggregates into one hidden state. View two (z_mpp) propagates
anchor features through a stack of hypergraph convolutions driven by the
degree-normalized adjacency. Each view ends in its own linear projection
head and the fused embedding is their sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numkern as nk
from .errors import (
    CompatibilityError,
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
)
from .hingraph import HeteroGraph
from .hypergraph import NormalizedAdjacency
from .numkern import Tensor
from .rng import coerce_rng

CHECKPOINT_MAGIC = "hyphin-checkpoint 1"
ATTN_SLOPE = 0.2  # negative-side slope of the attention score nonlinearity


@dataclass
class EncoderConfig:
    hidden_dim: int = 64
    embed_dim: int = 64
    conv_depth: int = 2
    num_clusters: int = 4
    dropout: float = 0.0

    def __post_init__(self):
        if min(self.hidden_dim, self.embed_dim, self.num_clusters) < 1:
            raise ConfigError("hidden_dim, embed_dim and num_clusters must be >= 1")
        if self.conv_depth < 0:
            raise ConfigError("conv_depth must be >= 0")
        if not 0.0 <= self.dropout <= 0.5:
            raise ConfigError(f"dropout {self.dropout} outside [0, 0.5]")


@dataclass
class SchemaContext:
    """Precomputed per-type neighbor masks and feature tables for one graph.

    neighbor_types always contains the anchor type itself (self edges are
    injected on its mask) plus every type that shares an edge type with
    the anchor in the schema.
    """

    anchor_type: str
    neighbor_types: list[str]
    masks: dict[str, np.ndarray]
    features: dict[str, np.ndarray]
    n: int

    @classmethod
    def from_graph(cls, g: HeteroGraph) -> "SchemaContext":
        anchor = g.anchor_type
        types = {anchor}
        for src_t, dst_t in g.edge_schema.values():
            if src_t == anchor:
                types.add(dst_t)
            if dst_t == anchor:
                types.add(src_t)
        neighbor_types = sorted(types)
        masks, feats = {}, {}
        for t in neighbor_types:
            mask = g.typed_adjacency(anchor, t)
            if t == anchor:
                np.fill_diagonal(mask, True)
            masks[t] = mask
            feats[t] = g.type_features(t)
        return cls(anchor, neighbor_types, masks, feats, g.num_anchor)

    @staticmethod
    def ensure(obj) -> "SchemaContext":
        if isinstance(obj, SchemaContext):
            return obj
        if isinstance(obj, HeteroGraph):
            return SchemaContext.from_graph(obj)
        raise ContractError(f"cannot build a schema context from {type(obj).__name__}")


class EncoderParams:
    """Named trainable tensors in a fixed, seed-reproducible order."""

    def __init__(self, tensors: dict[str, Tensor]):
        self.tensors = dict(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    def trainable(self) -> list[Tensor]:
        return list(self.tensors.values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.value.copy() for name, t in self.tensors.items()}

    def assign(self, name: str, value: np.ndarray) -> None:
        t = self.tensors[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != t.value.shape:
            raise DimensionError(
                f"tensor {name} has shape {t.value.shape}, got {value.shape}"
            )
        t.value = value

    @staticmethod
    def shape_plan(ctx: SchemaContext, cfg: EncoderConfig) -> list[tuple[str, tuple]]:
        h, e = cfg.hidden_dim, cfg.embed_dim
        plan: list[tuple[str, tuple]] = []
        for t in ctx.neighbor_types:
            plan.append((f"proj::{t}", (ctx.features[t].shape[1], h)))
        for t in ctx.neighbor_types:
            plan.append((f"attn::{t}", (2 * h,)))
        plan.extend([("type_V", (h, h)), ("type_b", (h,)), ("type_q", (h,))])
        for layer in range(cfg.conv_depth):
            plan.append((f"conv::{layer}", (h, h)))
        plan.extend(
            [
                ("head::nep::W", (h, e)),
                ("head::nep::b", (e,)),
                ("head::mpp::W", (h, e)),
                ("head::mpp::b", (e,)),
                ("centroids", (cfg.num_clusters, e)),
            ]
        )
        return plan

    @classmethod
    def init(cls, ctx, cfg: EncoderConfig, seed_or_rng) -> "EncoderParams":
        """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) draws in plan order.

        Centroids start at zero; the trainer replaces them with cluster
        centers before the first update.
        """
        ctx = SchemaContext.ensure(ctx)
        rng = coerce_rng(seed_or_rng)
        tensors: dict[str, Tensor] = {}
        for name, shape in cls.shape_plan(ctx, cfg):
            if name == "centroids":
                value = np.zeros(shape)
            else:
                bound = 1.0 / np.sqrt(shape[0])
                value = rng.uniform(-bound, bound, size=shape)
            tensors[name] = nk.parameter(value, name=name)
        return cls(tensors)

    @classmethod
    def from_arrays(cls, named: dict[str, np.ndarray]) -> "EncoderParams":
        return cls(
            {
                name: nk.parameter(np.asarray(a, dtype=np.float64), name=name)
                for name, a in named.items()
            }
        )


def check_compatible(params: EncoderParams, ctx, cfg: EncoderConfig) -> None:
    """Raise when a checkpoint cannot drive a forward pass on this graph."""
    ctx = SchemaContext.ensure(ctx)
    expected = EncoderParams.shape_plan(ctx, cfg)
    have = {name: t.value.shape for name, t in params.tensors.items()}
    for name, shape in expected:
        if name not in have:
            raise CompatibilityError(f"checkpoint is missing tensor {name}")
        if have[name] != shape:
            raise CompatibilityError(
                f"tensor {name} has shape {have[name]}, graph/config needs {shape}"
            )
    extra = set(have) - {name for name, _ in expected}
    if extra:
        raise CompatibilityError(f"checkpoint has unexpected tensors {sorted(extra)}")


@dataclass
class ViewEmbeddings:
    """Both view embeddings and their sum, kept on the gradient tape."""

    z_nep: Tensor
    z_mpp: Tensor
    fused: Tensor
    type_weights: np.ndarray = field(default=None, repr=False)


def _dropout(t: Tensor, rate: float, rng) -> Tensor:
    # inverted dropout: kept entries are rescaled so expectations match
    keep = (rng.random(t.shape) >= rate) / (1.0 - rate)
    return nk.mul(t, nk.constant(keep))


def node_attention(
    f_self: Tensor,
    f_nbr: Tensor,
    mask: np.ndarray,
    attn_vec: Tensor,
    dropout: float = 0.0,
    rng=None,
    training: bool = False,
) -> tuple[Tensor, Tensor]:
    """Attention-weighted neighbor aggregation for one neighbor type.

    Scores are LeakyReLU(a . [F_i || F_j]) masked to actual neighbors and
    row-softmaxed; the output row is ELU of the weighted neighbor sum.
    Rows with no neighbor of this type pass their own (projected) feature
    through the same nonlinearity instead. Returns (aggregate, weights).
    """
    n, h = f_self.shape
    n_k = f_nbr.shape[0]
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n, n_k):
        raise DimensionError(f"mask shape {mask.shape} != ({n}, {n_k})")
    if attn_vec.shape != (2 * h,):
        raise DimensionError(f"attention vector shape {attn_vec.shape} != ({2 * h},)")
    left = nk.matmul(f_self, nk.slice1d(attn_vec, 0, h))
    right = nk.matmul(f_nbr, nk.slice1d(attn_vec, h, 2 * h))
    scores = nk.leaky_relu(
        nk.add(nk.reshape(left, (n, 1)), nk.reshape(right, (1, n_k))), ATTN_SLOPE
    )
    has_nbr = mask.any(axis=1)
    safe_mask = mask
    if not has_nbr.all():
        # dummy column keeps the softmax defined; the blend discards it
        safe_mask = mask.copy()
        safe_mask[~has_nbr, 0] = True
    alpha = nk.masked_row_softmax(scores, safe_mask)
    if training and dropout > 0.0:
        if rng is None:
            raise ContractError("training-mode attention dropout needs an rng")
        alpha = _dropout(alpha, dropout, rng)
    aggregated = nk.elu(nk.matmul(alpha, f_nbr))
    if not has_nbr.all():
        aggregated = nk.row_blend(has_nbr, aggregated, nk.elu(f_self))
    return aggregated, alpha


def type_attention(
    aggregates: Sequence[Tensor], v: Tensor, b: Tensor, q: Tensor
) -> tuple[Tensor, Tensor]:
    """Softmax-weighted sum over per-type aggregates.

    Each type k is scored by mean_i q . tanh(V F_i^k + b); the softmax of
    those scores weights the sum. Returns (hidden state, weights).
    """
    aggregates = list(aggregates)
    if not aggregates:
        raise ContractError("type attention needs at least one neighbor type")
    scores = [
        nk.mean_(nk.matmul(nk.tanh(nk.add(nk.matmul(fk, nk.transpose(v)), b)), q))
        for fk in aggregates
    ]
    stacked = nk.stack1d(scores)
    k = len(aggregates)
    beta = nk.reshape(
        nk.masked_row_softmax(nk.reshape(stacked, (1, k)), np.ones((1, k), bool)),
        (k,),
    )
    out = nk.mul(aggregates[0], nk.pick(beta, 0))
    for i in range(1, k):
        out = nk.add(out, nk.mul(aggregates[i], nk.pick(beta, i)))
    return out, beta


def _apply_adjacency(adj, h: Tensor) -> Tensor:
    """M @ H on the tape; M is constant so the backward pass reuses M."""
    if isinstance(adj, NormalizedAdjacency):
        if adj.dense is not None:
            return nk.matmul(nk.constant(adj.dense), h)
        value = adj.apply_chain(h.value)

        def bwd(g):
            # M is symmetric, so the adjoint is another application of M
            return [(h, adj.apply_chain(g))]

        return Tensor(value, (h,), bwd)
    return nk.matmul(nk.constant(np.asarray(adj, dtype=np.float64)), h)


def hyperconv(
    adj,
    h: Tensor,
    theta: Tensor,
    dropout: float = 0.0,
    rng=None,
    training: bool = False,
    activation: str = "elu",
) -> Tensor:
    """One propagation layer: activation(M . dropout(H) . theta)."""
    if h.shape[1] != theta.shape[0]:
        raise DimensionError(
            f"layer input width {h.shape[1]} != weight rows {theta.shape[0]}"
        )
    if training and dropout > 0.0:
        if rng is None:
            raise ContractError("training-mode hyperconv dropout needs an rng")
        h = _dropout(h, dropout, rng)
    out = nk.matmul(_apply_adjacency(adj, h), theta)
    if activation == "elu":
        return nk.elu(out)
    if activation == "identity":
        return out
    raise ConfigError(f"unknown hyperconv activation {activation!r}")


def _linear_head(h: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return nk.add(nk.matmul(h, w), b)


def forward(
    graph_or_ctx,
    adj,
    params: EncoderParams,
    cfg: EncoderConfig,
    training: bool = False,
    rng=None,
) -> ViewEmbeddings:
    """Full two-view pass producing z_nep, z_mpp and their sum.

    Evaluation mode (training=False) is a deterministic pure function of
    (params, graph, adjacency); dropout draws happen only in training
    mode, in a fixed order, from the supplied rng.
    """
    ctx = SchemaContext.ensure(graph_or_ctx)
    projected = {
        t: nk.matmul(nk.constant(ctx.features[t]), params[f"proj::{t}"])
        for t in ctx.neighbor_types
    }
    f_anchor = projected[ctx.anchor_type]

    aggregates = []
    for t in ctx.neighbor_types:
        agg, _ = node_attention(
            f_anchor,
            projected[t],
            ctx.masks[t],
            params[f"attn::{t}"],
            dropout=cfg.dropout,
            rng=rng,
            training=training,
        )
        aggregates.append(agg)
    h_nep, beta = type_attention(
        aggregates, params["type_V"], params["type_b"], params["type_q"]
    )
    type_weights = beta.value.copy()
    z_nep = _linear_head(h_nep, params["head::nep::W"], params["head::nep::b"])

    h_mpp = f_anchor
    for layer in range(cfg.conv_depth):
        h_mpp = hyperconv(
            adj,
            h_mpp,
            params[f"conv::{layer}"],
            dropout=cfg.dropout,
            rng=rng,
            training=training,
        )
    z_mpp = _linear_head(h_mpp, params["head::mpp::W"], params["head::mpp::b"])

    fused = nk.add(z_nep, z_mpp)
    nk.require_finite(fused.value, "fused embeddings")
    return ViewEmbeddings(z_nep, z_mpp, fused, type_weights)


def save_params(params: EncoderParams, path: str) -> None:
    """Versioned text checkpoint; float hex digits make round-trips exact."""
    lines = [CHECKPOINT_MAGIC, f"tensors {len(params.tensors)}"]
    for name, t in params.tensors.items():
        shape = " ".join(str(d) for d in t.value.shape)
        lines.append(f"tensor {name} {shape}")
        lines.append(" ".join(v.hex() for v in t.value.reshape(-1).tolist()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path: str) -> EncoderParams:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise CompatibilityError(
            f"{path} is not a recognized checkpoint (expected {CHECKPOINT_MAGIC!r})"
        )
    if len(lines) < 2 or not lines[1].startswith("tensors "):
        raise FormatError(f"{path}: missing tensor count header")
    count = int(lines[1].split()[1])
    named: dict[str, np.ndarray] = {}
    cursor = 2
    for _ in range(count):
        if cursor + 1 >= len(lines):
            raise FormatError(f"{path}: truncated checkpoint")
        header = lines[cursor].split()
        if header[0] != "tensor" or len(header) < 2:
            raise FormatError(f"{path}: bad tensor header at line {cursor + 1}")
        name = header[1]
        shape = tuple(int(d) for d in header[2:])
        flat = np.array(
            [float.fromhex(tok) for tok in lines[cursor + 1].split()], dtype=np.float64
        )
        if flat.size != int(np.prod(shape, dtype=np.int64)):
            raise FormatError(f"{path}: tensor {name} has wrong element count")
        named[name] = flat.reshape(shape)
        cursor += 2
    return EncoderParams.from_arrays(named)
