"""Seeded full-graph training loop with early stopping and sweeps.

One pipeline bundles the graph-derived inputs (schema context, meta-path
hypergraph, normalized adjacency, contrastive pairing, label split); the
trainer owns parameter state, adaptive-moment updates, per-epoch
augmentation and dropout substreams, periodic target refresh, and the
patience rule on the validation metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import numkern as nk
from .encoder import EncoderConfig, EncoderParams, SchemaContext, forward
from .errors import ConfigError, DivergenceError, ProtocolError
from .evalbench import kmeans, linear_probe
from .hingraph import HeteroGraph, LabelSplit, MetaPath, metapath_neighbors, split_labels
from .hypergraph import Hypergraph, adjacency_from_hypergraph, augment
from .hypergraph import build_hypergraph
from .objectives import ContrastiveSpec, LossReport, cross_view_spec, soft_assignment, target_distribution, total_loss
from .rng import substream

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

LR_RANGE = (1e-4, 5e-3)
PATIENCE_RANGE = (5, 100)
DROPOUT_RANGE = (0.1, 0.5)


@dataclass
class TrainConfig:
    learning_rate: float = 2e-3
    patience: int = 20
    max_epochs: int = 100
    dropout: float = 0.1
    temperature: float = 0.5
    lambda_co: float = 1.0
    lambda_kl: float = 0.1
    num_clusters: int = 3
    hidden_dim: int = 64
    embed_dim: int = 64
    conv_depth: int = 2
    feature_mask_rate: float = 0.1
    hyperedge_drop_rate: float = 0.1
    refresh_period: int = 5
    train_ratio: float = 0.2
    val_fraction: float = 0.1
    weighting: str = "unit"
    positives: str = "self"
    positives_topk: int = 0
    probe_epochs: int = 300
    seed: int = 0

    def validate(self) -> "TrainConfig":
        """Range enforcement applied when a config is loaded or swept.

        Construction stays unchecked so unit fixtures can pin degenerate
        values (zero learning rate, zero dropout) directly.
        """
        lo, hi = LR_RANGE
        if not lo <= self.learning_rate <= hi:
            raise ConfigError(
                f"learning_rate {self.learning_rate} outside [{lo}, {hi}]"
            )
        lo, hi = PATIENCE_RANGE
        if not lo <= self.patience <= hi:
            raise ConfigError(f"patience {self.patience} outside [{lo}, {hi}]")
        if self.max_epochs < self.patience:
            raise ConfigError(
                f"max_epochs {self.max_epochs} < patience {self.patience}"
            )
        lo, hi = DROPOUT_RANGE
        if not lo <= self.dropout <= hi:
            raise ConfigError(f"dropout {self.dropout} outside [{lo}, {hi}]")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.lambda_co < 0 or self.lambda_kl < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.num_clusters < 1:
            raise ConfigError("num_clusters must be >= 1")
        if self.refresh_period < 1:
            raise ConfigError("refresh_period must be >= 1")
        for name in ("feature_mask_rate", "hyperedge_drop_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 0.5:
                raise ConfigError(f"{name} {rate} outside [0, 0.5]")
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError(f"train_ratio {self.train_ratio} outside (0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction {self.val_fraction} outside (0, 1)")
        if self.weighting not in ("unit", "multiplicity"):
            raise ConfigError(f"unknown hyperedge weighting {self.weighting!r}")
        if self.probe_epochs < 1:
            raise ConfigError("probe_epochs must be >= 1")
        return self

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            hidden_dim=self.hidden_dim,
            embed_dim=self.embed_dim,
            conv_depth=self.conv_depth,
            num_clusters=self.num_clusters,
            dropout=self.dropout,
        )


@dataclass
class Pipeline:
    """Graph-derived training inputs, all frozen for the run."""

    g: HeteroGraph
    ctx: SchemaContext
    h: Hypergraph
    adj: object
    spec: ContrastiveSpec
    split: LabelSplit | None
    metapaths: list[MetaPath]


def build_pipeline(
    g: HeteroGraph, metapaths, cfg: TrainConfig, with_split: bool = True
) -> Pipeline:
    mps = [mp if isinstance(mp, MetaPath) else MetaPath(tuple(mp)) for mp in metapaths]
    if not mps:
        raise ConfigError("at least one meta-path is required")
    neighborhoods = {mp.name: metapath_neighbors(g, mp) for mp in mps}
    h = build_hypergraph(neighborhoods, weighting=cfg.weighting)
    adj = adjacency_from_hypergraph(h)
    ctx = SchemaContext.from_graph(g)

    counts = None
    if cfg.positives == "self+topk":
        counts = np.zeros((g.num_anchor, g.num_anchor))
        start = g.anchor_range.start
        for table in neighborhoods.values():
            for gid, nbrs in table.items():
                row = gid - start
                for other in nbrs:
                    counts[row, other - start] += 1.0
    spec = cross_view_spec(
        g.num_anchor,
        cfg.temperature,
        positives=cfg.positives,
        neighborhood_counts=counts,
        topk=cfg.positives_topk,
    )
    split = None
    if with_split:
        if not g.labels:
            raise ProtocolError("training needs labels for the validation metric")
        split = split_labels(
            g, cfg.train_ratio, cfg.val_fraction, substream(cfg.seed, "split")
        )
    return Pipeline(g, ctx, h, adj, spec, split, mps)


@dataclass
class TrainState:
    params: EncoderParams
    moments: dict[str, list[np.ndarray]]
    epoch: int = 0
    update_count: int = 0
    best_metric: float = float("-inf")
    best_epoch: int = 0
    best_arrays: dict[str, np.ndarray] | None = None
    target_p: np.ndarray | None = None


def init(pipe: Pipeline, cfg: TrainConfig) -> TrainState:
    """Seeded parameter draw plus cluster-center bootstrap.

    Centroids are set to k-means centers (20 Lloyd iterations) over the
    fused embeddings of the freshly initialized encoder, so the soft
    assignment starts from the data rather than from zero.
    """
    if cfg.num_clusters > pipe.g.num_anchor:
        raise ConfigError(
            f"num_clusters {cfg.num_clusters} exceeds anchor count "
            f"{pipe.g.num_anchor}"
        )
    ecfg = cfg.encoder_config()
    params = EncoderParams.init(pipe.ctx, ecfg, substream(cfg.seed, "init"))
    fused = forward(pipe.ctx, pipe.adj, params, ecfg).fused.value
    centers, _ = kmeans(
        fused, cfg.num_clusters, substream(cfg.seed, "init", "centroids"), iters=20
    )
    params.assign("centroids", centers)
    moments = {
        name: [np.zeros_like(t.value), np.zeros_like(t.value)]
        for name, t in params.tensors.items()
    }
    return TrainState(params=params, moments=moments)


def _augmented_inputs(pipe: Pipeline, cfg: TrainConfig, epoch: int):
    if cfg.feature_mask_rate == 0.0 and cfg.hyperedge_drop_rate == 0.0:
        return pipe.ctx, pipe.adj
    rng = substream(cfg.seed, "augment", epoch)
    h_aug, x_aug = augment(
        pipe.h,
        pipe.ctx.features[pipe.ctx.anchor_type],
        cfg.feature_mask_rate,
        cfg.hyperedge_drop_rate,
        rng,
    )
    feats = dict(pipe.ctx.features)
    feats[pipe.ctx.anchor_type] = x_aug
    ctx = replace(pipe.ctx, features=feats)
    return ctx, adjacency_from_hypergraph(h_aug)


def step(state: TrainState, pipe: Pipeline, cfg: TrainConfig) -> tuple[TrainState, LossReport]:
    """One epoch: augment, forward with dropout, backward, moment update."""
    epoch = state.epoch + 1
    ecfg = cfg.encoder_config()

    if state.target_p is None or (epoch - 1) % cfg.refresh_period == 0:
        # refresh the frozen target from a clean evaluation-mode pass
        clean = forward(pipe.ctx, pipe.adj, state.params, ecfg)
        q = soft_assignment(clean.fused, state.params["centroids"]).value
        state.target_p = target_distribution(q)

    ctx, adj = _augmented_inputs(pipe, cfg, epoch)
    views = forward(
        ctx,
        adj,
        state.params,
        ecfg,
        training=True,
        rng=substream(cfg.seed, "dropout", epoch),
    )
    loss, report = total_loss(
        views.z_nep,
        views.z_mpp,
        pipe.spec,
        state.params["centroids"],
        cfg.lambda_co,
        cfg.lambda_kl,
        target_p=state.target_p,
    )
    report.epoch = epoch
    if not np.isfinite(loss.value):
        raise DivergenceError(
            f"non-finite loss at epoch {epoch}", epoch=epoch, report=report
        )

    grads = nk.backward(loss, state.params.trainable())
    state.update_count += 1
    t = state.update_count
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t
    for name, tensor in state.params.tensors.items():
        g = grads[tensor]
        m, v = state.moments[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
        tensor.value = tensor.value - cfg.learning_rate * update
        if not np.isfinite(tensor.value).all():
            raise DivergenceError(
                f"non-finite values in {name} after epoch {epoch}",
                epoch=epoch,
                report=report,
            )
    state.epoch = epoch
    return state, report


@dataclass
class TrainResult:
    final_params: EncoderParams
    best_params: EncoderParams
    best_epoch: int
    best_metric: float
    log: list[LossReport] = field(default_factory=list)


def _default_metric(pipe: Pipeline, cfg: TrainConfig):
    if pipe.split is None:
        raise ProtocolError("no label split available for the validation metric")

    def metric(embeddings: np.ndarray, epoch: int) -> float:
        return linear_probe(
            embeddings,
            pipe.split,
            epochs=cfg.probe_epochs,
            seed=substream(cfg.seed, "probe", epoch),
            eval_on="val",
        )

    return metric


def train(pipe: Pipeline, cfg: TrainConfig, metric_fn=None) -> TrainResult:
    """Run until max_epochs or `patience` epochs past the best metric.

    The metric is evaluated every epoch on a clean forward pass;
    improvement is strict. On divergence the partial log is attached to
    the raised error.
    """
    state = init(pipe, cfg)
    if metric_fn is None:
        metric_fn = _default_metric(pipe, cfg)
    ecfg = cfg.encoder_config()
    log: list[LossReport] = []
    try:
        for _ in range(cfg.max_epochs):
            state, report = step(state, pipe, cfg)
            fused = forward(pipe.ctx, pipe.adj, state.params, ecfg).fused.value
            report.val_metric = float(metric_fn(fused, state.epoch))
            log.append(report)
            if report.val_metric > state.best_metric:
                state.best_metric = report.val_metric
                state.best_epoch = state.epoch
                state.best_arrays = state.params.arrays()
            elif state.epoch - state.best_epoch >= cfg.patience:
                break
    except DivergenceError as err:
        err.partial_log = log
        raise
    if state.best_arrays is None:
        # metric never produced a comparable value; fall back to final
        state.best_arrays = state.params.arrays()
        state.best_epoch = state.epoch
    return TrainResult(
        final_params=state.params,
        best_params=EncoderParams.from_arrays(state.best_arrays),
        best_epoch=state.best_epoch,
        best_metric=state.best_metric,
        log=log,
    )


@dataclass
class SweepRow:
    learning_rate: float
    dropout: float
    best_metric: float
    best_epoch: int

    def as_tsv_line(self) -> str:
        return (
            f"{self.learning_rate!r}\t{self.dropout!r}\t"
            f"{self.best_metric!r}\t{self.best_epoch}"
        )


def sweep(
    pipe: Pipeline, cfg: TrainConfig, lr_grid, dropout_grid, metric_fn=None
) -> tuple[TrainConfig, list[SweepRow]]:
    """Train once per grid point; rank by metric, then smaller lr/dropout.

    Every grid value is range-checked before any training starts, so an
    illegal point cannot waste a partial sweep.
    """
    lr_grid = [float(x) for x in lr_grid]
    dropout_grid = [float(x) for x in dropout_grid]
    if not lr_grid or not dropout_grid:
        raise ConfigError("sweep grids must be non-empty")
    for lr in lr_grid:
        if not LR_RANGE[0] <= lr <= LR_RANGE[1]:
            raise ConfigError(f"grid learning_rate {lr} outside {LR_RANGE}")
    for rate in dropout_grid:
        if not DROPOUT_RANGE[0] <= rate <= DROPOUT_RANGE[1]:
            raise ConfigError(f"grid dropout {rate} outside {DROPOUT_RANGE}")

    rows: list[SweepRow] = []
    for lr in lr_grid:
        for rate in dropout_grid:
            run_cfg = replace(cfg, learning_rate=lr, dropout=rate)
            result = train(pipe, run_cfg, metric_fn=metric_fn)
            rows.append(SweepRow(lr, rate, result.best_metric, result.best_epoch))
    ranked = sorted(
        rows, key=lambda r: (-r.best_metric, r.learning_rate, r.dropout)
    )
    best = ranked[0]
    best_cfg = replace(cfg, learning_rate=best.learning_rate, dropout=best.dropout)
    return best_cfg, ranked
