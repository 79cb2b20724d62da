"""Dual self-supervised objectives.

Two signals drive training: a symmetrized cross-view contrastive loss over
cosine similarities, and a KL consistency term between a Student-t soft
cluster assignment of the fused embeddings and a sharpened,
frequency-corrected target distribution held fixed between refreshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkern as nk
from .errors import ConfigError, ContractError, DegenerateEmbeddingError, DimensionError
from .numkern import Tensor


@dataclass
class ContrastiveSpec:
    """Temperature plus per-node positive/negative id sets (cosine similarity)."""

    temperature: float
    positives: list[set[int]]
    negatives: list[set[int]]
    _pos_mask: np.ndarray = field(default=None, repr=False)
    _either_mask: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature {self.temperature} must be positive")
        if len(self.positives) != len(self.negatives):
            raise DimensionError("positive and negative lists differ in length")
        n = len(self.positives)
        pos = np.zeros((n, n), dtype=bool)
        neg = np.zeros((n, n), dtype=bool)
        for i, (p, m) in enumerate(zip(self.positives, self.negatives)):
            if not p:
                raise ConfigError(f"node {i} has an empty positive set")
            if p & m:
                raise ConfigError(f"node {i} has overlapping positives/negatives")
            pos[i, sorted(p)] = True
            neg[i, sorted(m)] = True
        self._pos_mask = pos
        self._either_mask = pos | neg

    @property
    def n(self) -> int:
        return len(self.positives)


def cross_view_spec(
    n: int,
    temperature: float,
    positives: str = "self",
    neighborhood_counts: np.ndarray | None = None,
    topk: int = 0,
) -> ContrastiveSpec:
    """Default pairing: each node is its own positive, all others negatives.

    With ``positives="self+topk"`` the k strongest meta-path co-members
    (by how many neighborhoods pair them; ties broken by node id) join the
    positive set.
    """
    pos = [{i} for i in range(n)]
    if positives == "self+topk":
        if neighborhood_counts is None:
            raise ConfigError("self+topk positives need neighborhood counts")
        counts = np.asarray(neighborhood_counts)
        for i in range(n):
            scores = counts[i].copy()
            scores[i] = 0
            order = np.lexsort((np.arange(n), -scores))
            for j in order[:topk]:
                if scores[j] > 0:
                    pos[i].add(int(j))
    elif positives != "self":
        raise ConfigError(f"unknown positives mode {positives!r}")
    neg = [set(range(n)) - p for p in pos]
    return ContrastiveSpec(temperature, pos, neg)


def cosine(u, v) -> float:
    """Cosine similarity of two non-zero vectors."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateEmbeddingError("cosine of a zero vector")
    return float(u @ v / (nu * nv))


def _normalize_rows(z: Tensor) -> Tensor:
    norms_sq = nk.sum_(nk.mul(z, z), axis=1, keepdims=True)
    if np.any(norms_sq.value <= 0):
        row = int(np.flatnonzero(norms_sq.value.reshape(-1) <= 0)[0])
        raise DegenerateEmbeddingError(f"embedding row {row} has zero norm")
    return nk.div(z, nk.power(norms_sq, 0.5))


def contrastive_loss(z_nep, z_mpp, spec: ContrastiveSpec) -> Tensor:
    """Symmetrized InfoNCE-style loss over cross-view cosine similarities.

    Per node: -log of the positive-pair mass over the positive-plus-
    negative mass at temperature tau, averaged over nodes and over the
    two view orderings. Log-sum-exp keeps small temperatures finite.
    """
    z_nep, z_mpp = nk.as_tensor(z_nep), nk.as_tensor(z_mpp)
    if z_nep.shape != z_mpp.shape:
        raise DimensionError(
            f"view shapes differ: {z_nep.shape} vs {z_mpp.shape}"
        )
    if z_nep.shape[0] != spec.n:
        raise DimensionError(
            f"spec covers {spec.n} nodes but embeddings have {z_nep.shape[0]} rows"
        )
    sims = nk.matmul(_normalize_rows(z_nep), nk.transpose(_normalize_rows(z_mpp)))
    scaled = nk.mul(sims, nk.constant(1.0 / spec.temperature))

    def one_direction(score_matrix):
        denom = nk.masked_row_logsumexp(score_matrix, spec._either_mask)
        numer = nk.masked_row_logsumexp(score_matrix, spec._pos_mask)
        return nk.mean_(nk.sub(denom, numer))

    forward_dir = one_direction(scaled)
    reverse_dir = one_direction(nk.transpose(scaled))
    return nk.mul(nk.add(forward_dir, reverse_dir), nk.constant(0.5))


def soft_assignment(z_fused, centroids) -> Tensor:
    """Student-t kernel similarity to each centroid, row-normalized."""
    z = nk.as_tensor(z_fused)
    c = nk.as_tensor(centroids)
    if z.ndim != 2 or c.ndim != 2 or z.shape[1] != c.shape[1]:
        raise DimensionError(
            f"embeddings {z.shape} and centroids {c.shape} are incompatible"
        )
    z_sq = nk.sum_(nk.mul(z, z), axis=1, keepdims=True)  # (n, 1)
    c_sq = nk.reshape(nk.sum_(nk.mul(c, c), axis=1), (1, c.shape[0]))
    cross = nk.matmul(z, nk.transpose(c))
    dist_sq = nk.sub(nk.add(z_sq, c_sq), nk.mul(cross, nk.constant(2.0)))
    kernel = nk.power(nk.add(dist_sq, nk.constant(1.0)), -1.0)
    return nk.div(kernel, nk.sum_(kernel, axis=1, keepdims=True))


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Sharpened, cluster-frequency-corrected target for the KL term.

    Pure numpy on purpose: the target is a frozen reference, so gradients
    must never flow through it.
    """
    q = np.asarray(q, dtype=np.float64)
    if np.any(q <= 0):
        raise ContractError("target distribution needs strictly positive Q")
    mass = q.sum(axis=0, keepdims=True)
    sharpened = q * q / mass
    return sharpened / sharpened.sum(axis=1, keepdims=True)


def kl_loss(p, q) -> Tensor:
    """Mean row-wise KL(P || Q); zero entries of P contribute nothing."""
    p = np.asarray(p.value if isinstance(p, Tensor) else p, dtype=np.float64)
    q = nk.as_tensor(q)
    if p.shape != q.shape:
        raise DimensionError(f"P shape {p.shape} != Q shape {q.shape}")
    if np.any(q.value <= 0):
        raise ContractError("KL(P||Q) needs strictly positive Q")
    n = p.shape[0]
    entropy = float(np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)))
    cross = nk.sum_(nk.mul(nk.constant(p), nk.log(q)))
    return nk.mul(nk.sub(nk.constant(entropy), cross), nk.constant(1.0 / n))


@dataclass
class LossReport:
    """Per-epoch loss breakdown used for logging and early stopping."""

    epoch: int
    contrastive: float
    kl: float
    total: float
    val_metric: float = float("nan")

    def as_tsv_line(self) -> str:
        return (
            f"{self.epoch}\t{self.contrastive!r}\t{self.kl!r}\t"
            f"{self.total!r}\t{self.val_metric!r}"
        )


def total_loss(
    z_nep,
    z_mpp,
    spec: ContrastiveSpec,
    centroids,
    lambda_co: float,
    lambda_kl: float,
    target_p: np.ndarray | None = None,
) -> tuple[Tensor, LossReport]:
    """Weighted sum of the contrastive and KL terms.

    The KL target defaults to the distribution induced by the current
    assignments; either way it enters as a constant, so no gradient flows
    through P.
    """
    if lambda_co < 0 or lambda_kl < 0:
        raise ConfigError("loss weights must be non-negative")
    l_co = contrastive_loss(z_nep, z_mpp, spec)
    fused = nk.add(nk.as_tensor(z_nep), nk.as_tensor(z_mpp))
    q = soft_assignment(fused, centroids)
    if target_p is None:
        target_p = target_distribution(q.value)
    l_kl = kl_loss(target_p, q)
    total = nk.add(
        nk.mul(l_co, nk.constant(lambda_co)), nk.mul(l_kl, nk.constant(lambda_kl))
    )
    report = LossReport(
        epoch=0,
        contrastive=float(l_co.value),
        kl=float(l_kl.value),
        total=float(total.value),
    )
    return total, report
