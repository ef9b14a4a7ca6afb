"""Numeric kernels for the semantic-layout fusion encoder and the
multi-positive contrastive objective.

Kernels:
  * scaled dot-product attention, softmax(Q K^T / sqrt(d)) V
  * contextualization of block embeddings against a global page
    embedding used as key and value
  * concat-then-project fusion of local and contextual rows
  * assembly of a block's multi-vector representation (fused row
    followed by its tag-embedding rows)
  * the contrastive loss over per-query positive/negative score sets
    and its analytic gradient

Everything computes in float64; float32 inputs are widened on entry.
All functions are pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return a


def _as_row(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ValidationError(f"{name} must be a 1-D row vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return a


def softmax_weights(q: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Row-stochastic attention weights softmax(q k^T / sqrt(d))."""
    q = _as_matrix(q, "Q")
    k = _as_matrix(k, "K")
    if q.shape[1] != k.shape[1]:
        raise ValidationError(
            f"Q and K dimension mismatch: {q.shape[1]} vs {k.shape[1]}"
        )
    scores = (q @ k.T) / math.sqrt(q.shape[1])
    scores -= scores.max(axis=1, keepdims=True)
    w = np.exp(scores)
    return w / w.sum(axis=1, keepdims=True)


def attention(q, k, v) -> np.ndarray:
    """Scaled dot-product attention; each output row is a convex
    combination of V's rows."""
    q = _as_matrix(q, "Q")
    k = _as_matrix(k, "K")
    v = _as_matrix(v, "V")
    if k.shape[0] != v.shape[0]:
        raise ValidationError(
            f"K and V must have the same row count: {k.shape[0]} vs {v.shape[0]}"
        )
    return softmax_weights(q, k) @ v


def contextualize(block_embs: list, h_global) -> list[np.ndarray]:
    """Attend each block row against the global page embedding.

    ``h_global`` is an m x d matrix of global tokens (a single row is
    accepted and treated as m=1); it serves as both key and value.
    Returns one contextual row per block.
    """
    if not block_embs:
        return []
    h = np.stack([_as_row(e, "block embedding") for e in block_embs])
    g = np.asarray(h_global, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    g = _as_matrix(g, "h_global")
    if g.shape[1] != h.shape[1]:
        raise ValidationError(
            f"h_global dimension {g.shape[1]} does not match block dimension {h.shape[1]}"
        )
    out = attention(h, g, g)
    return [out[i] for i in range(out.shape[0])]


def fuse_and_project(h_i, h_ctx, w_p) -> np.ndarray:
    """Project the concatenation [h_i, h_ctx] with w_p (rows x cols)."""
    h_i = _as_row(h_i, "h_i")
    h_ctx = _as_row(h_ctx, "h_ctx")
    w = _as_matrix(w_p, "w_p")
    fused = np.concatenate([h_i, h_ctx])
    if w.shape[1] != fused.shape[0]:
        raise ValidationError(
            f"projection expects {w.shape[1]} inputs, got {fused.shape[0]}"
        )
    return w @ fused


def assemble_block_rep(h_tilde, tag_emb) -> np.ndarray:
    """Stack the fused row above the tag-embedding rows.

    ``tag_emb`` may have zero rows, in which case the block
    representation is the fused row alone.
    """
    h_tilde = _as_row(h_tilde, "h_tilde")
    t = np.asarray(tag_emb, dtype=np.float64)
    if t.ndim != 2:
        raise ValidationError(f"tag_emb must be 2-D, got shape {t.shape}")
    if t.shape[0] == 0:
        return h_tilde[None, :].copy()
    if not np.all(np.isfinite(t)):
        raise ValidationError("tag_emb contains NaN or Inf")
    if t.shape[1] != h_tilde.shape[0]:
        raise ValidationError(
            f"tag_emb dimension {t.shape[1]} does not match h_tilde {h_tilde.shape[0]}"
        )
    return np.vstack([h_tilde[None, :], t])


@dataclass(frozen=True)
class QueryScores:
    """Similarity scores of one query against its positive and negative
    blocks. At least one positive is required; negatives may be empty."""

    positives: tuple[float, ...]
    negatives: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.positives) < 1:
            raise ValidationError("each query needs at least one positive score")
        for s in (*self.positives, *self.negatives):
            if not math.isfinite(s):
                raise ValidationError(f"scores must be finite, got {s!r}")


@dataclass(frozen=True)
class LossBatch:
    queries: tuple[QueryScores, ...]
    tau: float = 0.02

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValidationError(f"temperature tau must be > 0, got {self.tau}")
        if len(self.queries) < 1:
            raise ValidationError("loss batch must contain at least one query")


def _lse(z: np.ndarray) -> float:
    # log-sum-exp with max subtraction; z non-empty
    m = float(z.max())
    return m + math.log(float(np.exp(z - m).sum()))


def contrastive_loss(batch: LossBatch) -> float:
    """Mean over queries of -log( sum_pos e^{s/tau} / sum_all e^{s/tau} ).

    Numerator and denominator use separate max-subtracted log-sum-exp,
    so the loss stays finite for score gaps far beyond float range.
    """
    total = 0.0
    for q in batch.queries:
        pos = np.asarray(q.positives, dtype=np.float64) / batch.tau
        allz = np.concatenate(
            [pos, np.asarray(q.negatives, dtype=np.float64) / batch.tau]
        )
        total += _lse(allz) - _lse(pos)
    return total / len(batch.queries)


def contrastive_loss_grad(batch: LossBatch) -> list[tuple[np.ndarray, np.ndarray]]:
    """Analytic d(loss)/d(score) per query: (positive grads, negative grads).

    For query k with softmax p over all scores and p+ over positives
    only, the gradient is (p - 1[pos] * p+) / (b * tau): negatives get
    >= 0, positives <= 0, and each query's entries sum to zero.
    """
    b = len(batch.queries)
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for q in batch.queries:
        pos = np.asarray(q.positives, dtype=np.float64) / batch.tau
        neg = np.asarray(q.negatives, dtype=np.float64) / batch.tau
        allz = np.concatenate([pos, neg])
        m_all = float(allz.max())
        e_all = np.exp(allz - m_all)
        p_all = e_all / e_all.sum()

        m_pos = float(pos.max())
        e_pos = np.exp(pos - m_pos)
        p_pos = e_pos / e_pos.sum()

        npos = len(pos)
        scale = 1.0 / (b * batch.tau)
        g_pos = (p_all[:npos] - p_pos) * scale
        g_neg = p_all[npos:] * scale
        grads.append((g_pos, g_neg))
    return grads
