"""Multi-vector block index with late-interaction MaxSim search.

A query and a block each carry an N x D matrix of token embeddings.
Relevance is the MaxSim score: for every query token take its maximum
dot product over the block's tokens, then sum over query tokens.
Pages score as the maximum over their member blocks.

Scoring arithmetic is pinned down exactly: dot products accumulate
over the embedding dimension in index order, per-token maxima are
taken in block-token order, and the final sum runs in query-token
order, all in float64 (stored vectors are float32 and widened first).
The vectorized path below reproduces that order bit-for-bit because it
only uses elementwise operations, never reassociating reductions; this
also keeps results independent of thread count and insertion order.

Search is exhaustive by design; corpora here are desk-scale and the
evaluation protocol tolerates no approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateIdError, ValidationError
from .geometry import LayoutTag


def as_multivector(x, *, name: str = "vectors") -> np.ndarray:
    """Validate an N x D token-embedding matrix (N >= 1, finite)."""
    a = np.asarray(x)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError(f"{name} must be a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains NaN or Inf")
    return a


def _ordered_dot_matrix(q64: np.ndarray, b64: np.ndarray) -> np.ndarray:
    # All pairwise dot products, accumulated one dimension at a time so
    # every scalar rounds exactly like a sequential loop over D.
    s = np.zeros((q64.shape[0], b64.shape[0]))
    for k in range(q64.shape[1]):
        s += q64[:, k, None] * b64[None, :, k]
    return s


def _sum_in_order(values: np.ndarray) -> float:
    total = 0.0
    for v in values:
        total += float(v)
    return total


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-normalize to unit length; zero rows are left untouched."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.sqrt((m * m).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    return m / norms


def maxsim(q, b) -> float:
    """Late-interaction score of one query against one block."""
    q64 = as_multivector(q, name="query vectors").astype(np.float64)
    b64 = as_multivector(b, name="block vectors").astype(np.float64)
    if q64.shape[1] != b64.shape[1]:
        raise ValidationError(
            f"dimension mismatch: query D={q64.shape[1]}, block D={b64.shape[1]}"
        )
    per_token = _ordered_dot_matrix(q64, b64).max(axis=1)
    return _sum_in_order(per_token)


@dataclass(frozen=True)
class IndexEntry:
    """One indexed block. ``token_cost`` is the number of generation
    input tokens this block contributes when retrieved."""

    block_id: str
    page_id: str
    doc_id: str
    tag: LayoutTag
    vectors: np.ndarray
    token_cost: int = 0

    def __post_init__(self) -> None:
        if not self.block_id:
            raise ValidationError("block_id must be non-empty")
        if not self.page_id:
            raise ValidationError("page_id must be non-empty")
        if self.token_cost < 0:
            raise ValidationError(f"token_cost must be >= 0, got {self.token_cost}")
        v = as_multivector(self.vectors, name=f"vectors of {self.block_id}")
        # float32 is the storage precision; scoring widens per dot product
        object.__setattr__(self, "vectors", np.ascontiguousarray(v, dtype=np.float32))


@dataclass(frozen=True)
class SearchHit:
    block_id: str
    page_id: str
    score: float


class BlockIndex:
    """Exhaustive multi-vector index over block entries.

    Single-writer while building; ``seal()`` freezes it, after which
    any number of readers may search concurrently. Results never
    depend on insertion order: ranking ties break on block_id
    ascending.
    """

    def __init__(self, dim: int | None = None, *, normalize: bool = False):
        self._dim = dim
        self._normalize = normalize
        self._entries: dict[str, IndexEntry] = {}
        self._sealed = False

    @property
    def dim(self) -> int | None:
        return self._dim

    @property
    def normalize(self) -> bool:
        return self._normalize

    @property
    def sealed(self) -> bool:
        return self._sealed

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, block_id: str) -> bool:
        return block_id in self._entries

    def entries(self) -> list[IndexEntry]:
        """Entries in block_id order."""
        return [self._entries[k] for k in sorted(self._entries)]

    def get(self, block_id: str) -> IndexEntry:
        try:
            return self._entries[block_id]
        except KeyError:
            raise ValidationError(f"unknown block_id {block_id!r}") from None

    def add_block(self, entry: IndexEntry) -> None:
        if self._sealed:
            raise ValidationError("index is sealed; no further writes allowed")
        if entry.block_id in self._entries:
            raise DuplicateIdError(f"duplicate block_id {entry.block_id!r}")
        if self._dim is None:
            self._dim = int(entry.vectors.shape[1])
        elif entry.vectors.shape[1] != self._dim:
            raise ValidationError(
                f"entry {entry.block_id!r} has dimension {entry.vectors.shape[1]}, "
                f"index dimension is {self._dim}"
            )
        if self._normalize:
            vecs = l2_normalize_rows(entry.vectors).astype(np.float32)
            entry = IndexEntry(
                entry.block_id, entry.page_id, entry.doc_id, entry.tag, vecs,
                entry.token_cost,
            )
        self._entries[entry.block_id] = entry

    def seal(self) -> None:
        self._sealed = True

    def _prepare_query(self, q) -> np.ndarray:
        q64 = as_multivector(q, name="query vectors").astype(np.float64)
        if self._dim is not None and q64.shape[1] != self._dim:
            raise ValidationError(
                f"query dimension {q64.shape[1]} does not match index dimension {self._dim}"
            )
        if self._normalize:
            q64 = l2_normalize_rows(q64)
        return q64

    def score_all(self, q) -> dict[str, float]:
        """MaxSim score of the query against every entry."""
        q64 = self._prepare_query(q)
        ids = sorted(self._entries)
        if not ids:
            return {}
        stacked = np.concatenate(
            [self._entries[i].vectors.astype(np.float64) for i in ids], axis=0
        )
        dots = _ordered_dot_matrix(q64, stacked)
        scores: dict[str, float] = {}
        offset = 0
        for i in ids:
            n = self._entries[i].vectors.shape[0]
            per_token = dots[:, offset : offset + n].max(axis=1)
            scores[i] = _sum_in_order(per_token)
            offset += n
        return scores

    def search_topk(self, q, k: int) -> list[SearchHit]:
        """The k best blocks, sorted by (score desc, block_id asc)."""
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        scores = self.score_all(q)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return [
            SearchHit(bid, self._entries[bid].page_id, score)
            for bid, score in ranked[:k]
        ]

    def page_scores(
        self, q, *, exclude_block_ids: frozenset[str] | set[str] = frozenset()
    ) -> dict[str, float]:
        """Max member-block score per page.

        Masked-page auxiliary blocks are page members and participate
        by default; pass their ids in ``exclude_block_ids`` to reproduce
        a content-blocks-only ranking.
        """
        scores = self.score_all(q)
        pages: dict[str, float] = {}
        for bid in sorted(scores):
            if bid in exclude_block_ids:
                continue
            pid = self._entries[bid].page_id
            s = scores[bid]
            if pid not in pages or s > pages[pid]:
                pages[pid] = s
        return pages

    def rank_pages(
        self, q, k: int | None = None, *,
        exclude_block_ids: frozenset[str] | set[str] = frozenset(),
    ) -> list[tuple[str, float]]:
        pages = self.page_scores(q, exclude_block_ids=exclude_block_ids)
        ranked = sorted(pages.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked if k is None else ranked[:k]

    def retrieve_for_generation(self, q, k: int) -> tuple[list[SearchHit], int]:
        """Top-k hits plus the total generation token cost they incur."""
        hits = self.search_topk(q, k)
        cost = sum(self._entries[h.block_id].token_cost for h in hits)
        return hits, cost
