"""Retrieval and generation evaluation.

Retrieval quality: nDCG@k and Recall@k with binary relevance, at block
granularity (multi-gold) and page granularity (singleton gold, so
recall degenerates to hit-rate). Generation quality: ROUGE-L over word
tokens, normalized LCS of gold evidence against retrieved text, and
multiset word-overlap F1. Token accounting averages the generation
input cost of the retrieved context per query.

One shared tokenizer (lowercase, Unicode-whitespace split, surrounding
punctuation stripped) feeds every text metric so they agree on word
boundaries.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ValidationError

DEFAULT_KS: tuple[int, ...] = (1, 3, 5, 10)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens with surrounding punctuation stripped."""
    out = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if end > start:
            out.append(raw[start:end])
    return out


def _check_ranking(ranked_ids: Sequence[str], gold: set) -> None:
    if not gold:
        raise ValidationError("gold set must be non-empty")
    if len(set(ranked_ids)) != len(ranked_ids):
        raise ValidationError("ranked list contains duplicate ids")


def ndcg_at_k(ranked_ids: Sequence[str], gold: set, k: int) -> float:
    """Binary-gain nDCG truncated at rank k."""
    _check_ranking(ranked_ids, gold)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for rank, rid in enumerate(ranked_ids[:k], start=1):
        if rid in gold:
            dcg += 1.0 / math.log2(rank + 1)
    ideal = sum(1.0 / math.log2(r + 1) for r in range(1, min(len(gold), k) + 1))
    return dcg / ideal


def recall_at_k(ranked_ids: Sequence[str], gold: set, k: int) -> float:
    """Fraction of gold ids present in the top k."""
    _check_ranking(ranked_ids, gold)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    return len(set(ranked_ids[:k]) & gold) / len(gold)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence, full DP table."""
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        return 0
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        ai = a[i - 1]
        row, prev = dp[i], dp[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    return dp[m][n]


def rouge_l(candidate: str, reference: str, *, beta: float = 1.0) -> float:
    """LCS-based F-measure over word tokens; symmetric at beta=1."""
    c = tokenize(candidate)
    r = tokenize(reference)
    if not c and not r:
        return 1.0
    if not c or not r:
        return 0.0
    lcs = lcs_length(c, r)
    if lcs == 0:
        return 0.0
    p = lcs / len(c)
    rec = lcs / len(r)
    b2 = beta * beta
    return (1 + b2) * p * rec / (rec + b2 * p)


def anlcs(retrieved_text: str, gold_text: str) -> float:
    """LCS(gold, retrieved) normalized by gold length, word-level."""
    gold = tokenize(gold_text)
    if not gold:
        raise ValidationError("gold text must contain at least one token")
    retrieved = tokenize(retrieved_text)
    if not retrieved:
        return 0.0
    return lcs_length(gold, retrieved) / len(gold)


def word_overlap_f1(candidate: str, reference: str) -> float:
    """Harmonic mean of multiset token precision and recall."""
    c = Counter(tokenize(candidate))
    r = Counter(tokenize(reference))
    if not c and not r:
        return 1.0
    if not c or not r:
        return 0.0
    overlap = sum((c & r).values())
    if overlap == 0:
        return 0.0
    p = overlap / sum(c.values())
    rec = overlap / sum(r.values())
    return 2 * p * rec / (p + rec)


@dataclass(frozen=True)
class EvalSample:
    """One benchmark record: a query, its gold blocks and page, and the
    reference answer."""

    query_id: str
    query_text: str
    gold_block_ids: frozenset[str]
    gold_page_id: str
    answer_text: str
    page_token_cost: int | None = None

    def __post_init__(self) -> None:
        if not self.query_id:
            raise ValidationError("query_id must be non-empty")
        if not self.gold_block_ids:
            raise ValidationError(f"sample {self.query_id}: gold_block_ids is empty")
        if not self.gold_page_id:
            raise ValidationError(f"sample {self.query_id}: gold_page_id is empty")


@dataclass(frozen=True)
class MetricReport:
    """Macro-averaged metrics over an evaluation run.

    Retrieval maps are keyed by k. Generation metrics are None when no
    generated answers were supplied; page metrics are None without a
    page ranking. ``judge_score`` averages externally supplied scores.
    """

    num_samples: int
    ks: tuple[int, ...]
    block_ndcg: dict[int, float]
    block_recall: dict[int, float]
    page_ndcg: dict[int, float] | None = None
    page_recall: dict[int, float] | None = None
    rouge_l: float | None = None
    anlcs: float | None = None
    word_f1: float | None = None
    judge_score: float | None = None
    mean_tokens: float | None = None
    mean_page_tokens: float | None = None
    config: dict | None = None

    def _scalar_fields(self) -> dict[str, float | None]:
        return {
            "rouge_l": self.rouge_l,
            "anlcs": self.anlcs,
            "word_f1": self.word_f1,
            "judge_score": self.judge_score,
            "mean_tokens": self.mean_tokens,
            "mean_page_tokens": self.mean_page_tokens,
        }

    def _granularity(self, ndcg, recall) -> dict | None:
        if ndcg is None:
            return None
        return {
            "ndcg": {str(k): ndcg[k] for k in self.ks},
            "recall": {str(k): recall[k] for k in self.ks},
        }

    def to_json_dict(self) -> dict:
        """Stable-ordered report: rounded summary plus full-precision raw."""

        def rounded(obj):
            if isinstance(obj, float):
                return round(obj, 4)
            if isinstance(obj, dict):
                return {k: rounded(v) for k, v in obj.items()}
            return obj

        raw = {
            "block": self._granularity(self.block_ndcg, self.block_recall),
            "page": self._granularity(self.page_ndcg, self.page_recall),
            **self._scalar_fields(),
        }
        out = {
            "num_samples": self.num_samples,
            "ks": list(self.ks),
            "summary": rounded(raw),
            "raw": raw,
        }
        if self.config is not None:
            out["config"] = self.config
        return out


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def evaluate_run(
    samples: Sequence[EvalSample],
    block_rankings: Mapping[str, Sequence[str]],
    *,
    page_rankings: Mapping[str, Sequence[str]] | None = None,
    answers: Mapping[str, str] | None = None,
    judge_scores: Mapping[str, float] | None = None,
    retrieved_texts: Mapping[str, str] | None = None,
    gold_texts: Mapping[str, str] | None = None,
    token_totals: Mapping[str, int] | None = None,
    page_token_costs: Mapping[str, int] | None = None,
    baseline_page_k: int | None = None,
    ks: Sequence[int] = DEFAULT_KS,
    config: dict | None = None,
    threads: int = 1,
) -> MetricReport:
    """Macro-average every configured metric over the samples.

    Every sample must have a block ranking; a missing or mismatched
    query_id is an error naming it. Per-sample computation may fan out
    over ``threads`` but is reduced in sample order, so the report is
    identical for any thread count.
    """
    if not samples:
        raise ValidationError("evaluate_run needs at least one sample")
    ks = tuple(ks)
    seen = set()
    for s in samples:
        if s.query_id in seen:
            raise ValidationError(f"duplicate query_id {s.query_id!r} in samples")
        seen.add(s.query_id)
        if s.query_id not in block_rankings:
            raise ValidationError(f"no result for query_id {s.query_id!r}")
        if page_rankings is not None and s.query_id not in page_rankings:
            raise ValidationError(f"no page result for query_id {s.query_id!r}")

    def per_sample(s: EvalSample) -> dict:
        ranked = list(block_rankings[s.query_id])
        gold = set(s.gold_block_ids)
        row: dict = {
            "block_ndcg": {k: ndcg_at_k(ranked, gold, k) for k in ks},
            "block_recall": {k: recall_at_k(ranked, gold, k) for k in ks},
        }
        if page_rankings is not None:
            pages = list(page_rankings[s.query_id])
            pgold = {s.gold_page_id}
            row["page_ndcg"] = {k: ndcg_at_k(pages, pgold, k) for k in ks}
            row["page_recall"] = {k: recall_at_k(pages, pgold, k) for k in ks}
            if page_token_costs is not None:
                cut = len(pages) if baseline_page_k is None else baseline_page_k
                row["page_tokens"] = sum(
                    page_token_costs.get(p, 0) for p in pages[:cut]
                )
        if answers is not None and s.query_id in answers:
            row["rouge_l"] = rouge_l(answers[s.query_id], s.answer_text)
            row["word_f1"] = word_overlap_f1(answers[s.query_id], s.answer_text)
        if (
            retrieved_texts is not None
            and gold_texts is not None
            and s.query_id in gold_texts
            and tokenize(gold_texts[s.query_id])
        ):
            row["anlcs"] = anlcs(retrieved_texts.get(s.query_id, ""), gold_texts[s.query_id])
        if token_totals is not None and s.query_id in token_totals:
            row["tokens"] = token_totals[s.query_id]
        if judge_scores is not None and s.query_id in judge_scores:
            row["judge"] = judge_scores[s.query_id]
        return row

    # Reduce in query_id order so the report is invariant to both
    # sample permutation and the thread fan-out.
    ordered = sorted(samples, key=lambda s: s.query_id)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(per_sample, ordered))
    else:
        rows = [per_sample(s) for s in ordered]

    def avg_per_k(key: str) -> dict[int, float] | None:
        if key not in rows[0]:
            return None
        return {k: _mean([r[key][k] for r in rows]) for k in ks}

    def avg_scalar(key: str) -> float | None:
        vals = [r[key] for r in rows if key in r]
        return _mean(vals) if vals else None

    return MetricReport(
        num_samples=len(samples),
        ks=ks,
        block_ndcg=avg_per_k("block_ndcg"),
        block_recall=avg_per_k("block_recall"),
        page_ndcg=avg_per_k("page_ndcg"),
        page_recall=avg_per_k("page_recall"),
        rouge_l=avg_scalar("rouge_l"),
        anlcs=avg_scalar("anlcs"),
        word_f1=avg_scalar("word_f1"),
        judge_score=avg_scalar("judge"),
        mean_tokens=avg_scalar("tokens"),
        mean_page_tokens=avg_scalar("page_tokens"),
        config=config,
    )
