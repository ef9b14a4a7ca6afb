"""Built-in numeric self-verification suites.

Each suite re-derives expected values with a deliberately naive
reference (plain loops, finite differences, union-find) and compares
the engine against it, reporting the worst observed error. These back
the ``verify`` CLI subcommand so an installation can prove its
numerics on site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fusion, geometry, index

SUITES = ("fusion", "loss", "maxsim", "aggregate")


@dataclass(frozen=True)
class SuiteResult:
    suite: str
    passed: bool
    cases: int
    max_error: float
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.suite}: {self.cases} cases, "
            f"max error {self.max_error:.3e} ({self.detail})"
        )


# --- naive references ------------------------------------------------------


def _maxsim_loops(q: np.ndarray, b: np.ndarray) -> float:
    total = 0.0
    for i in range(q.shape[0]):
        best = -math.inf
        for j in range(b.shape[0]):
            d = 0.0
            for k in range(q.shape[1]):
                d += float(q[i, k]) * float(b[j, k])
            if d > best:
                best = d
        total += best
    return total


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _components_unionfind(
    regions: list[geometry.Region], cfg: geometry.AggregationConfig
) -> set[frozenset[int]]:
    uf = _UnionFind(len(regions))
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            if geometry.merge_predicate(regions[i], regions[j], cfg):
                uf.union(i, j)
    groups: dict[int, set[int]] = {}
    for i, r in enumerate(regions):
        groups.setdefault(uf.find(i), set()).add(r.id)
    return {frozenset(g) for g in groups.values()}


def _random_page(rng: np.random.Generator, max_regions: int = 30):
    tags = list(geometry.LayoutTag)
    n = int(rng.integers(0, max_regions + 1))
    page = geometry.BBox(0.0, 0.0, 1000.0, 1400.0)
    regions = []
    for i in range(n):
        x1 = float(rng.uniform(0, 900))
        y1 = float(rng.uniform(0, 1300))
        w = float(rng.uniform(5, 1000 - x1))
        h = float(rng.uniform(5, 1400 - y1))
        regions.append(
            geometry.Region(
                id=i,
                bbox=geometry.BBox(x1, y1, x1 + w, y1 + h),
                tag=tags[int(rng.integers(0, len(tags)))],
            )
        )
    return regions, page


# --- suites ----------------------------------------------------------------


def verify_fusion(trials: int = 200, seed: int = 7) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        d = int(rng.integers(1, 8))
        dv = int(rng.integers(1, 8))
        q = rng.normal(size=(n, d))
        k = rng.normal(size=(m, d))
        v = rng.normal(size=(m, dv))
        w = fusion.softmax_weights(q, k)
        worst = max(worst, float(np.abs(w.sum(axis=1) - 1.0).max()))
        if w.min() < 0.0:
            worst = max(worst, float(-w.min()))
        out = fusion.attention(q, k, v)
        hull_excess = np.maximum(out - v.max(axis=0), 0.0) + np.maximum(
            v.min(axis=0) - out, 0.0
        )
        worst = max(worst, float(hull_excess.max()))
    passed = worst < 1e-12
    return SuiteResult(
        "fusion", passed, trials, worst,
        "row sums vs 1, weight positivity, convex-hull bounds",
    )


def verify_loss(batches: int = 100, seed: int = 11, h: float = 1e-5) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    finite = True
    for t in range(batches):
        tau = 0.02 if t % 2 == 0 else float(rng.uniform(0.05, 1.5))
        queries = []
        for _ in range(int(rng.integers(1, 4))):
            npos = int(rng.integers(1, 4))
            nneg = int(rng.integers(0, 5))
            queries.append(
                fusion.QueryScores(
                    tuple(float(s) for s in rng.uniform(-1, 1, npos)),
                    tuple(float(s) for s in rng.uniform(-1, 1, nneg)),
                )
            )
        batch = fusion.LossBatch(tuple(queries), tau=tau)
        loss = fusion.contrastive_loss(batch)
        finite = finite and math.isfinite(loss) and loss >= 0.0
        grads = fusion.contrastive_loss_grad(batch)
        for qi, q in enumerate(batch.queries):
            for side in ("positives", "negatives"):
                scores = getattr(q, side)
                for si in range(len(scores)):
                    def shifted(delta: float) -> float:
                        lists = {
                            "positives": list(q.positives),
                            "negatives": list(q.negatives),
                        }
                        lists[side][si] += delta
                        qs = list(batch.queries)
                        qs[qi] = fusion.QueryScores(
                            tuple(lists["positives"]), tuple(lists["negatives"])
                        )
                        return fusion.contrastive_loss(
                            fusion.LossBatch(tuple(qs), tau=tau)
                        )

                    fd = (shifted(h) - shifted(-h)) / (2 * h)
                    analytic = grads[qi][0 if side == "positives" else 1][si]
                    err = abs(analytic - fd) / max(1.0, abs(analytic), abs(fd))
                    worst = max(worst, err)
    passed = finite and worst < 1e-5
    return SuiteResult(
        "loss", passed, batches, worst, "analytic vs central finite differences"
    )


def verify_maxsim(pairs: int = 300, seed: int = 13) -> SuiteResult:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(pairs):
        nq = int(rng.integers(1, 7))
        nb = int(rng.integers(1, 9))
        d = int(rng.integers(1, 17))
        q = rng.normal(size=(nq, d)).astype(np.float32)
        b = rng.normal(size=(nb, d)).astype(np.float32)
        engine = index.maxsim(q, b)
        reference = _maxsim_loops(q.astype(np.float64), b.astype(np.float64))
        if engine != reference:
            mismatches += 1
    return SuiteResult(
        "maxsim", mismatches == 0, pairs, float(mismatches),
        "bitwise mismatches vs triple loop",
    )


def verify_aggregate(pages: int = 200, seed: int = 17) -> SuiteResult:
    rng = np.random.default_rng(seed)
    cfg = geometry.AggregationConfig()
    mismatches = 0
    for _ in range(pages):
        regions, page = _random_page(rng)
        blocks = geometry.aggregate_blocks(regions, page, cfg)
        engine = {
            frozenset(b.member_region_ids)
            for b in blocks
            if not b.is_masked_page
        }
        if engine != _components_unionfind(regions, cfg):
            mismatches += 1
    return SuiteResult(
        "aggregate", mismatches == 0, pages, float(mismatches),
        "component mismatches vs union-find",
    )


def run_suite(name: str) -> SuiteResult:
    runners = {
        "fusion": verify_fusion,
        "loss": verify_loss,
        "maxsim": verify_maxsim,
        "aggregate": verify_aggregate,
    }
    if name not in runners:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    return runners[name]()
