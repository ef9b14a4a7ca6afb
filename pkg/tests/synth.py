"""Deterministic synthetic corpus for pipeline and acceptance tests.

Builds a small benchmark from one seed: layout pages whose regions
aggregate into exactly three content blocks each, block/query vector
files, a manifest with 20 eval samples (mixing single- and multi-gold
queries), generated answers, and token costs where every block costs a
third of its page. Also usable as a script to materialize a demo
corpus for the CLI.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from blockrag import io
from blockrag.geometry import (
    AggregationConfig,
    BBox,
    LayoutTag,
    Region,
    aggregate_blocks,
)

PAGE_W, PAGE_H = 1000.0, 1400.0
DIM = 16
BLOCK_TOKENS = 4
PAGE_TOKEN_COST = 300
BLOCK_TOKEN_COST = 100  # one third of its page

_WORDS = (
    "ledger flux quarry ember lattice orchid granite sparrow tide casket "
    "meridian copper willow harbor signal velvet anchor prism fathom cinder"
).split()


def _stack_regions(page_idx: int, stack: int, base_id: int) -> list[dict]:
    """Two vertically adjacent fragments that merge into one block."""
    y0 = 80.0 + stack * 320.0
    x0 = 100.0
    if page_idx % 2 == 0 and stack == 1:
        tags = ("figure", "figure_caption")
    else:
        tags = ("plain_text", "plain_text")
    words = [_WORDS[(page_idx * 7 + stack * 3 + i) % len(_WORDS)] for i in range(6)]
    return [
        {
            "id": base_id,
            "bbox": [x0, y0, x0 + 700.0, y0 + 60.0],
            "tag": tags[0],
            "text": f"page{page_idx} stack{stack} {' '.join(words[:3])}",
        },
        {
            "id": base_id + 1,
            "bbox": [x0, y0 + 70.0, x0 + 700.0, y0 + 130.0],
            "tag": tags[1],
            "text": f"continues {' '.join(words[3:])}",
        },
    ]


def make_layout_pages(n_pages: int) -> list[dict]:
    pages = []
    for p in range(n_pages):
        regions: list[dict] = []
        for stack in range(3):
            regions.extend(_stack_regions(p, stack, len(regions)))
        pages.append(
            {"page_id": f"p{p}", "width": PAGE_W, "height": PAGE_H, "regions": regions}
        )
    return pages


def random_regions(
    rng: np.random.Generator, max_regions: int = 30
) -> tuple[list[Region], BBox]:
    """Fully random page for oracle-equivalence fuzzing."""
    tags = list(LayoutTag)
    page = BBox(0.0, 0.0, PAGE_W, PAGE_H)
    n = int(rng.integers(0, max_regions + 1))
    regions = []
    for i in range(n):
        x1 = float(rng.uniform(0.0, PAGE_W - 10.0))
        y1 = float(rng.uniform(0.0, PAGE_H - 10.0))
        regions.append(
            Region(
                id=i,
                bbox=BBox(
                    x1,
                    y1,
                    x1 + float(rng.uniform(5.0, PAGE_W - x1)),
                    y1 + float(rng.uniform(5.0, PAGE_H - y1)),
                ),
                tag=tags[int(rng.integers(0, len(tags)))],
            )
        )
    return regions, page


@dataclass(frozen=True)
class Corpus:
    root: Path
    layout_path: Path
    blocks_path: Path
    vectors_path: Path
    queries_path: Path
    costs_path: Path
    manifest_path: Path
    answers_path: Path
    judge_path: Path
    block_ids: tuple[str, ...]
    masked_ids: tuple[str, ...]
    query_ids: tuple[str, ...]
    gold: dict[str, tuple[str, ...]]  # query_id -> gold block ids


def build_corpus(
    root: Path, seed: int = 20240817, n_pages: int = 7, n_samples: int = 20
) -> Corpus:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    cfg = AggregationConfig()

    layout_docs = make_layout_pages(n_pages)
    layout_path = root / "layout.json"
    io.write_json(layout_docs, layout_path)

    block_docs = []
    page_blocks: dict[str, list] = {}
    for doc in layout_docs:
        page_id, page_bbox, regions = io.parse_layout_page(doc)
        blocks = aggregate_blocks(regions, page_bbox, cfg)
        page_blocks[page_id] = blocks
        block_docs.append(io.blocks_page_to_dict(page_id, page_bbox, blocks))
    blocks_path = root / "blocks.json"
    io.write_json(block_docs, blocks_path)

    vectors: dict[str, np.ndarray] = {}
    block_ids: list[str] = []
    masked_ids: list[str] = []
    for page_id in sorted(page_blocks):
        for block in page_blocks[page_id]:
            bid = io.qualified_block_id(page_id, block.id)
            block_ids.append(bid)
            if block.is_masked_page:
                masked_ids.append(bid)
            vectors[bid] = rng.normal(size=(BLOCK_TOKENS, DIM)).astype(np.float32)
    vectors_path = root / "block_vectors.lfve"
    io.write_vector_file(vectors, vectors_path)

    costs_path = root / "token_costs.json"
    io.write_json({bid: BLOCK_TOKEN_COST for bid in block_ids}, costs_path)

    samples = []
    queries: dict[str, np.ndarray] = {}
    answers: dict[str, str] = {}
    judge: dict[str, float] = {}
    gold_map: dict[str, tuple[str, ...]] = {}
    for i in range(n_samples):
        qid = f"q{i:02d}"
        page_id = f"p{i % n_pages}"
        blocks = page_blocks[page_id]
        content = [b for b in blocks if not b.is_masked_page]
        if i < 14:
            gold_blocks = [content[i % 3]]
        else:
            gold_blocks = [content[0], content[2]]
        gold_ids = tuple(io.qualified_block_id(page_id, b.id) for b in gold_blocks)
        gold_map[qid] = gold_ids

        rows = []
        per = BLOCK_TOKENS // len(gold_ids)
        for gid in gold_ids:
            rows.append(vectors[gid][:per].astype(np.float64))
        q = np.concatenate(rows, axis=0)
        q = q + rng.normal(scale=0.05, size=q.shape)
        queries[qid] = q.astype(np.float32)

        evidence = " ".join(b.text for b in gold_blocks if b.text)
        answer = f"the answer cites {evidence.split()[0]} and {evidence.split()[-1]}"
        samples.append(
            {
                "query_id": qid,
                "query_text": f"what does {page_id} say about {evidence.split()[1]}?",
                "gold_block_ids": list(gold_ids),
                "gold_page_id": page_id,
                "answer_text": answer,
                "page_token_cost": PAGE_TOKEN_COST,
            }
        )
        if i % 4 == 0:
            answers[qid] = answer
        else:
            answers[qid] = " ".join(answer.split()[:-1] + ["instead"])
        judge[qid] = float(3 + (i % 3))

    queries_path = root / "query_vectors.lfve"
    io.write_vector_file(queries, queries_path)
    answers_path = root / "answers.json"
    io.write_json(answers, answers_path)
    judge_path = root / "judge.json"
    io.write_json(judge, judge_path)

    manifest_path = root / "manifest.json"
    io.write_json(
        {
            "dataset": "synthetic-20",
            "pages": [{"path": "blocks.json"}],
            "samples": samples,
            "page_token_costs": {f"p{p}": PAGE_TOKEN_COST for p in range(n_pages)},
        },
        manifest_path,
    )

    return Corpus(
        root=root,
        layout_path=layout_path,
        blocks_path=blocks_path,
        vectors_path=vectors_path,
        queries_path=queries_path,
        costs_path=costs_path,
        manifest_path=manifest_path,
        answers_path=answers_path,
        judge_path=judge_path,
        block_ids=tuple(block_ids),
        masked_ids=tuple(masked_ids),
        query_ids=tuple(sorted(queries)),
        gold=gold_map,
    )


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_corpus")
    corpus = build_corpus(target)
    print(f"wrote synthetic corpus under {corpus.root}")
    print(json.dumps({"pages": len(set(b.split(':')[0] for b in corpus.block_ids)),
                      "blocks": len(corpus.block_ids),
                      "queries": len(corpus.query_ids)}, indent=2))
