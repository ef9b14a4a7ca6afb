"""Export jobs: run an encoder over blocks or queries and write the
engine's vector file plus a token-cost sidecar.

Inputs are the engine's public JSON artifacts (blocks pages, a query
list); outputs are validated before the atomic rename, so a failed
job never leaves a partial file. Batching is sequential; it bounds
encoder memory without affecting output bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import Encoder, load_encoder
from .errors import EncoderOutputError, ExportError
from .vectorfile import write_vector_file


@dataclass(frozen=True)
class ExportJob:
    model_id: str
    input_path: str
    output_path: str
    costs_path: str | None = None
    device: str = "cpu"
    batch_size: int = 16

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ExportError(f"batch_size must be >= 1, got {self.batch_size}")


def _load_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ExportError(f"{path}: invalid JSON: {exc}") from None


def _blocks_items(path: str | Path) -> list[tuple[str, str | None]]:
    """(qualified block id, text) pairs from a blocks JSON document."""
    data = _load_json(path)
    docs = data if isinstance(data, list) else [data]
    items: list[tuple[str, str | None]] = []
    for doc in docs:
        try:
            page_id = doc["page_id"]
            blocks = doc["blocks"]
        except (TypeError, KeyError) as exc:
            raise ExportError(f"{path}: not a blocks page document ({exc})") from None
        for block in blocks:
            items.append((f"{page_id}:{block['id']}", block.get("text")))
    return items


def _query_items(path: str | Path) -> list[tuple[str, str]]:
    data = _load_json(path)
    if not isinstance(data, list):
        raise ExportError(f"{path}: queries JSON must be an array of objects")
    items = []
    for row in data:
        try:
            items.append((str(row["query_id"]), str(row["text"])))
        except (TypeError, KeyError):
            raise ExportError(
                f"{path}: each query needs 'query_id' and 'text', got {row!r}"
            ) from None
    return items


def _run(
    encoder: Encoder,
    kind: str,
    items: list[tuple[str, str | None]],
    job: ExportJob,
) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    vectors: dict[str, np.ndarray] = {}
    costs: dict[str, int] = {}
    for start in range(0, len(items), job.batch_size):
        for item_id, text in items[start : start + job.batch_size]:
            if item_id in vectors:
                raise ExportError(f"duplicate id {item_id!r} in input")
            try:
                encoded = encoder.encode(kind, item_id, text)
            except MemoryError:
                raise ExportError(
                    f"encoder ran out of memory on {item_id!r}; rerun with a "
                    f"smaller --batch-size (current {job.batch_size})"
                ) from None
            m = np.asarray(encoded.vectors)
            if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] != encoder.dim:
                raise EncoderOutputError(
                    f"encoder returned shape {m.shape} for {item_id!r}, "
                    f"expected (N, {encoder.dim})"
                )
            if not np.all(np.isfinite(m)):
                raise EncoderOutputError(f"non-finite embedding for {item_id!r}")
            vectors[item_id] = m.astype(np.float32)
            costs[item_id] = int(encoded.token_cost)
    return vectors, costs


def _write_outputs(
    vectors: dict[str, np.ndarray], costs: dict[str, int], job: ExportJob
) -> None:
    write_vector_file(vectors, job.output_path)
    if job.costs_path:
        payload = json.dumps({k: costs[k] for k in sorted(costs)}, indent=2) + "\n"
        Path(job.costs_path).write_text(payload, encoding="utf-8")


def export_block_vectors(job: ExportJob) -> int:
    """Encode every block of a blocks JSON; returns the entry count."""
    encoder = load_encoder(job.model_id)
    vectors, costs = _run(encoder, "block", _blocks_items(job.input_path), job)
    _write_outputs(vectors, costs, job)
    return len(vectors)


def export_query_vectors(job: ExportJob) -> int:
    """Encode a queries JSON array of {query_id, text} records."""
    encoder = load_encoder(job.model_id)
    vectors, costs = _run(encoder, "query", _query_items(job.input_path), job)
    _write_outputs(vectors, costs, job)
    return len(vectors)


def export_fusion_inputs(job: ExportJob, out_dir: str | Path) -> dict[str, int]:
    """Emit the raw pieces the engine's fusion kernels consume.

    Writes three vector files under ``out_dir``: per-block local rows
    (1 x D), per-page global token matrices, and per-tag embedding
    rows, keyed so the engine can verify its fusion path end to end.
    """
    encoder = load_encoder(job.model_id)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = _load_json(job.input_path)
    docs = data if isinstance(data, list) else [data]

    local: dict[str, np.ndarray] = {}
    global_: dict[str, np.ndarray] = {}
    tags: dict[str, np.ndarray] = {}
    for doc in docs:
        page_id = doc["page_id"]
        page_rows = []
        for block in doc["blocks"]:
            bid = f"{page_id}:{block['id']}"
            encoded = encoder.encode("block", bid, block.get("text"))
            row = encoded.vectors.mean(axis=0, keepdims=True).astype(np.float32)
            local[bid] = row
            page_rows.append(row)
            tag = block["tag"]
            if tag not in tags:
                tags[tag] = encoder.encode("tag", tag, tag).vectors
        stacked = np.concatenate(page_rows, axis=0) if page_rows else None
        global_[page_id] = (
            encoder.encode("page", page_id, None).vectors
            if stacked is None
            else np.concatenate(
                [encoder.encode("page", page_id, None).vectors, stacked]
            ).astype(np.float32)
        )
    write_vector_file(local, out_dir / "block_rows.lfve")
    write_vector_file(global_, out_dir / "page_global.lfve")
    write_vector_file(tags, out_dir / "tag_rows.lfve")
    return {"blocks": len(local), "pages": len(global_), "tags": len(tags)}
