"""Readers and writers for every on-disk artifact.

Formats (all public contract, documented byte-by-byte in
docs/formats.md):

  layout page JSON   {"page_id", "width", "height", "regions": [...]}
  blocks page JSON   {"page_id", "width", "height", "blocks": [...]}
  vector file        magic "LFVE" | version u32 | dim u32 | count u32
                     then per entry: id_len u16 | id utf-8 | N u32 |
                     N*D float32. All integers little-endian.
  index file         magic "LFIX" | version u32 | dim u32 | count u64
                     then per entry: block_id, page_id, doc_id, tag
                     (each u16-length-prefixed utf-8) | N u32 |
                     N*D float32 | token_cost u32.
  manifest JSON      dataset name, blocks pages (inline or by path),
                     eval samples, optional per-page token costs.

Binary writers are deterministic: identical input produces identical
bytes. Readers validate magic, version, and declared counts, and
raise named errors instead of crashing on corrupt input.
"""

from __future__ import annotations

import io as _io
import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import (
    BadMagicError,
    DanglingReferenceError,
    DuplicateIdError,
    SchemaError,
    TruncatedFileError,
    UnsupportedVersionError,
    ValidationError,
)
from .geometry import BBox, Block, LayoutTag, Region
from .index import BlockIndex, IndexEntry, as_multivector
from .metrics import EvalSample, MetricReport

VECTOR_MAGIC = b"LFVE"
INDEX_MAGIC = b"LFIX"
FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# layout / blocks JSON


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing required key {key!r}")
    return obj[key]


def _parse_tag(raw, where: str) -> LayoutTag:
    try:
        return LayoutTag(raw)
    except ValueError:
        raise SchemaError(f"{where}: unknown layout tag {raw!r}") from None


def _parse_bbox(raw, where: str) -> BBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise SchemaError(f"{where}: bbox must be [x1, y1, x2, y2], got {raw!r}")
    try:
        return BBox(*(float(v) for v in raw))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise SchemaError(f"{where}: {exc}") from None
        raise SchemaError(f"{where}: bbox values must be numbers, got {raw!r}") from None


def parse_layout_page(doc: dict) -> tuple[str, BBox, list[Region]]:
    """Validate one layout page document; returns (page_id, page bbox, regions)."""
    if not isinstance(doc, dict):
        raise SchemaError(f"layout page must be a JSON object, got {type(doc).__name__}")
    page_id = _require(doc, "page_id", "layout page")
    if not isinstance(page_id, str) or not page_id:
        raise SchemaError(f"layout page: page_id must be a non-empty string, got {page_id!r}")
    where = f"page {page_id}"
    width = float(_require(doc, "width", where))
    height = float(_require(doc, "height", where))
    page_bbox = BBox(0.0, 0.0, width, height)
    regions = []
    for raw in _require(doc, "regions", where):
        rw = f"{where} region {raw.get('id') if isinstance(raw, dict) else raw!r}"
        if not isinstance(raw, dict):
            raise SchemaError(f"{rw}: region must be an object")
        rid = _require(raw, "id", rw)
        if not isinstance(rid, int) or isinstance(rid, bool):
            raise SchemaError(f"{rw}: id must be an integer, got {rid!r}")
        text = raw.get("text")
        if text is not None and not isinstance(text, str):
            raise SchemaError(f"{rw}: text must be a string or null")
        regions.append(
            Region(
                id=rid,
                bbox=_parse_bbox(_require(raw, "bbox", rw), rw),
                tag=_parse_tag(_require(raw, "tag", rw), rw),
                text=text,
            )
        )
    return page_id, page_bbox, regions


def load_layout_pages(path: str | Path) -> list[tuple[str, BBox, list[Region]]]:
    """Load one page object or an array of page objects."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    docs = data if isinstance(data, list) else [data]
    pages = [parse_layout_page(d) for d in docs]
    seen = set()
    for pid, _, _ in pages:
        if pid in seen:
            raise DuplicateIdError(f"{path}: duplicate page_id {pid!r}")
        seen.add(pid)
    return pages


def layout_page_to_dict(page_id: str, page_bbox: BBox, regions: list[Region]) -> dict:
    return {
        "page_id": page_id,
        "width": page_bbox.x2,
        "height": page_bbox.y2,
        "regions": [
            {"id": r.id, "bbox": r.bbox.as_list(), "tag": r.tag.value, "text": r.text}
            for r in regions
        ],
    }


def block_to_dict(block: Block) -> dict:
    d = {
        "id": block.id,
        "bbox": block.bbox.as_list(),
        "tag": block.tag.value,
        "members": list(block.member_region_ids),
        "text": block.text,
    }
    if block.mask_of is not None:
        d["mask_of"] = [b.as_list() for b in block.mask_of]
    return d


def blocks_page_to_dict(page_id: str, page_bbox: BBox, blocks: list[Block]) -> dict:
    return {
        "page_id": page_id,
        "width": page_bbox.x2,
        "height": page_bbox.y2,
        "blocks": [block_to_dict(b) for b in blocks],
    }


def parse_blocks_page(doc: dict) -> tuple[str, BBox, list[Block]]:
    if not isinstance(doc, dict):
        raise SchemaError(f"blocks page must be a JSON object, got {type(doc).__name__}")
    page_id = _require(doc, "page_id", "blocks page")
    where = f"page {page_id}"
    page_bbox = BBox(0.0, 0.0, float(_require(doc, "width", where)),
                     float(_require(doc, "height", where)))
    blocks = []
    for raw in _require(doc, "blocks", where):
        bw = f"{where} block {raw.get('id') if isinstance(raw, dict) else raw!r}"
        mask = raw.get("mask_of")
        blocks.append(
            Block(
                id=int(_require(raw, "id", bw)),
                bbox=_parse_bbox(_require(raw, "bbox", bw), bw),
                tag=_parse_tag(_require(raw, "tag", bw), bw),
                member_region_ids=tuple(int(m) for m in _require(raw, "members", bw)),
                mask_of=None if mask is None
                else tuple(_parse_bbox(m, bw) for m in mask),
                text=raw.get("text"),
            )
        )
    ids = [b.id for b in blocks]
    if len(set(ids)) != len(ids):
        raise DuplicateIdError(f"{where}: duplicate block ids")
    if sum(1 for b in blocks if b.mask_of is not None) > 1:
        raise SchemaError(f"{where}: more than one masked-page block")
    return page_id, page_bbox, blocks


def load_blocks_pages(path: str | Path) -> list[tuple[str, BBox, list[Block]]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    docs = data if isinstance(data, list) else [data]
    pages = [parse_blocks_page(d) for d in docs]
    seen = set()
    for pid, _, _ in pages:
        if pid in seen:
            raise DuplicateIdError(f"{path}: duplicate page_id {pid!r}")
        seen.add(pid)
    return pages


def qualified_block_id(page_id: str, block_id: int) -> str:
    """Corpus-wide block id: '<page_id>:<ordinal>'."""
    return f"{page_id}:{block_id}"


def split_block_id(qualified: str) -> tuple[str, int]:
    page_id, _, ordinal = qualified.rpartition(":")
    if not page_id or not ordinal.isdigit():
        raise SchemaError(f"malformed qualified block id {qualified!r}")
    return page_id, int(ordinal)


def write_json(obj, path: str | Path) -> None:
    """Deterministic JSON writer used for every JSON artifact."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# vector file (binary)


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"unexpected end of file while reading {what}")
    return data


def write_vector_file(entries: Mapping[str, np.ndarray], path: str | Path) -> None:
    """Write id -> matrix entries; ids are sorted for determinism."""
    ids = sorted(entries)
    dim: int | None = None
    mats: dict[str, np.ndarray] = {}
    for eid in ids:
        m = as_multivector(entries[eid], name=f"vectors of {eid!r}")
        if dim is None:
            dim = int(m.shape[1])
        elif m.shape[1] != dim:
            raise ValidationError(
                f"mixed dimensions: {eid!r} has D={m.shape[1]}, expected {dim}"
            )
        mats[eid] = np.ascontiguousarray(m, dtype="<f4")
    buf = _io.BytesIO()
    buf.write(VECTOR_MAGIC)
    buf.write(struct.pack("<III", FORMAT_VERSION, dim or 0, len(ids)))
    for eid in ids:
        raw = eid.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"id too long for format: {eid[:32]!r}...")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        m = mats[eid]
        buf.write(struct.pack("<I", m.shape[0]))
        buf.write(m.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def read_vector_file(path: str | Path) -> dict[str, np.ndarray]:
    """Exact float32 round-trip of write_vector_file output."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != VECTOR_MAGIC:
            raise BadMagicError(
                f"{path}: expected magic {VECTOR_MAGIC!r}, got {magic!r}"
            )
        version, dim, count = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(f"{path}: unsupported version {version}")
        if count > 0 and dim == 0:
            raise TruncatedFileError(f"{path}: zero dimension with {count} entries")
        out: dict[str, np.ndarray] = {}
        for i in range(count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, f"entry {i} id length"))
            eid = _read_exact(fh, id_len, f"entry {i} id").decode("utf-8")
            if eid in out:
                raise DuplicateIdError(f"{path}: duplicate id {eid!r}")
            (n,) = struct.unpack("<I", _read_exact(fh, 4, f"entry {eid!r} row count"))
            if n < 1:
                raise TruncatedFileError(f"{path}: entry {eid!r} declares zero rows")
            payload = _read_exact(fh, 4 * n * dim, f"entry {eid!r} payload")
            out[eid] = np.frombuffer(payload, dtype="<f4").reshape(n, dim).copy()
        trailing = fh.read(1)
        if trailing:
            raise TruncatedFileError(f"{path}: trailing bytes after declared entries")
    return out


# ---------------------------------------------------------------------------
# index file (binary)


def _write_str(buf, s: str, what: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValidationError(f"{what} too long for format")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _read_str(fh, what: str) -> str:
    (n,) = struct.unpack("<H", _read_exact(fh, 2, f"{what} length"))
    return _read_exact(fh, n, what).decode("utf-8")


def save_index(index: BlockIndex, path: str | Path) -> None:
    entries = index.entries()
    dim = index.dim
    if dim is None:
        raise ValidationError("cannot save an index with no entries and no dimension")
    buf = _io.BytesIO()
    buf.write(INDEX_MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, dim))
    buf.write(struct.pack("<Q", len(entries)))
    for e in entries:
        _write_str(buf, e.block_id, "block_id")
        _write_str(buf, e.page_id, "page_id")
        _write_str(buf, e.doc_id, "doc_id")
        _write_str(buf, e.tag.value, "tag")
        m = np.ascontiguousarray(e.vectors, dtype="<f4")
        buf.write(struct.pack("<I", m.shape[0]))
        buf.write(m.tobytes())
        buf.write(struct.pack("<I", e.token_cost))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_index(path: str | Path, *, normalize: bool = False) -> BlockIndex:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != INDEX_MAGIC:
            raise BadMagicError(f"{path}: expected magic {INDEX_MAGIC!r}, got {magic!r}")
        version, dim = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(f"{path}: unsupported version {version}")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "entry count"))
        if dim == 0 and count > 0:
            raise TruncatedFileError(f"{path}: zero dimension with {count} entries")
        index = BlockIndex(dim=dim or None, normalize=normalize)
        for i in range(count):
            block_id = _read_str(fh, f"entry {i} block_id")
            page_id = _read_str(fh, f"entry {block_id!r} page_id")
            doc_id = _read_str(fh, f"entry {block_id!r} doc_id")
            tag = _parse_tag(_read_str(fh, f"entry {block_id!r} tag"), f"entry {block_id!r}")
            (n,) = struct.unpack("<I", _read_exact(fh, 4, f"entry {block_id!r} row count"))
            if n < 1:
                raise TruncatedFileError(f"{path}: entry {block_id!r} declares zero rows")
            payload = _read_exact(fh, 4 * n * dim, f"entry {block_id!r} payload")
            vectors = np.frombuffer(payload, dtype="<f4").reshape(n, dim).copy()
            (token_cost,) = struct.unpack(
                "<I", _read_exact(fh, 4, f"entry {block_id!r} token cost")
            )
            index.add_block(
                IndexEntry(block_id, page_id, doc_id, tag, vectors, token_cost)
            )
        trailing = fh.read(1)
        if trailing:
            raise TruncatedFileError(f"{path}: trailing bytes after declared entries")
    index.seal()
    return index


# ---------------------------------------------------------------------------
# benchmark manifest


class BenchmarkManifest:
    """Validated benchmark: aggregated block pages plus eval samples."""

    def __init__(
        self,
        dataset: str,
        pages: list[tuple[str, BBox, list[Block]]],
        samples: list[EvalSample],
        page_token_costs: dict[str, int] | None = None,
    ):
        self.dataset = dataset
        self.pages = pages
        self.samples = samples
        self.page_token_costs = page_token_costs or {}
        self._by_page = {pid: blocks for pid, _, blocks in pages}

    def page_ids(self) -> list[str]:
        return [pid for pid, _, _ in self.pages]

    def blocks_of(self, page_id: str) -> list[Block]:
        return self._by_page[page_id]

    def block_text(self, qualified_id: str) -> str | None:
        page_id, ordinal = split_block_id(qualified_id)
        for b in self._by_page[page_id]:
            if b.id == ordinal:
                return b.text
        raise DanglingReferenceError(f"unknown block {qualified_id!r}")

    def gold_evidence_text(self, sample: EvalSample) -> str:
        texts = []
        for bid in sorted(sample.gold_block_ids):
            t = self.block_text(bid)
            if t:
                texts.append(t)
        return "\n".join(texts)


def load_manifest(path: str | Path) -> BenchmarkManifest:
    """Load and fully validate a manifest; dangling references are
    rejected with the offending id in the error message."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: manifest must be a JSON object")
    dataset = _require(data, "dataset", "manifest")
    raw_pages = _require(data, "pages", "manifest")
    pages: list[tuple[str, BBox, list[Block]]] = []
    for raw in raw_pages:
        if isinstance(raw, dict) and set(raw.keys()) == {"path"}:
            sub = path.parent / raw["path"]
            if not sub.exists():
                raise DanglingReferenceError(f"manifest references missing page file {raw['path']!r}")
            pages.extend(load_blocks_pages(sub))
        else:
            pages.append(parse_blocks_page(raw))
    seen_pages = set()
    for pid, _, _ in pages:
        if pid in seen_pages:
            raise DuplicateIdError(f"manifest: duplicate page_id {pid!r}")
        seen_pages.add(pid)
    by_page = {pid: {b.id for b in blocks} for pid, _, blocks in pages}

    samples = []
    for raw in _require(data, "samples", "manifest"):
        qid = _require(raw, "query_id", "sample")
        where = f"sample {qid}"
        gold_ids = _require(raw, "gold_block_ids", where)
        gold_page = _require(raw, "gold_page_id", where)
        if gold_page not in by_page:
            raise DanglingReferenceError(f"{where}: unknown gold_page_id {gold_page!r}")
        for qbid in gold_ids:
            page_id, ordinal = split_block_id(qbid)
            if page_id not in by_page:
                raise DanglingReferenceError(f"{where}: gold block {qbid!r} names unknown page")
            if ordinal not in by_page[page_id]:
                raise DanglingReferenceError(f"{where}: gold block {qbid!r} does not resolve")
            if page_id != gold_page:
                raise DanglingReferenceError(
                    f"{where}: gold block {qbid!r} is not on gold page {gold_page!r}"
                )
        cost = raw.get("page_token_cost")
        samples.append(
            EvalSample(
                query_id=qid,
                query_text=_require(raw, "query_text", where),
                gold_block_ids=frozenset(gold_ids),
                gold_page_id=gold_page,
                answer_text=_require(raw, "answer_text", where),
                page_token_cost=None if cost is None else int(cost),
            )
        )
    qids = [s.query_id for s in samples]
    if len(set(qids)) != len(qids):
        raise DuplicateIdError("manifest: duplicate query_id in samples")

    costs = data.get("page_token_costs")
    if costs is not None:
        for pid in costs:
            if pid not in by_page:
                raise DanglingReferenceError(
                    f"manifest: page_token_costs names unknown page {pid!r}"
                )
        costs = {pid: int(v) for pid, v in costs.items()}
    return BenchmarkManifest(dataset, pages, samples, costs)


def manifest_to_dict(manifest: BenchmarkManifest) -> dict:
    """Canonical inline-page serialization of a loaded manifest."""
    out: dict = {
        "dataset": manifest.dataset,
        "pages": [
            blocks_page_to_dict(pid, bbox, blocks)
            for pid, bbox, blocks in manifest.pages
        ],
        "samples": [
            {
                "query_id": s.query_id,
                "query_text": s.query_text,
                "gold_block_ids": sorted(s.gold_block_ids),
                "gold_page_id": s.gold_page_id,
                "answer_text": s.answer_text,
                "page_token_cost": s.page_token_cost,
            }
            for s in manifest.samples
        ],
    }
    if manifest.page_token_costs:
        out["page_token_costs"] = {
            pid: manifest.page_token_costs[pid]
            for pid in sorted(manifest.page_token_costs)
        }
    return out


def write_report(report: MetricReport, path: str | Path) -> None:
    write_json(report.to_json_dict(), path)


def write_report_csv(report: MetricReport, path: str | Path) -> None:
    """Flat delimited view of the report for spreadsheets."""
    lines = ["metric,k,value"]

    def emit(name: str, k, value):
        if value is not None:
            lines.append(f"{name},{'' if k is None else k},{value:.6f}")

    for level, ndcg, recall in (
        ("block", report.block_ndcg, report.block_recall),
        ("page", report.page_ndcg, report.page_recall),
    ):
        if ndcg is None:
            continue
        for k in report.ks:
            emit(f"{level}_ndcg", k, ndcg[k])
            emit(f"{level}_recall", k, recall[k])
    for name, value in report._scalar_fields().items():
        emit(name, None, value)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
