"""Layout geometry and semantic block aggregation.

Layout detectors emit fine-grained regions (a paragraph split into
fragments, a figure separated from its caption). This module merges
them back into coherent blocks: pairwise geometry predicates feed an
undirected merge graph, connected components become blocks, and a
masked-page pseudo-block is appended so residual page context outside
every block stays retrievable.

Merge rule for a region pair (a, b):

    merge = (semantic(a, b) and adjacent(a, b)) or overlap_ratio(a, b) > tau_o

where ``semantic`` compares semantic groups (with a Title/Text
exception), and ``adjacent`` requires horizontal alignment
(``iou_x > tau_x``) together with a bounded vertical gap
(``-delta < delta_y < tau_y``).

All functions are pure; inputs are immutable dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .errors import ValidationError


class LayoutTag(str, Enum):
    """Closed set of layout-detector classes."""

    ABANDON = "abandon"
    TITLE = "title"
    FIGURE = "figure"
    FIGURE_CAPTION = "figure_caption"
    TABLE = "table"
    TABLE_CAPTION = "table_caption"
    TABLE_FOOTNOTE = "table_footnote"
    PLAIN_TEXT = "plain_text"
    ISOLATE_FORMULA = "isolate_formula"
    FORMULA_CAPTION = "formula_caption"


class SemanticGroup(Enum):
    ABANDON = "abandon"
    TITLE = "title"
    FIGURE = "figure"
    TABLE = "table"
    TEXT = "text"


_TAG_TO_GROUP: dict[LayoutTag, SemanticGroup] = {
    LayoutTag.ABANDON: SemanticGroup.ABANDON,
    LayoutTag.TITLE: SemanticGroup.TITLE,
    LayoutTag.FIGURE: SemanticGroup.FIGURE,
    LayoutTag.FIGURE_CAPTION: SemanticGroup.FIGURE,
    LayoutTag.TABLE: SemanticGroup.TABLE,
    LayoutTag.TABLE_CAPTION: SemanticGroup.TABLE,
    LayoutTag.TABLE_FOOTNOTE: SemanticGroup.TABLE,
    LayoutTag.PLAIN_TEXT: SemanticGroup.TEXT,
    LayoutTag.ISOLATE_FORMULA: SemanticGroup.TEXT,
    LayoutTag.FORMULA_CAPTION: SemanticGroup.TEXT,
}


def semantic_group(tag: LayoutTag) -> SemanticGroup:
    """Total mapping from layout tag to its semantic group."""
    return _TAG_TO_GROUP[tag]


# Structural tags outrank running text so a merged figure+caption block
# is labelled "figure", not "figure_caption". Order is configurable.
DEFAULT_PRIORITY: tuple[LayoutTag, ...] = (
    LayoutTag.TITLE,
    LayoutTag.TABLE,
    LayoutTag.FIGURE,
    LayoutTag.TABLE_CAPTION,
    LayoutTag.FIGURE_CAPTION,
    LayoutTag.TABLE_FOOTNOTE,
    LayoutTag.ISOLATE_FORMULA,
    LayoutTag.FORMULA_CAPTION,
    LayoutTag.PLAIN_TEXT,
    LayoutTag.ABANDON,
)

# The masked-page pseudo-block is residual background after every
# content block is cut out, which is what the abandon class covers.
MASKED_PAGE_TAG = LayoutTag.ABANDON


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates, origin top-left."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"bbox {name} must be finite, got {v!r}")
            if v < 0:
                raise ValidationError(f"bbox {name} must be >= 0, got {v!r}")
        if not self.x1 < self.x2:
            raise ValidationError(f"bbox requires x1 < x2, got [{self.x1}, {self.x2}]")
        if not self.y1 < self.y2:
            raise ValidationError(f"bbox requires y1 < y2, got [{self.y1}, {self.y2}]")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, other: "BBox") -> bool:
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and self.x2 >= other.x2
            and self.y2 >= other.y2
        )

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class Region:
    """One detected layout region; ``id`` is its reading-order ordinal."""

    id: int
    bbox: BBox
    tag: LayoutTag
    text: str | None = None


@dataclass(frozen=True)
class AggregationConfig:
    """Thresholds and tag priority for block aggregation.

    tau_x: minimum horizontal interval-IoU for adjacency (ratio).
    tau_y: maximum vertical gap for adjacency (pixels).
    tau_o: overlap-ratio above which a pair is force-merged (ratio).
    delta: tolerated vertical overlap from detector jitter (pixels).
    priority: every LayoutTag exactly once, highest rank first.
    exact_tag_match: compare raw tags instead of semantic groups.
    """

    tau_x: float = 0.7
    tau_y: float = 40.0
    tau_o: float = 0.9
    delta: float = 5.0
    priority: tuple[LayoutTag, ...] = DEFAULT_PRIORITY
    exact_tag_match: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau_x <= 1.0:
            raise ValidationError(f"tau_x must be in [0, 1], got {self.tau_x}")
        if not 0.0 <= self.tau_o <= 1.0:
            raise ValidationError(f"tau_o must be in [0, 1], got {self.tau_o}")
        if self.tau_y < 0:
            raise ValidationError(f"tau_y must be >= 0, got {self.tau_y}")
        if self.delta < 0:
            raise ValidationError(f"delta must be >= 0, got {self.delta}")
        if sorted(self.priority, key=lambda t: t.value) != sorted(
            LayoutTag, key=lambda t: t.value
        ):
            raise ValidationError("priority must list every LayoutTag exactly once")

    def rank(self, tag: LayoutTag) -> int:
        return self.priority.index(tag)


@dataclass(frozen=True)
class Block:
    """Aggregated block: the minimal retrieval unit.

    ``mask_of`` is None for content blocks; the per-page auxiliary
    masked-page block carries the list of content-block bboxes it
    masks out (possibly empty) and spans the full page.
    """

    id: int
    bbox: BBox
    tag: LayoutTag
    member_region_ids: tuple[int, ...]
    mask_of: tuple[BBox, ...] | None = None
    text: str | None = None

    @property
    def is_masked_page(self) -> bool:
        return self.mask_of is not None


def iou_x(a: BBox, b: BBox) -> float:
    """Interval IoU of the two x-projections. Symmetric, in [0, 1]."""
    inter = min(a.x2, b.x2) - max(a.x1, b.x1)
    if inter <= 0.0:
        return 0.0
    union = a.width + b.width - inter
    return inter / union


def delta_y(a: BBox, b: BBox) -> float:
    """Vertical gap between the boxes in pixels; negative on overlap."""
    return max(a.y1, b.y1) - min(a.y2, b.y2)


def overlap_ratio(a: BBox, b: BBox) -> float:
    """Intersection area over the smaller box's area. In [0, 1]."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    return (ix * iy) / min(a.area, b.area)


def _semantically_compatible(a: LayoutTag, b: LayoutTag, cfg: AggregationConfig) -> bool:
    if cfg.exact_tag_match:
        return a == b
    ga, gb = semantic_group(a), semantic_group(b)
    if ga == gb:
        return True
    return {ga, gb} == {SemanticGroup.TITLE, SemanticGroup.TEXT}


def merge_predicate(a: Region, b: Region, cfg: AggregationConfig) -> bool:
    """Decide whether two regions of one page belong to the same block."""
    if overlap_ratio(a.bbox, b.bbox) > cfg.tau_o:
        return True
    if not _semantically_compatible(a.tag, b.tag, cfg):
        return False
    if iou_x(a.bbox, b.bbox) <= cfg.tau_x:
        return False
    gap = delta_y(a.bbox, b.bbox)
    return -cfg.delta < gap < cfg.tau_y


def tag_priority(tags: Iterable[LayoutTag], cfg: AggregationConfig) -> LayoutTag:
    """Highest-priority tag of a non-empty multiset under cfg.priority."""
    tags = list(tags)
    if not tags:
        raise ValidationError("tag_priority requires a non-empty tag multiset")
    return min(tags, key=cfg.rank)


def _validate_regions(regions: list[Region], page_bbox: BBox) -> None:
    prev_id: int | None = None
    for r in regions:
        if prev_id is not None and r.id <= prev_id:
            raise ValidationError(
                f"region ids must be unique and increasing in reading order; "
                f"got {r.id} after {prev_id}"
            )
        prev_id = r.id
        if not page_bbox.contains(r.bbox):
            raise ValidationError(
                f"region {r.id} bbox {r.bbox.as_list()} exceeds page bounds "
                f"{page_bbox.as_list()}"
            )


def aggregate_blocks(
    regions: list[Region], page_bbox: BBox, cfg: AggregationConfig
) -> list[Block]:
    """Aggregate one page's regions into semantic blocks.

    Builds the merge graph over all region pairs, takes connected
    components (each becomes one block: union bbox, priority tag,
    member texts joined by newlines), and appends the masked-page
    auxiliary block spanning the page. Content blocks are ordered by
    minimal member id; member sets partition the input regions.
    """
    _validate_regions(regions, page_bbox)
    n = len(regions)

    adjacency: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if merge_predicate(regions[i], regions[j], cfg):
                adjacency[i].append(j)
                adjacency[j].append(i)

    # Iterative DFS in index order yields components sorted by their
    # smallest member index, which is also the smallest member id.
    seen = [False] * n
    components: list[list[int]] = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp: list[int] = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        components.append(sorted(comp))

    blocks: list[Block] = []
    for ordinal, comp in enumerate(components):
        members = [regions[i] for i in comp]
        bbox = BBox(
            min(r.bbox.x1 for r in members),
            min(r.bbox.y1 for r in members),
            max(r.bbox.x2 for r in members),
            max(r.bbox.y2 for r in members),
        )
        texts = [r.text for r in members if r.text is not None]
        blocks.append(
            Block(
                id=ordinal,
                bbox=bbox,
                tag=tag_priority((r.tag for r in members), cfg),
                member_region_ids=tuple(r.id for r in members),
                text="\n".join(texts) if texts else None,
            )
        )

    blocks.append(
        Block(
            id=len(blocks),
            bbox=page_bbox,
            tag=MASKED_PAGE_TAG,
            member_region_ids=(),
            mask_of=tuple(b.bbox for b in blocks),
        )
    )
    return blocks
