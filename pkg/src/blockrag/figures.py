"""Figure rendering for the report path.

Two figure families, both written as PNG files next to the JSON/CSV
outputs: page layouts (region and block rectangles, masked-page
hatching) from the aggregation step, and metric bars / token usage
from the evaluation step. Uses the Agg backend; no display required.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .geometry import BBox, Block, LayoutTag
from .metrics import MetricReport

# one stable color per tag so figures are comparable across pages
TAG_COLORS = {
    LayoutTag.TITLE: "#d62728",
    LayoutTag.PLAIN_TEXT: "#1f77b4",
    LayoutTag.FIGURE: "#2ca02c",
    LayoutTag.FIGURE_CAPTION: "#98df8a",
    LayoutTag.TABLE: "#9467bd",
    LayoutTag.TABLE_CAPTION: "#c5b0d5",
    LayoutTag.TABLE_FOOTNOTE: "#8c564b",
    LayoutTag.ISOLATE_FORMULA: "#e377c2",
    LayoutTag.FORMULA_CAPTION: "#f7b6d2",
    LayoutTag.ABANDON: "#7f7f7f",
}

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}


def save_page_figure(
    page_id: str,
    page_bbox: BBox,
    blocks: list[Block],
    out_path: str | Path,
) -> None:
    """Render one page's blocks as labelled rectangles."""
    fig, ax = plt.subplots(figsize=(6, 6 * page_bbox.height / page_bbox.width))
    ax.set_xlim(page_bbox.x1, page_bbox.x2)
    ax.set_ylim(page_bbox.y2, page_bbox.y1)  # y grows downward on a page
    ax.set_aspect("equal")
    ax.set_title(f"page {page_id}: {len(blocks)} blocks")
    for block in blocks:
        color = TAG_COLORS[block.tag]
        if block.is_masked_page:
            for masked in block.mask_of or ():
                ax.add_patch(
                    Rectangle(
                        (masked.x1, masked.y1), masked.width, masked.height,
                        fill=True, facecolor="white", edgecolor="none", zorder=3,
                    )
                )
            ax.add_patch(
                Rectangle(
                    (block.bbox.x1, block.bbox.y1), block.bbox.width, block.bbox.height,
                    fill=False, edgecolor=color, hatch="//", linewidth=0.8, zorder=2,
                )
            )
            continue
        ax.add_patch(
            Rectangle(
                (block.bbox.x1, block.bbox.y1), block.bbox.width, block.bbox.height,
                fill=True, facecolor=color, alpha=0.25, edgecolor=color,
                linewidth=1.2, zorder=4,
            )
        )
        ax.annotate(
            f"{block.id}:{block.tag.value}",
            (block.bbox.x1, block.bbox.y1),
            fontsize=7, va="bottom", zorder=5,
        )
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)


def save_metric_figures(report: MetricReport, out_dir: str | Path) -> list[Path]:
    """Bar charts for retrieval metrics and token accounting.

    Returns the paths written (skips charts whose inputs are absent).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    levels = [("block", report.block_ndcg, report.block_recall)]
    if report.page_ndcg is not None:
        levels.append(("page", report.page_ndcg, report.page_recall))
    for level, ndcg, recall in levels:
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = range(len(report.ks))
        width = 0.38
        ax.bar([x - width / 2 for x in xs], [ndcg[k] for k in report.ks],
               width, label="nDCG@k", color="#1f77b4")
        ax.bar([x + width / 2 for x in xs], [recall[k] for k in report.ks],
               width, label="Recall@k", color="#ff7f0e")
        ax.set_xticks(list(xs), [str(k) for k in report.ks])
        ax.set_xlabel("k")
        ax.set_ylim(0, 1.05)
        ax.set_title(f"{level}-level retrieval ({report.num_samples} samples)")
        ax.legend()
        path = out_dir / f"retrieval_{level}.png"
        fig.savefig(path, **_SAVE_KWARGS)
        plt.close(fig)
        written.append(path)

    if report.mean_tokens is not None:
        fig, ax = plt.subplots(figsize=(4.5, 4))
        labels = ["retrieved blocks"]
        values = [report.mean_tokens]
        if report.mean_page_tokens is not None:
            labels.append("whole pages")
            values.append(report.mean_page_tokens)
        ax.bar(labels, values, color=["#2ca02c", "#d62728"][: len(values)])
        ax.set_ylabel("mean input tokens per query")
        ax.set_title("generation context cost")
        if report.mean_page_tokens:
            saving = 1.0 - report.mean_tokens / report.mean_page_tokens
            ax.annotate(f"-{saving:.1%}", (0, values[0]), ha="center", va="bottom")
        path = out_dir / "token_cost.png"
        fig.savefig(path, **_SAVE_KWARGS)
        plt.close(fig)
        written.append(path)
    return written
