"""Command-line pipeline: aggregate -> index -> search -> eval, plus
numeric self-verification.

Every command is deterministic for a fixed config and inputs; reruns
produce byte-identical outputs. Exit codes: 0 success, 1 validation
error, 2 I/O error. Configuration precedence is flags > config file >
built-in defaults, and the effective config is echoed into eval
reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import figures, io, verify
from .errors import ValidationError
from .geometry import AggregationConfig, LayoutTag, aggregate_blocks
from .index import BlockIndex, IndexEntry
from .io import qualified_block_id
from .metrics import DEFAULT_KS, evaluate_run


@dataclass(frozen=True)
class RunConfig:
    """Pipeline configuration; defaults follow the published setup."""

    tau_x: float = 0.7
    tau_y: float = 40.0
    tau_o: float = 0.9
    delta: float = 5.0
    exact_tag_match: bool = False
    loss_tau: float = 0.02
    retrieval_k: int = 3
    ks: tuple[int, ...] = DEFAULT_KS
    normalize: bool = False
    tie_break: str = "block_id"
    include_masked_in_pages: bool = True

    def __post_init__(self) -> None:
        if self.tie_break != "block_id":
            raise ValidationError(
                f"unsupported tie_break {self.tie_break!r}; only 'block_id' exists"
            )
        if self.retrieval_k < 1:
            raise ValidationError(f"retrieval_k must be >= 1, got {self.retrieval_k}")

    def aggregation(self) -> AggregationConfig:
        return AggregationConfig(
            tau_x=self.tau_x, tau_y=self.tau_y, tau_o=self.tau_o,
            delta=self.delta, exact_tag_match=self.exact_tag_match,
        )

    def echo(self) -> dict:
        return {
            "tau_x": self.tau_x,
            "tau_y": self.tau_y,
            "tau_o": self.tau_o,
            "delta": self.delta,
            "exact_tag_match": self.exact_tag_match,
            "loss_tau": self.loss_tau,
            "retrieval_k": self.retrieval_k,
            "ks": list(self.ks),
            "normalize": self.normalize,
            "tie_break": self.tie_break,
            "include_masked_in_pages": self.include_masked_in_pages,
        }


_CONFIG_FIELDS = set(RunConfig.__dataclass_fields__)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Defaults, then config-file values, then explicit flag overrides."""
    cfg = RunConfig()
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: invalid config JSON: {exc}") from None
        unknown = set(raw) - _CONFIG_FIELDS
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
        if "ks" in raw:
            raw["ks"] = tuple(int(k) for k in raw["ks"])
        cfg = replace(cfg, **raw)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def _parse_ks(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        ks = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValidationError(f"invalid k list {text!r}; expected e.g. '1,3,5,10'")
    if not ks or any(k < 1 for k in ks):
        raise ValidationError(f"k values must be >= 1, got {text!r}")
    return ks


# ---------------------------------------------------------------------------
# commands


def cmd_aggregate(args: argparse.Namespace) -> int:
    cfg = load_config(
        args.config,
        {"tau_x": args.tau_x, "tau_y": args.tau_y, "tau_o": args.tau_o,
         "delta": args.delta, "exact_tag_match": args.exact_tag_match or None},
    )
    pages = io.load_layout_pages(args.input)
    out_docs = []
    for page_id, page_bbox, regions in pages:
        blocks = aggregate_blocks(regions, page_bbox, cfg.aggregation())
        out_docs.append(io.blocks_page_to_dict(page_id, page_bbox, blocks))
        if args.figures:
            fig_dir = Path(args.figures)
            fig_dir.mkdir(parents=True, exist_ok=True)
            safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in page_id)
            figures.save_page_figure(
                page_id, page_bbox, blocks, fig_dir / f"page_{safe}.png"
            )
    io.write_json(out_docs if len(out_docs) > 1 else out_docs[0], args.output)
    print(f"aggregated {len(pages)} page(s) -> {args.output}")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    pages = io.load_blocks_pages(args.blocks)
    vectors = io.read_vector_file(args.vectors)
    costs = {}
    if args.token_costs:
        with open(args.token_costs, "r", encoding="utf-8") as fh:
            costs = {str(k): int(v) for k, v in json.load(fh).items()}

    index = BlockIndex()
    missing = []
    for page_id, _, blocks in pages:
        for block in blocks:
            bid = qualified_block_id(page_id, block.id)
            if bid not in vectors:
                missing.append(bid)
                continue
            vecs = vectors[bid]
            index.add_block(
                IndexEntry(
                    block_id=bid,
                    page_id=page_id,
                    doc_id=args.doc_id,
                    tag=block.tag,
                    vectors=vecs,
                    token_cost=costs.get(bid, int(vecs.shape[0])),
                )
            )
    if missing:
        raise ValidationError(
            f"no vectors for {len(missing)} block(s): {', '.join(missing[:10])}"
        )
    index.seal()
    io.save_index(index, args.output)
    print(f"indexed {len(index)} block(s) -> {args.output}")
    return 0


def _masked_block_ids(blocks_path: str) -> frozenset[str]:
    ids = set()
    for page_id, _, blocks in io.load_blocks_pages(blocks_path):
        for block in blocks:
            if block.is_masked_page:
                ids.add(qualified_block_id(page_id, block.id))
    return frozenset(ids)


def cmd_search(args: argparse.Namespace) -> int:
    cfg = load_config(
        args.config,
        {"retrieval_k": args.k, "normalize": args.normalize or None,
         "include_masked_in_pages": False if args.exclude_masked else None},
    )
    index = io.load_index(args.index, normalize=cfg.normalize)
    if len(index) == 0:
        raise ValidationError(f"{args.index}: index is empty")
    queries = io.read_vector_file(args.queries)
    excluded = frozenset()
    if args.page_level and not cfg.include_masked_in_pages:
        if not args.blocks:
            raise ValidationError("--exclude-masked requires --blocks to locate masked blocks")
        excluded = _masked_block_ids(args.blocks)

    out_queries = []
    for qid in sorted(queries):
        if args.page_level:
            ranked = index.rank_pages(
                queries[qid], cfg.retrieval_k, exclude_block_ids=excluded
            )
            out_queries.append(
                {"query_id": qid,
                 "pages": [{"page_id": p, "score": s} for p, s in ranked]}
            )
        else:
            hits, cost = index.retrieve_for_generation(queries[qid], cfg.retrieval_k)
            out_queries.append(
                {"query_id": qid,
                 "hits": [
                     {"block_id": h.block_id, "page_id": h.page_id,
                      "score": h.score,
                      "token_cost": index.get(h.block_id).token_cost}
                     for h in hits
                 ],
                 "total_token_cost": cost}
            )
    io.write_json(
        {"granularity": "page" if args.page_level else "block",
         "k": cfg.retrieval_k, "queries": out_queries},
        args.output,
    )
    print(f"searched {len(queries)} query(ies) -> {args.output}")
    return 0


def _load_results(path: str, granularity: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    if data.get("granularity") != granularity:
        raise ValidationError(
            f"{path}: expected {granularity}-level results, got "
            f"{data.get('granularity')!r}"
        )
    return data


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, {"ks": _parse_ks(args.ks)})
    manifest = io.load_manifest(args.manifest)
    block_results = _load_results(args.results, "block")

    block_rankings: dict[str, list[str]] = {}
    token_totals: dict[str, int] = {}
    retrieved_texts: dict[str, str] = {}
    for q in block_results["queries"]:
        qid = q["query_id"]
        hits = q["hits"]
        block_rankings[qid] = [h["block_id"] for h in hits]
        token_totals[qid] = int(q["total_token_cost"])
        texts = []
        for h in hits:
            t = manifest.block_text(h["block_id"])
            if t:
                texts.append(t)
        retrieved_texts[qid] = "\n".join(texts)

    page_rankings = None
    baseline_k = None
    if args.page_results:
        page_results = _load_results(args.page_results, "page")
        page_rankings = {
            q["query_id"]: [p["page_id"] for p in q["pages"]]
            for q in page_results["queries"]
        }
        baseline_k = int(page_results.get("k") or block_results.get("k") or cfg.retrieval_k)

    answers = None
    if args.answers:
        with open(args.answers, "r", encoding="utf-8") as fh:
            answers = {str(k): str(v) for k, v in json.load(fh).items()}
    judge = None
    if args.judge_scores:
        with open(args.judge_scores, "r", encoding="utf-8") as fh:
            judge = {str(k): float(v) for k, v in json.load(fh).items()}

    gold_texts = {
        s.query_id: manifest.gold_evidence_text(s) for s in manifest.samples
    }
    page_costs = dict(manifest.page_token_costs)
    for s in manifest.samples:
        if s.page_token_cost is not None:
            page_costs.setdefault(s.gold_page_id, s.page_token_cost)

    report = evaluate_run(
        manifest.samples,
        block_rankings,
        page_rankings=page_rankings,
        answers=answers,
        judge_scores=judge,
        retrieved_texts=retrieved_texts,
        gold_texts=gold_texts,
        token_totals=token_totals,
        page_token_costs=page_costs or None,
        baseline_page_k=baseline_k,
        ks=cfg.ks,
        config=cfg.echo(),
        threads=args.threads,
    )
    io.write_report(report, args.report)
    if args.csv:
        io.write_report_csv(report, args.csv)
    if args.figures:
        figures.save_metric_figures(report, args.figures)
    print(f"evaluated {report.num_samples} sample(s) -> {args.report}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    suites = list(verify.SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in suites:
        result = verify.run_suite(name)
        print(result.line())
        ok = ok and result.passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockrag",
        description="Layout-aware block retrieval: aggregate, index, search, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="merge layout regions into semantic blocks")
    p.add_argument("--input", required=True, help="layout page JSON (object or array)")
    p.add_argument("--output", required=True, help="blocks JSON to write")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--tau-x", dest="tau_x", type=float, help="horizontal IoU threshold")
    p.add_argument("--tau-y", dest="tau_y", type=float, help="vertical gap threshold, px")
    p.add_argument("--tau-o", dest="tau_o", type=float, help="forced-merge overlap ratio")
    p.add_argument("--delta", type=float, help="tolerated vertical overlap, px")
    p.add_argument("--exact-tag-match", action="store_true",
                   help="merge only identical tags instead of semantic groups")
    p.add_argument("--figures", help="directory for per-page layout figures")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("index", help="build a sealed block index from vectors")
    p.add_argument("--blocks", required=True, help="blocks JSON from aggregate")
    p.add_argument("--vectors", required=True, help="block vector file")
    p.add_argument("--output", required=True, help="index file to write")
    p.add_argument("--doc-id", default="doc", help="document id stored per entry")
    p.add_argument("--token-costs", help="JSON {block_id: token_cost} overriding row counts")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="late-interaction top-k search")
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="query vector file")
    p.add_argument("--output", required=True, help="results JSON to write")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("-k", type=int, help="number of results per query (default 3)")
    p.add_argument("--page-level", action="store_true", help="rank pages instead of blocks")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize token vectors before scoring")
    p.add_argument("--exclude-masked", action="store_true",
                   help="drop masked-page blocks from page scores")
    p.add_argument("--blocks", help="blocks JSON, needed with --exclude-masked")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="score a retrieval run against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--results", required=True, help="block-level results JSON")
    p.add_argument("--page-results", help="page-level results JSON")
    p.add_argument("--answers", help="JSON {query_id: generated answer}")
    p.add_argument("--judge-scores", help="JSON {query_id: external judge score}")
    p.add_argument("--report", required=True, help="metric report JSON to write")
    p.add_argument("--csv", help="also write a delimited metric table")
    p.add_argument("--figures", help="directory for metric figures")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--ks", help="comma-separated k list, default 1,3,5,10")
    p.add_argument("--threads", type=int, default=1,
                   help="per-sample fan-out; does not affect output bytes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run numeric self-verification suites")
    p.add_argument("--suite", default="all", choices=(*verify.SUITES, "all"))
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
