"""Layout-aware block retrieval engine.

Pipeline: layout regions are aggregated into semantic blocks, block
multi-vector embeddings are indexed, queries are answered by
late-interaction MaxSim scoring at block or page granularity, and
runs are evaluated with standard IR and text-overlap metrics.
"""

from .errors import (
    BadMagicError,
    DanglingReferenceError,
    DuplicateIdError,
    FormatError,
    SchemaError,
    TruncatedFileError,
    UnsupportedVersionError,
    ValidationError,
)
from .fusion import (
    LossBatch,
    QueryScores,
    assemble_block_rep,
    attention,
    contextualize,
    contrastive_loss,
    contrastive_loss_grad,
    fuse_and_project,
    softmax_weights,
)
from .geometry import (
    DEFAULT_PRIORITY,
    AggregationConfig,
    BBox,
    Block,
    LayoutTag,
    Region,
    SemanticGroup,
    aggregate_blocks,
    delta_y,
    iou_x,
    merge_predicate,
    overlap_ratio,
    semantic_group,
    tag_priority,
)
from .index import BlockIndex, IndexEntry, SearchHit, maxsim
from .metrics import (
    EvalSample,
    MetricReport,
    anlcs,
    evaluate_run,
    ndcg_at_k,
    recall_at_k,
    rouge_l,
    tokenize,
    word_overlap_f1,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "BBox",
    "BadMagicError",
    "Block",
    "BlockIndex",
    "DEFAULT_PRIORITY",
    "DanglingReferenceError",
    "DuplicateIdError",
    "EvalSample",
    "FormatError",
    "IndexEntry",
    "LayoutTag",
    "LossBatch",
    "MetricReport",
    "QueryScores",
    "Region",
    "SchemaError",
    "SearchHit",
    "SemanticGroup",
    "TruncatedFileError",
    "UnsupportedVersionError",
    "ValidationError",
    "aggregate_blocks",
    "anlcs",
    "assemble_block_rep",
    "attention",
    "contextualize",
    "contrastive_loss",
    "contrastive_loss_grad",
    "delta_y",
    "evaluate_run",
    "fuse_and_project",
    "iou_x",
    "maxsim",
    "merge_predicate",
    "ndcg_at_k",
    "overlap_ratio",
    "recall_at_k",
    "rouge_l",
    "semantic_group",
    "softmax_weights",
    "tag_priority",
    "tokenize",
    "word_overlap_f1",
]
