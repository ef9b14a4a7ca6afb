"""Embedding exporter for the block retrieval engine.

Runs a pluggable encoder (real VLM or the bundled deterministic stub)
over blocks and queries and writes the engine's multi-vector file
format, talking to the engine only through its documented files.
"""

from .encoders import EncodedItem, StubEncoder, load_encoder
from .errors import EncoderOutputError, ExportError, ModelLoadError
from .export import (
    ExportJob,
    export_block_vectors,
    export_fusion_inputs,
    export_query_vectors,
)
from .vectorfile import read_vector_file, write_vector_file

__version__ = "0.1.0"

__all__ = [
    "EncodedItem",
    "EncoderOutputError",
    "ExportError",
    "ExportJob",
    "ModelLoadError",
    "StubEncoder",
    "export_block_vectors",
    "export_fusion_inputs",
    "export_query_vectors",
    "load_encoder",
    "read_vector_file",
    "write_vector_file",
]
