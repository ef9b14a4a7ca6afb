"""Encoder adapters.

An encoder turns one item (a block crop plus its text, or a query
string) into an N x D float32 token-embedding matrix and reports the
token count the item would contribute to a generation prompt.

The bundled stub encoder is the contract's reference implementation:
a pure hash-to-matrix map, fully deterministic across machines, with
no ML framework anywhere in its import chain. Real VLM encoders plug
in by model-id prefix.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ModelLoadError


@dataclass(frozen=True)
class EncodedItem:
    vectors: np.ndarray  # N x D float32
    token_cost: int


class Encoder(Protocol):
    model_id: str
    dim: int

    def encode(self, kind: str, item_id: str, text: str | None) -> EncodedItem: ...


def _hash_floats(seed: str, count: int) -> np.ndarray:
    """Counter-mode SHA-256 expanded to float32 values in [-1, 1)."""
    out = np.empty(count, dtype=np.float32)
    filled = 0
    counter = 0
    while filled < count:
        digest = hashlib.sha256(f"{seed}#{counter}".encode("utf-8")).digest()
        words = struct.unpack("<8I", digest)
        for w in words:
            if filled == count:
                break
            out[filled] = np.float32(w / 2147483648.0 - 1.0)
            filled += 1
        counter += 1
    return out


class StubEncoder:
    """Deterministic hash-to-matrix encoder.

    Content-addressed: tokenization is a marker token plus whitespace
    words (capped at ``max_tokens``), and every token hashes to the
    same row wherever it appears. Identical text therefore yields
    identical matrices, so a query embeds next to the blocks that
    share its words and self-retrieval is exact. token_cost equals the
    emitted row count.
    """

    def __init__(self, dim: int = 16, max_tokens: int = 8):
        self.model_id = f"stub:{dim}"
        self.dim = dim
        self.max_tokens = max_tokens

    def _tokens(self, text: str | None) -> list[str]:
        words = text.split() if text else []
        return ["<s>", *words[: self.max_tokens - 1]]

    def encode(self, kind: str, item_id: str, text: str | None) -> EncodedItem:
        tokens = self._tokens(text)
        rows = [_hash_floats(f"{self.model_id}|tok|{t}", self.dim) for t in tokens]
        return EncodedItem(vectors=np.stack(rows), token_cost=len(tokens))


class MisconfiguredStubEncoder(StubEncoder):
    """Test double that violates the uniform-dimension contract."""

    def encode(self, kind: str, item_id: str, text: str | None) -> EncodedItem:
        item = super().encode(kind, item_id, text)
        if kind == "block" and item_id.endswith(":1"):
            return EncodedItem(item.vectors[:, :-1], item.token_cost)
        return item


def load_encoder(model_id: str) -> Encoder:
    """Resolve a model identifier to an encoder instance.

    ``stub:<dim>`` is always available. Anything else would require an
    ML runtime; the error says which and how to point at the stub.
    """
    if model_id == "stub:misconfigured":
        return MisconfiguredStubEncoder()
    if model_id.startswith("stub:"):
        try:
            dim = int(model_id.split(":", 1)[1])
        except ValueError:
            raise ModelLoadError(f"malformed stub model id {model_id!r}") from None
        if dim < 1:
            raise ModelLoadError(f"stub dimension must be >= 1, got {dim}")
        return StubEncoder(dim=dim)
    raise ModelLoadError(
        f"no adapter registered for model {model_id!r}; install an encoder "
        f"adapter for it or use the bundled 'stub:<dim>' encoder"
    )
