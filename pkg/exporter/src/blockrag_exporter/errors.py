"""Exporter error types."""

from __future__ import annotations


class ExportError(ValueError):
    """Export cannot proceed; no output file is produced."""


class ModelLoadError(ExportError):
    """The requested encoder model cannot be loaded."""


class EncoderOutputError(ExportError):
    """An encoder returned matrices violating the export contract."""
