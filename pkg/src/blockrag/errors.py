"""Exception types shared across the package.

Validation problems (bad inputs, contract violations, malformed files)
raise ValidationError subclasses; genuine I/O failures propagate as
OSError. The CLI maps the former to exit code 1 and the latter to 2.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Input violates a documented contract."""


class SchemaError(ValidationError):
    """A JSON document does not match its schema."""


class DanglingReferenceError(ValidationError):
    """A document references an id that does not resolve."""


class FormatError(ValidationError):
    """A binary file violates its byte-level format."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """File declares a format version this reader does not know."""


class TruncatedFileError(FormatError):
    """File ends before its declared payload is complete."""


class DuplicateIdError(FormatError):
    """An id occurs more than once where uniqueness is required."""
