"""Exception hierarchy shared by all engine modules."""

from __future__ import annotations


class AdatpError(Exception):
    """Base class for every error raised by this package."""


class DumpFormatError(AdatpError):
    """A byte stream does not parse as a valid ADTP v1 container."""


class BadMagic(DumpFormatError):
    def __init__(self, found: bytes):
        super().__init__(f"bad magic at offset 0: expected b'ADTP', found {found!r}")
        self.found = found


class UnsupportedVersion(DumpFormatError):
    def __init__(self, version: int):
        super().__init__(f"unsupported container version {version} at offset 4 (expected 1)")
        self.version = version


class TruncatedPayload(DumpFormatError):
    def __init__(self, field: str, offset: int, needed: int, available: int):
        super().__init__(
            f"truncated payload in {field!r} at offset {offset}: "
            f"need {needed} bytes, have {available}"
        )
        self.field = field
        self.offset = offset


class TrailingBytes(DumpFormatError):
    def __init__(self, offset: int, extra: int):
        super().__init__(f"{extra} unexpected bytes after payload end at offset {offset}")
        self.offset = offset


class MalformedMeta(DumpFormatError):
    def __init__(self, detail: str):
        super().__init__(f"meta block is not UTF-8 JSON key/value text: {detail}")


class InvariantViolation(AdatpError):
    """A constructed value breaks one of its type invariants."""


class NonFiniteValue(InvariantViolation):
    def __init__(self, field: str, index, offset: int | None = None):
        where = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(f"non-finite value in {field} at index {index}{where}")
        self.field = field
        self.index = index
        self.offset = offset


class NegativeAttention(InvariantViolation):
    def __init__(self, layer: int, flat_index: int, offset: int | None = None):
        where = f" (byte offset {offset})" if offset is not None else ""
        super().__init__(
            f"negative attention score at layer {layer}, flat index {flat_index}{where}"
        )
        self.layer = layer
        self.flat_index = flat_index
        self.offset = offset


class ZeroNormVector(AdatpError):
    """Cosine similarity is undefined for a zero-norm vector."""


class ZeroNormFrame(ZeroNormVector):
    def __init__(self, frame: int):
        super().__init__(f"frame {frame} has a zero-norm embedding (corrupted dump?)")
        self.frame = frame


class EmptyInput(AdatpError):
    pass


class RangeOutOfBounds(AdatpError):
    pass


class TooFewLayers(AdatpError):
    def __init__(self, num_layers: int, start_layer: int, stop_layer: int):
        super().__init__(
            f"{num_layers} layers leave no pruning window: "
            f"start_layer {start_layer} must precede stop_layer {stop_layer}"
        )


class ShapeMismatch(AdatpError):
    pass


class InfeasibleSpec(AdatpError):
    """A synthetic-dump request cannot be realized as asked; never built silently."""
