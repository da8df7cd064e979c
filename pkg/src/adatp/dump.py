"""ADTP v1 container: the bit-exact on-disk form of one video-question sample.

Layout (little-endian, no padding):

    magic b"ADTP" | u32 version=1 | u32 n | u32 c | u32 d | u32 num_layers
    | u32 nonspatial_count | u32 meta_len | meta_len bytes UTF-8 JSON object
    | n*d f32 frame embeddings (frame-major) | d f32 text embedding
    | num_layers*n*c f32 attention (layer-major, then flat token index)

Floats are stored and held in memory as float32 so write->read round-trips
are bit-identical.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, NamedTuple

import numpy as np

from .errors import (
    BadMagic,
    InvariantViolation,
    MalformedMeta,
    NegativeAttention,
    NonFiniteValue,
    RangeOutOfBounds,
    TrailingBytes,
    TruncatedPayload,
    UnsupportedVersion,
)

MAGIC = b"ADTP"
VERSION = 1
_HEADER = struct.Struct("<4s7I")  # magic, version, n, c, d, num_layers, nonspatial_count, meta_len


class TokenId(NamedTuple):
    """Identity of one visual token: (frame index, within-frame spatial index)."""

    frame: int
    pos: int


def flatten_token(frame: int, pos: int, c: int) -> int:
    return frame * c + pos


def unflatten_token(flat: int, c: int) -> TokenId:
    return TokenId(flat // c, flat % c)


def _as_f32(a, shape, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float32).reshape(shape)
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class AdtpDump:
    """One sample: frame/text embeddings plus per-layer attention score vectors.

    Immutable after construction; the backing arrays are marked read-only so a
    dump can be shared freely across concurrent consumers.
    """

    n: int
    c: int
    d: int
    num_layers: int
    frame_embeddings: np.ndarray  # (n, d) float32
    text_embedding: np.ndarray  # (d,) float32
    attention: np.ndarray  # (num_layers, n*c) float32, non-negative
    nonspatial_count: int = 0
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "frame_embeddings", _as_f32(self.frame_embeddings, (self.n, self.d), "frame_embeddings")
        )
        object.__setattr__(self, "text_embedding", _as_f32(self.text_embedding, (self.d,), "text_embedding"))
        object.__setattr__(
            self, "attention", _as_f32(self.attention, (self.num_layers, self.n * self.c), "attention")
        )

    def validate(self) -> "AdtpDump":
        """Check every type invariant; raises InvariantViolation subclasses."""
        for name, value in (("n", self.n), ("c", self.c), ("d", self.d), ("num_layers", self.num_layers)):
            if value < 1:
                raise InvariantViolation(f"{name} must be >= 1, got {value}")
        if not 0 <= self.nonspatial_count <= self.c:
            raise InvariantViolation(
                f"nonspatial_count must lie in [0, c={self.c}], got {self.nonspatial_count}"
            )
        if not isinstance(self.meta, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in self.meta.items()
        ):
            raise InvariantViolation("meta must map strings to strings")

        for fname, arr in (("frame_embeddings", self.frame_embeddings), ("text_embedding", self.text_embedding)):
            bad = np.flatnonzero(~np.isfinite(arr.reshape(-1)))
            if bad.size:
                flat = int(bad[0])
                idx = np.unravel_index(flat, arr.shape)
                raise NonFiniteValue(fname, tuple(int(i) for i in idx), self._float_offset(fname, flat))

        att = self.attention
        bad = np.flatnonzero(~np.isfinite(att.reshape(-1)))
        if bad.size:
            flat = int(bad[0])
            layer, tok = divmod(flat, self.n * self.c)
            raise NonFiniteValue("attention", (layer, tok), self._float_offset("attention", flat))
        neg = np.flatnonzero(att.reshape(-1) < 0.0)
        if neg.size:
            flat = int(neg[0])
            layer, tok = divmod(flat, self.n * self.c)
            raise NegativeAttention(layer, tok, self._float_offset("attention", flat))
        return self

    def _float_offset(self, fname: str, flat_index: int) -> int:
        """Byte offset of a float within the serialized stream (for error messages)."""
        meta_len = len(_encode_meta(self.meta)) if isinstance(self.meta, dict) else 0
        base = _HEADER.size + meta_len
        starts = {
            "frame_embeddings": base,
            "text_embedding": base + 4 * self.n * self.d,
            "attention": base + 4 * (self.n * self.d + self.d),
        }
        return starts[fname] + 4 * flat_index

    # Equality is bit-level on floats: two dumps are equal iff they serialize
    # to the same bytes.
    def __eq__(self, other) -> bool:
        if not isinstance(other, AdtpDump):
            return NotImplemented
        return (
            (self.n, self.c, self.d, self.num_layers, self.nonspatial_count)
            == (other.n, other.c, other.d, other.num_layers, other.nonspatial_count)
            and self.meta == other.meta
            and self.frame_embeddings.tobytes() == other.frame_embeddings.tobytes()
            and self.text_embedding.tobytes() == other.text_embedding.tobytes()
            and self.attention.tobytes() == other.attention.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]

    def layer_scores(self, layer: int) -> np.ndarray:
        return self.attention[layer]


def _encode_meta(meta: dict[str, str]) -> bytes:
    return json.dumps(meta, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def write_dump(dump: AdtpDump) -> bytes:
    """Serialize a validated dump; read_dump(write_dump(d)) == d bit-exactly."""
    dump.validate()
    meta_bytes = _encode_meta(dump.meta)
    out = io.BytesIO()
    out.write(
        _HEADER.pack(MAGIC, VERSION, dump.n, dump.c, dump.d, dump.num_layers, dump.nonspatial_count, len(meta_bytes))
    )
    out.write(meta_bytes)
    out.write(dump.frame_embeddings.tobytes())
    out.write(dump.text_embedding.tobytes())
    out.write(dump.attention.tobytes())
    return out.getvalue()


def write_dump_file(dump: AdtpDump, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_dump(dump))


def read_dump(src: bytes | bytearray | memoryview | BinaryIO) -> AdtpDump:
    """Parse and validate an ADTP v1 stream.

    Raises BadMagic, UnsupportedVersion, TruncatedPayload, TrailingBytes,
    MalformedMeta, NonFiniteValue, NegativeAttention, or InvariantViolation,
    each naming the offending field/offset.
    """
    if hasattr(src, "read"):
        data = src.read()
    else:
        data = bytes(src)

    if len(data) < 4:
        raise TruncatedPayload("magic", 0, 4, len(data))
    if data[:4] != MAGIC:
        raise BadMagic(data[:4])
    if len(data) < _HEADER.size:
        raise TruncatedPayload("header", 4, _HEADER.size, len(data))
    _, version, n, c, d, num_layers, nonspatial, meta_len = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise UnsupportedVersion(version)

    off = _HEADER.size
    if len(data) < off + meta_len:
        raise TruncatedPayload("meta", off, meta_len, len(data) - off)
    meta_raw = data[off : off + meta_len]
    off += meta_len
    try:
        meta = json.loads(meta_raw.decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedMeta(str(exc)) from None
    if not isinstance(meta, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in meta.items()
    ):
        raise MalformedMeta("expected a flat JSON object of strings")

    counts = (("frame_embeddings", n * d), ("text_embedding", d), ("attention", num_layers * n * c))
    arrays = {}
    for fname, count in counts:
        nbytes = 4 * count
        if len(data) < off + nbytes:
            raise TruncatedPayload(fname, off, nbytes, len(data) - off)
        arrays[fname] = np.frombuffer(data, dtype="<f4", count=count, offset=off)
        off += nbytes
    if len(data) != off:
        raise TrailingBytes(off, len(data) - off)

    dump = AdtpDump(
        n=n,
        c=c,
        d=d,
        num_layers=num_layers,
        frame_embeddings=arrays["frame_embeddings"].reshape(n, d),
        text_embedding=arrays["text_embedding"],
        attention=arrays["attention"].reshape(num_layers, n * c),
        nonspatial_count=nonspatial,
        meta=meta,
    )
    return dump.validate()


def read_dump_file(path) -> AdtpDump:
    with open(path, "rb") as fh:
        return read_dump(fh)


def reduce_attention(full_map: np.ndarray, text_rows: range, visual_cols: range) -> np.ndarray:
    """Collapse a full attention map to one score per visual token.

    Averages the rows indexed by ``text_rows`` and slices the columns indexed
    by ``visual_cols``; both must be non-empty and lie inside the matrix.
    """
    m = np.asarray(full_map)
    if m.ndim != 2:
        raise RangeOutOfBounds(f"attention map must be 2-D, got shape {m.shape}")
    rows, cols = m.shape
    if len(text_rows) == 0:
        raise RangeOutOfBounds("text_rows is empty; row mean is undefined")
    if len(visual_cols) == 0:
        raise RangeOutOfBounds("visual_cols is empty; score vector would have length 0")
    if text_rows.start < 0 or text_rows.stop > rows or text_rows.step != 1:
        raise RangeOutOfBounds(f"text_rows {text_rows} outside matrix with {rows} rows")
    if visual_cols.start < 0 or visual_cols.stop > cols or visual_cols.step != 1:
        raise RangeOutOfBounds(f"visual_cols {visual_cols} outside matrix with {cols} columns")
    block = m[text_rows.start : text_rows.stop, visual_cols.start : visual_cols.stop]
    return block.astype(np.float64).mean(axis=0)
