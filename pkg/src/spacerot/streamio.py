"""Feature stream container: bit-exact binary format shared with the extractor.

Layout (all integers and floats little-endian):

    offset  size            field
    0       4               magic "SOBA"
    4       4               version (u32) = 1
    8       4               d (u32)          embedding dimension
    12      4               N (u32)          class count
    16      8               sample_count (u64)
    24      N*d*4           text rows, float32, row-major
    ...     4               manifest length (u32)
    ...     manifest        UTF-8 JSON: {"class_names": [...], "provenance": {...}}
    ...     records         sample_count * (u32 label | 0xFFFFFFFF, d * float32)

Magic and version are validated before anything is allocated from header
fields, and every declared size is bounds-checked against the real file
length before its payload is read.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import TextWeights, InvalidValueError, STRICT_NORM_RANGE

MAGIC = b"SOBA"
VERSION = 1
UNKNOWN_LABEL = 0xFFFFFFFF
_HEADER = struct.Struct("<4sIIIQ")


class StreamFormatError(ValueError):
    """Base class for unreadable stream files."""


class BadMagicError(StreamFormatError):
    pass


class UnsupportedVersionError(StreamFormatError):
    pass


class CorruptFileError(StreamFormatError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message}: corrupt at byte offset {offset}")
        self.offset = offset


def write_stream(path, weights: TextWeights, features, labels=None, provenance=None) -> None:
    """Write text rows, manifest and sample records; float payloads are f32."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != weights.dim:
        raise InvalidValueError(
            f"features {feats.shape} inconsistent with weight dim {weights.dim}"
        )
    if not np.all(np.isfinite(feats)):
        raise InvalidValueError("non-finite feature entries")
    count = feats.shape[0]
    if labels is None:
        lab = np.full(count, UNKNOWN_LABEL, dtype=np.uint32)
    else:
        lab = np.asarray(labels)
        if lab.shape != (count,):
            raise InvalidValueError(f"{lab.shape[0] if lab.ndim else 0} labels for {count} samples")
        lab = np.where(lab < 0, UNKNOWN_LABEL, lab).astype(np.uint32)
        valid = lab[lab != UNKNOWN_LABEL]
        if valid.size and valid.max() >= weights.n_classes:
            raise InvalidValueError("label outside class range")
    manifest = json.dumps(
        {"class_names": list(weights.class_names), "provenance": provenance or {}},
        sort_keys=True,
    ).encode("utf-8")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, weights.dim, weights.n_classes, count))
        fh.write(np.ascontiguousarray(weights.matrix, dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        if count:
            records = np.empty(count, dtype=[("label", "<u4"), ("feature", "<f4", (weights.dim,))])
            records["label"] = lab
            records["feature"] = feats
            fh.write(records.tobytes())


def read_stream(path, strict: bool = False):
    """Read a stream file back as (TextWeights, features, labels, manifest).

    Features come back float64 and unit-normalized (strict mode rejects rows
    whose stored norm falls outside [0.99, 1.01]); unknown labels map to -1.
    """
    path = Path(path)
    blob = path.read_bytes()
    size = len(blob)
    if size < _HEADER.size:
        raise CorruptFileError("file shorter than header", size)
    magic, version, d, n, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"not a feature stream (magic {magic!r})")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if d == 0 or n < 2:
        raise CorruptFileError(f"implausible header (d={d}, N={n})", 8)
    offset = _HEADER.size
    text_bytes = n * d * 4
    if size < offset + text_bytes + 4:
        raise CorruptFileError("text block exceeds file size", offset)
    text = np.frombuffer(blob, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    offset += text_bytes
    (mlen,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if size < offset + mlen:
        raise CorruptFileError("manifest exceeds file size", offset)
    try:
        manifest = json.loads(blob[offset:offset + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFileError(f"manifest is not valid JSON ({exc})", offset) from exc
    offset += mlen
    record_bytes = count * (4 + d * 4)
    if size != offset + record_bytes:
        raise CorruptFileError(
            f"expected {record_bytes} record bytes for {count} samples, found {size - offset}",
            offset,
        )
    names = manifest.get("class_names")
    if not isinstance(names, list) or len(names) != n:
        raise CorruptFileError(f"manifest class_names missing or wrong length", offset - mlen)
    weights = TextWeights(matrix=np.asarray(text, dtype=np.float64), class_names=tuple(names))
    if count:
        records = np.frombuffer(
            blob, dtype=[("label", "<u4"), ("feature", "<f4", (d,))], count=count, offset=offset
        )
        labels = records["label"].astype(np.int64)
        labels[labels == UNKNOWN_LABEL] = -1
        feats = records["feature"].astype(np.float64)
    else:
        labels = np.empty(0, dtype=np.int64)
        feats = np.empty((0, d))
    if not np.all(np.isfinite(feats)):
        raise CorruptFileError("non-finite feature entries", offset)
    if count:
        norms = np.linalg.norm(feats, axis=1)
        if np.any(norms == 0):
            raise CorruptFileError("zero-norm feature row", offset)
        if strict:
            lo, hi = STRICT_NORM_RANGE
            bad = (norms < lo) | (norms > hi)
            if np.any(bad):
                raise InvalidValueError(
                    f"strict ingestion: {int(bad.sum())} feature norms outside [{lo}, {hi}]"
                )
        feats = feats / norms[:, None]
    return weights, feats, labels, manifest
