"""Readers and writers for the on-disk exchange formats.

Feature tensors travel as ``.rebf`` files, the byte format shared with
the detection package that consumes them:

    magic    4 bytes   b"REBF"
    version  u32 LE    currently 1
    dtype    u8        0 = float32 little-endian
    ndim     u8        1..4
    dims     ndim*u32  sizes, outermost first
    payload  row-major float32, 4 bytes per element

Sample lists travel as ``.rebm`` manifests: UTF-8 text, one sample per
line, tab-separated ``image-path<TAB>label[<TAB>mask-path]``.  Relative
paths inside a manifest are taken relative to the manifest's directory.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError, FormatError

MAGIC = b"REBF"
VERSION = 1
F32_CODE = 0
MAX_NDIM = 4

_FIXED = struct.Struct("<IBB")  # version, dtype code, rank


def _is_pathlike(obj) -> bool:
    return isinstance(obj, (str, bytes, os.PathLike))


def write_tensor(data, dest) -> None:
    """Write one float32 tensor to ``dest`` (path or binary file object)."""
    arr = np.asarray(data, dtype=np.float32)
    if not 1 <= arr.ndim <= MAX_NDIM:
        raise ValueError(f"tensor rank must be 1..{MAX_NDIM}, got {arr.ndim}")
    arr = np.ascontiguousarray(arr)
    if min(arr.shape) < 1:
        raise ValueError(f"tensor dims must be positive, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError("tensor contains non-finite values")
    blob = (
        MAGIC
        + _FIXED.pack(VERSION, F32_CODE, arr.ndim)
        + struct.pack(f"<{arr.ndim}I", *arr.shape)
        + arr.tobytes()
    )
    if _is_pathlike(dest):
        with open(dest, "wb") as fh:
            fh.write(blob)
    else:
        dest.write(blob)


def _take(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def read_tensor(source) -> np.ndarray:
    """Read one float32 tensor from ``source`` (path or binary file object)."""
    if _is_pathlike(source):
        with open(source, "rb") as fh:
            return read_tensor(fh)
    fh = source
    if _take(fh, 4, "header") != MAGIC:
        raise FormatError(f"bad magic: expected {MAGIC!r}")
    version, dtype, ndim = _FIXED.unpack(_take(fh, _FIXED.size, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}: expected {VERSION}")
    if dtype != F32_CODE:
        raise FormatError(f"unsupported dtype code {dtype}")
    if not 1 <= ndim <= MAX_NDIM:
        raise FormatError(f"bad rank {ndim}: must be 1..{MAX_NDIM}")
    dims = struct.unpack(f"<{ndim}I", _take(fh, 4 * ndim, "header"))
    if min(dims) < 1:
        raise FormatError(f"bad dims {dims}: sizes must be positive")
    count = 1
    for d in dims:
        count *= d
    payload = _take(fh, 4 * count, "payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.isfinite(arr).all():
        raise DataError("tensor payload contains non-finite values")
    return arr.astype(np.float32, copy=False)


@dataclass(frozen=True)
class ManifestEntry:
    """One sample: image path, integer class label, optional mask path."""

    image_path: str
    label: int
    mask_path: str = ""


def read_manifest(source) -> list[ManifestEntry]:
    """Parse a ``.rebm`` manifest into entries.

    Blank lines are skipped; malformed lines are rejected with their
    1-based line number.
    """
    if _is_pathlike(source):
        with open(source, "r", encoding="utf-8") as fh:
            return read_manifest(fh)
    entries = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if not 2 <= len(fields) <= 3:
            raise FormatError(
                f"manifest line {lineno}: expected 2 or 3 tab-separated fields, "
                f"got {len(fields)}"
            )
        try:
            label = int(fields[1])
        except ValueError:
            raise FormatError(
                f"manifest line {lineno}: label {fields[1]!r} is not an integer"
            ) from None
        if label < 0:
            raise FormatError(f"manifest line {lineno}: label must be non-negative")
        mask = fields[2] if len(fields) == 3 else ""
        entries.append(ManifestEntry(fields[0], label, mask))
    if not entries:
        raise DataError("manifest has no samples")
    return entries


def resolve_path(base_dir, path) -> Path:
    """Resolve a manifest-relative path against the manifest's directory."""
    p = Path(path)
    return p if p.is_absolute() else Path(base_dir) / p
