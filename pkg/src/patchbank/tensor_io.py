"""Binary tensor files (.rebf) and sample manifests (.rebm).

A ``.rebf`` file is a little-endian container for one or more dense
float32 tensors, written back to back:

    magic    4 bytes   b"REBF"
    version  u32       currently 1
    dtype    u8        0 = float32 little-endian (the only code in v1)
    ndim     u8        1..4
    dims     ndim*u32  sizes, outermost first
    payload  4 bytes per element, row-major (last dim fastest)

The header is therefore ``10 + 4 * ndim`` bytes.  Files are bit-exact
across platforms.  A ``.rebm`` manifest is UTF-8 text, one sample per
line, tab-separated: ``image-path<TAB>label[<TAB>mask-path]``.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, FormatError

MAGIC = b"REBF"
VERSION = 1
DTYPE_F32 = 0
MAX_NDIM = 4

TENSOR_SUFFIX = ".rebf"
MANIFEST_SUFFIX = ".rebm"


def header_size(ndim: int) -> int:
    """Byte length of a tensor header with the given rank."""
    return 10 + 4 * ndim


def _is_pathlike(obj) -> bool:
    return isinstance(obj, (str, bytes, os.PathLike))


def write_tensor(data, sink) -> None:
    """Write one float32 tensor to ``sink`` (path or binary file object).

    ``data`` must be 1- to 4-dimensional with positive sizes and finite
    values; it is converted to float32 before writing.
    """
    arr = np.asarray(data, dtype=np.float32)
    if not 1 <= arr.ndim <= MAX_NDIM:
        raise ValueError(f"tensor rank must be 1..{MAX_NDIM}, got {arr.ndim}")
    arr = np.ascontiguousarray(arr)
    if min(arr.shape) < 1:
        raise ValueError(f"tensor dims must be positive, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError("tensor contains non-finite values")
    header = MAGIC + struct.pack(
        "<IBB", VERSION, DTYPE_F32, arr.ndim
    ) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    if _is_pathlike(sink):
        with open(sink, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes())
    else:
        sink.write(header)
        sink.write(arr.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def read_tensor(source) -> np.ndarray:
    """Read one float32 tensor from ``source`` (path or binary file object).

    When given a file object the stream is left positioned after the
    tensor, so several tensors can be read back to back.
    """
    if _is_pathlike(source):
        with open(source, "rb") as fh:
            return read_tensor(fh)
    fh = source
    magic = _read_exact(fh, 4, "header")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}: expected {MAGIC!r}")
    version, dtype, ndim = struct.unpack("<IBB", _read_exact(fh, 6, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}: expected {VERSION}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unsupported dtype code {dtype}")
    if not 1 <= ndim <= MAX_NDIM:
        raise FormatError(f"bad rank {ndim}: must be 1..{MAX_NDIM}")
    dims = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, "header"))
    if min(dims) < 1:
        raise FormatError(f"bad dims {dims}: sizes must be positive")
    count = 1
    for d in dims:
        count *= d
    payload = fh.read(4 * count)
    if len(payload) != 4 * count:
        raise FormatError(
            f"truncated payload: expected {4 * count} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.isfinite(arr).all():
        raise DataError("tensor payload contains non-finite values")
    return arr.astype(np.float32, copy=False)


def tensor_to_bytes(data) -> bytes:
    """Serialize a tensor to bytes (convenience wrapper)."""
    buf = io.BytesIO()
    write_tensor(data, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class FeatureTensor:
    """One C×H×W activation block from a backbone hierarchy."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if arr.ndim != 3:
            raise ValueError(f"feature tensor must be C×H×W, got rank {arr.ndim}")
        if min(arr.shape) < 1:
            raise ValueError(f"feature tensor dims must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("feature tensor contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def write(self, sink) -> None:
        write_tensor(self.data, sink)

    @classmethod
    def read(cls, source) -> "FeatureTensor":
        arr = read_tensor(source)
        if arr.ndim != 3:
            raise FormatError(f"expected a rank-3 tensor, got rank {arr.ndim}")
        return cls(arr)


@dataclass(frozen=True)
class ManifestRow:
    """One sample: image path, integer class label, optional mask path."""

    image_path: str
    label: int
    mask_path: str = ""

    def __post_init__(self):
        if self.label < 0:
            raise DataError(f"label must be non-negative, got {self.label}")


def read_manifest(source, check_files: bool = False) -> list[ManifestRow]:
    """Parse a ``.rebm`` manifest into rows.

    Rows with fewer than two tab-separated fields are rejected with
    their 1-based line number.  With ``check_files=True`` every
    referenced path must exist.
    """
    if _is_pathlike(source):
        with open(source, "r", encoding="utf-8") as fh:
            return read_manifest(fh, check_files=check_files)
    rows = []
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 2:
            raise FormatError(
                f"manifest line {lineno}: expected at least 2 tab-separated "
                f"fields, got {len(fields)}"
            )
        if len(fields) > 3:
            raise FormatError(
                f"manifest line {lineno}: expected at most 3 fields, got {len(fields)}"
            )
        path = fields[0]
        try:
            label = int(fields[1])
        except ValueError:
            raise FormatError(
                f"manifest line {lineno}: label {fields[1]!r} is not an integer"
            ) from None
        if label < 0:
            raise FormatError(f"manifest line {lineno}: label must be non-negative")
        mask = fields[2] if len(fields) == 3 else ""
        if check_files:
            if not os.path.exists(path):
                raise DataError(f"manifest line {lineno}: missing file {path!r}")
            if mask and not os.path.exists(mask):
                raise DataError(f"manifest line {lineno}: missing mask {mask!r}")
        rows.append(ManifestRow(path, label, mask))
    return rows


def write_manifest(rows, sink) -> None:
    """Write manifest rows as tab-separated UTF-8 lines."""
    if _is_pathlike(sink):
        with open(sink, "w", encoding="utf-8") as fh:
            write_manifest(rows, fh)
        return
    for row in rows:
        if row.mask_path:
            sink.write(f"{row.image_path}\t{row.label}\t{row.mask_path}\n")
        else:
            sink.write(f"{row.image_path}\t{row.label}\n")
