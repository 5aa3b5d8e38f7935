"""Matrix file formats: a small binary container and a CSV twin.

Binary layout (little-endian): an 8-byte magic, a 4-byte dtype tag,
two unsigned 64-bit dimensions, then the row-major float64 payload.
The CSV form carries a ``# rows cols`` comment header and uses
shortest-round-trip float formatting, so a write/read cycle reproduces
every value exactly in either format.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError

MAGIC = b"GRNMF1\x00\x00"
DTYPE_TAG = b"<f8\x00"
_HEADER = struct.Struct("<8s4sQQ")

BINARY_SUFFIX = ".grnmf"


def _validated(arr, where):
    arr = np.ascontiguousarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.size == 0:
        raise DomainError("%s: only nonempty 2-D matrices are supported" % where)
    if not np.all(np.isfinite(arr)):
        raise DomainError("%s: refusing to store non-finite values" % where)
    return arr


def write_matrix_binary(path, arr):
    arr = _validated(arr, str(path))
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, DTYPE_TAG, rows, cols))
        fh.write(arr.astype("<f8").tobytes(order="C"))


def read_matrix_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("%s: truncated header" % path)
    magic, tag, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError("%s: bad magic %r" % (path, magic))
    if tag != DTYPE_TAG:
        raise ParseError("%s: unsupported dtype tag %r" % (path, tag))
    payload = raw[_HEADER.size :]
    expected = rows * cols * 8
    if len(payload) != expected:
        raise ParseError(
            "%s: payload is %d bytes, header declares %d" % (path, len(payload), expected)
        )
    arr = np.frombuffer(payload, dtype="<f8").astype(float).reshape(rows, cols)
    if not np.all(np.isfinite(arr)):
        raise ParseError("%s: payload contains non-finite values" % path)
    return arr


def write_matrix_csv(path, arr):
    arr = _validated(arr, str(path))
    rows, cols = arr.shape
    lines = ["# %d %d" % (rows, cols)]
    for r in range(rows):
        lines.append(",".join(repr(float(v)) for v in arr[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path):
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise ParseError("%s: not a text matrix file" % path) from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("%s: empty matrix file" % path)
    head = lines[0]
    if not head.lstrip().startswith("#"):
        raise ParseError("%s: missing '# rows cols' header" % path)
    parts = head.lstrip("# \t").split()
    if len(parts) != 2:
        raise ParseError("%s: malformed dimension header %r" % (path, head))
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ParseError("%s: malformed dimension header %r" % (path, head)) from exc
    body = lines[1:]
    if len(body) != rows:
        raise ParseError("%s: %d data rows, header declares %d" % (path, len(body), rows))
    out = np.empty((rows, cols))
    for r, ln in enumerate(body):
        cells = ln.split(",")
        if len(cells) != cols:
            raise ParseError(
                "%s: row %d has %d columns, header declares %d" % (path, r, len(cells), cols)
            )
        try:
            out[r] = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError("%s: row %d has a non-numeric cell" % (path, r)) from exc
    if not np.all(np.isfinite(out)):
        raise ParseError("%s: matrix contains non-finite values" % path)
    return out


def write_matrix(path, arr, fmt="binary"):
    if fmt == "binary":
        write_matrix_binary(path, arr)
    elif fmt == "csv":
        write_matrix_csv(path, arr)
    else:
        raise ValueError("fmt must be 'binary' or 'csv', got %r" % fmt)


def read_matrix(path):
    """Read a matrix in either format, sniffing the binary magic."""
    path = Path(path)
    if not path.is_file():
        raise ParseError("%s: no such file" % path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return read_matrix_binary(path)
    return read_matrix_csv(path)
