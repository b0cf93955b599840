"""Readers and writers for the on-disk interchange formats.

Match CSV      header ``x_src,y_src,x_dst,y_dst`` with an optional fifth
               ``provenance`` column. Rows missing the column get the tag
               "unknown".
Landmark CSV   pandas-style header ``,X,Y`` followed by ``index,X,Y`` rows
               with a contiguous 0-based index.
DVF raster     binary: magic ``DVF1``, uint32-LE width, uint32-LE height,
               then width*height little-endian float32 (dx, dy) records in
               row-major order. The stored vectors follow the pull
               convention: output(x, y) = input((x, y) + field[y, x]).
PNG            8-bit grayscale or RGB only.

CSV coordinates are serialized with repr() so a write/read round trip
reproduces the exact float64 values (repr meets and exceeds the 9
significant digits the formats guarantee). JSON reports instead use a
fixed %.9g rendering so repeated runs are byte-identical.
"""

import csv
import io as _stdio
import json
import struct

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadMagicError,
    CorruptPayloadError,
    DecodeFailureError,
    IoFailureError,
    MalformedRowError,
    NonContiguousIndexError,
    TruncatedPayloadError,
    UnsupportedFormatError,
)
from .types import MatchSet

MATCH_HEADER = ("x_src", "y_src", "x_dst", "y_dst")
DVF_MAGIC = b"DVF1"


def _parse_float(text, line, what):
    try:
        value = float(text)
    except ValueError:
        raise MalformedRowError(line, f"{what} is not a number: {text!r}") from None
    if not np.isfinite(value):
        raise MalformedRowError(line, f"{what} is not finite: {text!r}")
    return value


def read_match_csv(path):
    """Parse a match CSV into a MatchSet.

    Raises MalformedRowError with a 1-based line number on the first bad
    row. A header-only file yields an empty set.
    """
    try:
        with open(path, "r", newline="") as fp:
            rows = list(csv.reader(fp))
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    if not rows:
        raise MalformedRowError(1, "missing header")
    header = tuple(c.strip() for c in rows[0])
    if header == MATCH_HEADER:
        has_prov = False
    elif header == MATCH_HEADER + ("provenance",):
        has_prov = True
    else:
        raise MalformedRowError(1, f"unexpected header {','.join(header)!r}")
    width = 5 if has_prov else 4
    src, dst, prov = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise MalformedRowError(line, f"expected {width} fields, got {len(row)}")
        xs = _parse_float(row[0], line, "x_src")
        ys = _parse_float(row[1], line, "y_src")
        xd = _parse_float(row[2], line, "x_dst")
        yd = _parse_float(row[3], line, "y_dst")
        src.append((xs, ys))
        dst.append((xd, yd))
        prov.append(row[4] if has_prov else "unknown")
    return MatchSet(src, dst, prov)


def write_match_csv(matches, path):
    """Write a MatchSet; always includes the provenance column."""
    try:
        with open(path, "w", newline="") as fp:
            w = csv.writer(fp)
            w.writerow(MATCH_HEADER + ("provenance",))
            for (xs, ys), (xd, yd), p in zip(matches.src, matches.dst, matches.provenance):
                w.writerow([repr(float(xs)), repr(float(ys)), repr(float(xd)), repr(float(yd)), p])
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def read_landmarks_csv(path):
    """Parse a landmark CSV into an (n, 2) float64 array."""
    try:
        with open(path, "r", newline="") as fp:
            rows = list(csv.reader(fp))
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    if not rows:
        raise MalformedRowError(1, "missing header")
    header = tuple(c.strip() for c in rows[0])
    if header != ("", "X", "Y"):
        raise MalformedRowError(1, f"unexpected header {','.join(header)!r}")
    pts = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise MalformedRowError(line, f"expected 3 fields, got {len(row)}")
        expected = line - 2
        try:
            idx = int(row[0])
        except ValueError:
            raise MalformedRowError(line, f"index is not an integer: {row[0]!r}") from None
        if idx != expected:
            raise NonContiguousIndexError(
                f"line {line}: landmark index {idx} (expected {expected})"
            )
        x = _parse_float(row[1], line, "X")
        y = _parse_float(row[2], line, "Y")
        pts.append((x, y))
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


def write_landmarks_csv(points, path):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    try:
        with open(path, "w", newline="") as fp:
            w = csv.writer(fp)
            w.writerow(["", "X", "Y"])
            for i, (x, y) in enumerate(points):
                w.writerow([i, repr(float(x)), repr(float(y))])
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def write_dvf(field, path):
    """Serialize an (h, w, 2) displacement raster to the binary format."""
    arr = np.asarray(field, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"field must have shape (h, w, 2), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("field must cover at least one pixel")
    if not np.isfinite(arr).all():
        raise ValueError("field values must be finite")
    h, w = arr.shape[:2]
    try:
        with open(path, "wb") as fp:
            fp.write(DVF_MAGIC)
            fp.write(struct.pack("<II", w, h))
            fp.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def read_dvf(path):
    """Read a binary displacement raster back into an (h, w, 2) float32 array."""
    try:
        with open(path, "rb") as fp:
            blob = fp.read()
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    if blob[:4] != DVF_MAGIC:
        raise BadMagicError(f"expected magic {DVF_MAGIC!r}, got {blob[:4]!r}")
    if len(blob) < 12:
        raise TruncatedPayloadError("header cut short")
    w, h = struct.unpack("<II", blob[4:12])
    if w < 1 or h < 1:
        raise CorruptPayloadError(f"invalid raster dimensions {w}x{h}")
    expected = w * h * 8
    payload = blob[12:]
    if len(payload) != expected:
        raise TruncatedPayloadError(
            f"payload holds {len(payload)} bytes, header promises {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(h, w, 2).copy()
    if not np.isfinite(arr).all():
        raise CorruptPayloadError("field contains non-finite values")
    return arr


def read_image(path):
    """Load an 8-bit grayscale or RGB PNG as an (h, w) or (h, w, 3) uint8 array."""
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, SyntaxError) as exc:
        raise DecodeFailureError(f"cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    if img.mode not in ("L", "RGB"):
        raise UnsupportedFormatError(
            f"{path}: mode {img.mode!r} unsupported (need 8-bit grayscale or RGB)"
        )
    return np.asarray(img, dtype=np.uint8)


def write_image(image, path):
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise ValueError("images must be uint8")
    if arr.ndim == 2:
        mode = "L"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        mode = "RGB"
    else:
        raise ValueError(f"unsupported image shape {arr.shape}")
    try:
        Image.fromarray(arr, mode=mode).save(path, format="PNG")
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def _render_json(obj, out, indent):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.write(f'{pad}  "{k}": ')
            _render_json(v, out, indent + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.write("[]")
            return
        out.write("[\n")
        for i, v in enumerate(obj):
            out.write(pad + "  ")
            _render_json(v, out, indent + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(pad + "]")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif obj is None:
        out.write("null")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            raise ValueError("reports must contain only finite numbers")
        out.write(format(x, ".9g"))
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj)} into a report")


def dumps_report(obj):
    """Render a report dict as JSON with insertion-ordered keys and floats
    formatted to 9 significant digits, so identical runs produce identical
    bytes."""
    out = _stdio.StringIO()
    _render_json(obj, out, 0)
    out.write("\n")
    return out.getvalue()


def write_report(obj, path=None):
    """Write a report to a file, or return the rendered text if path is None."""
    text = dumps_report(obj)
    if path is None:
        return text
    try:
        with open(path, "w") as fp:
            fp.write(text)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    return text
