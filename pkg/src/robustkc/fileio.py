"""CSV/JSON reading and atomic writing."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Optional

import numpy as np

from .core import InputError


def _parse_float(tok: str, line: int, col: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise InputError(f"line {line}, column {col}: cannot parse {tok.strip()!r} as a number") from None
    if not np.isfinite(v):
        raise InputError(f"line {line}, column {col}: non-finite value {tok.strip()!r}")
    return v


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def parse_csv(text: str):
    """Parse comma-separated numeric text with an optional single header row.

    Returns (array of shape (rows, cols), header or None). Blank lines are
    skipped. Line and column numbers in errors are 1-based.
    """
    rows = []
    header = None
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        toks = line.split(",")
        if not rows and header is None and not any(_is_number(t) for t in toks):
            header = [t.strip() for t in toks]
            width = len(toks)
            continue
        if width is None:
            width = len(toks)
        elif len(toks) != width:
            raise InputError(f"line {lineno}: expected {width} columns, found {len(toks)}")
        rows.append([_parse_float(t, lineno, c) for c, t in enumerate(toks, start=1)])
    if not rows:
        raise InputError("no data rows")
    return np.array(rows, dtype=np.float64), header


def read_csv(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return parse_csv(text)


def format_csv(A: np.ndarray, header: Optional[list] = None) -> str:
    A = np.atleast_2d(np.asarray(A))
    lines = [",".join(header)] if header else []
    if np.issubdtype(A.dtype, np.integer):
        lines += [",".join(str(int(v)) for v in row) for row in A]
    else:
        # 17 significant digits round-trip any double exactly
        lines += [",".join("%.17g" % v for v in row) for row in A]
    return "\n".join(lines) + "\n"


def atomic_write(path: str, data: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, A: np.ndarray, header: Optional[list] = None) -> None:
    atomic_write(path, format_csv(A, header))


def write_json(path: str, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default)


def fingerprint(A: np.ndarray) -> str:
    """sha256 over shape and little-endian float64 bytes."""
    A = np.ascontiguousarray(A, dtype="<f8")
    h = hashlib.sha256()
    h.update(repr(A.shape).encode())
    h.update(A.tobytes())
    return h.hexdigest()
