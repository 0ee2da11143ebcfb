"""Deterministic JSON and CSV emission.

All report files use a fixed key order and render every floating point
value with up to 17 significant digits, which is enough to reproduce the
exact double on re-parsing.  Determinism of the emitted bytes (given
identical inputs) is part of the output contract, so no timestamps or
environment-dependent values may enter these writers.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Any

import numpy as np

FLOAT_FMT = ".17g"


def format_float(x: float) -> str:
    """Render a float with 17 significant digits (value-exact round trip)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, FLOAT_FMT)


def _json_float(x: float) -> str:
    # JSON has no nan/inf literals; reports map them to null.
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, FLOAT_FMT)


def dumps(obj: Any, indent: int = 2) -> str:
    """Serialize nested dicts/lists/arrays/scalars to deterministic JSON."""
    out: list[str] = []
    _write(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def _write(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    closing = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_json_float(obj))
    elif isinstance(obj, str):
        out.append(_escape(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(pad)
            out.append(_escape(str(k)))
            out.append(": ")
            _write(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(closing + "}")
    elif isinstance(obj, np.ndarray):
        _write(obj.tolist(), out, indent, level)
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _write(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(closing + "]")
    else:
        raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def _escape(s: str) -> str:
    buf = ['"']
    for ch in s:
        if ch == '"':
            buf.append('\\"')
        elif ch == "\\":
            buf.append("\\\\")
        elif ch == "\n":
            buf.append("\\n")
        elif ch == "\t":
            buf.append("\\t")
        elif ch == "\r":
            buf.append("\\r")
        elif ord(ch) < 0x20:
            buf.append(f"\\u{ord(ch):04x}")
        else:
            buf.append(ch)
    buf.append('"')
    return "".join(buf)


def dump_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()
