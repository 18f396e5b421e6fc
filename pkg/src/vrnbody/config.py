"""Flat ``key=value`` text configs.

Blank lines and lines starting with ``#`` are ignored. Keys may not repeat.
"""

from __future__ import annotations

from .errors import ParseError


def parse_config(text, path=None):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno, path)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno, path)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno, path)
        values[key] = value
    return values


def read_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def format_config(values):
    return "".join(f"{k}={v}\n" for k, v in values.items())


def parse_dims(text):
    """Parse ``"32x64x24"`` (or a single ``"32"`` for a cube) into a (W, H, D) tuple."""
    parts = str(text).lower().replace(",", "x").split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise ValueError(f"bad dims {text!r}; expected WxHxD") from None
    if len(dims) == 1:
        dims = dims * 3
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise ValueError(f"bad dims {text!r}; expected three positive extents WxHxD")
    return dims


def format_dims(dims):
    return "x".join(str(int(d)) for d in dims)


def parse_bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"bad boolean {text!r}")
