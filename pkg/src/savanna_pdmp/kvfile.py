"""Flat ``key = value`` text files used for parameters, manifests and reports.

Blank lines and lines starting with ``#`` are ignored. Keys are written in
the order given; floats are written with ``repr`` so they round-trip.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from .errors import ConfigError

FORMAT_VERSION = 1


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_kv(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_kv(text)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def format_kv(record: Mapping) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in record.items())


def write_kv(path, record: Mapping) -> None:
    Path(path).write_text(format_kv(record))


def floats(value: str) -> list[float]:
    return [float(v) for v in value.split()]
