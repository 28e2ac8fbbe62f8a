"""Minimal key-value text format shared by potential and experiment configs.

Lines are ``key = value``. Blank lines and text after ``#`` are ignored. Keys may be
dotted to group related settings, for example ``potential.term.0.kind = gaussian``.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_key_values(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_key_values(text, source=str(path))


def subsection(mapping: dict[str, str], prefix: str) -> dict[str, str]:
    """Entries under ``prefix.`` with the prefix removed."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in mapping.items() if k.startswith(p)}


def get_float(mapping: dict[str, str], key: str, default: float | None = None) -> float:
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return float(mapping[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {mapping[key]!r} as a number") from exc


def get_int(mapping: dict[str, str], key: str, default: int | None = None) -> int:
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(mapping[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {mapping[key]!r} as an integer") from exc


def get_floats(mapping: dict[str, str], key: str, default=None) -> tuple[float, ...]:
    if key not in mapping:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return tuple(default)
    try:
        return tuple(float(p) for p in mapping[key].replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {mapping[key]!r} as numbers") from exc


def get_list(mapping: dict[str, str], key: str, default=()) -> tuple[str, ...]:
    if key not in mapping:
        return tuple(default)
    return tuple(p for p in mapping[key].replace(",", " ").split() if p)
