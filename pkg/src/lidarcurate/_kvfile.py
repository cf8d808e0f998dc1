"""Minimal ``key=value`` configuration text handling."""

from __future__ import annotations

from .errors import ConfigError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_kv(text: str) -> dict[str, str]:
    """Blank lines and ``#`` comments are ignored; later keys win."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        values[key] = value.strip()
    return values


def parse_bool(key: str, value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def format_kv(items: dict[str, object]) -> str:
    return "".join(f"{k}={v}\n" for k, v in items.items())
