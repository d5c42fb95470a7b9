"""Flat ``key = value`` experiment manifests."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

COMMON_KEYS = ("experiment", "seed", "replicas", "workers", "out", "format")
FORMATS = ("csv", "json")


@dataclass
class Manifest:
    """Ordered key/value pairs plus the text they were read from."""

    values: dict[str, str] = field(default_factory=dict)
    text: str | None = None

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self.values

    def with_values(self, **overrides) -> "Manifest":
        """Copy with command-line overrides; the echoed text gains override lines."""
        extra = {k: str(v) for k, v in overrides.items() if v is not None}
        if not extra:
            return self
        values = dict(self.values)
        values.update(extra)
        lines = [self.echo().rstrip("\n")] if self.values else []
        lines += [f"{k} = {v}" for k, v in extra.items()]
        return Manifest(values, "\n".join(line for line in lines if line) + "\n")

    def dump(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.values.items())

    def echo(self) -> str:
        """The manifest as given (canonical dump when built programmatically)."""
        return self.text if self.text is not None else self.dump()


def parse_manifest(text: str) -> Manifest:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return Manifest(values, text)


def load_manifest(path: str | Path) -> Manifest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    return parse_manifest(text)


def coerce(key: str, raw: str, default):
    """Convert ``raw`` to the type of ``default``; tuples are comma-separated."""
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else str
            return tuple(kind(part.strip()) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def to_text(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)
