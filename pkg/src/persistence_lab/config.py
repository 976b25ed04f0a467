"""Flat ``key = value`` run configuration shared by the command-line tools."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import DomainError

__all__ = ["RunConfig", "parse_config", "serialize_config", "load_config"]


@dataclass(frozen=True)
class RunConfig:
    """Every option a command can take; ``None`` means "not set here"."""

    alpha: float | None = None
    kappa: float | None = None
    chi: float | None = None
    beta: float | None = None
    pv_epsilon: float | None = None
    level: float | None = None
    paths: int | None = None
    steps: int | None = None
    horizon: float | None = None
    seed: int | None = None
    threads: int | None = None
    bandwidth: float | None = None
    max_blocks: int | None = None
    n: int | None = None
    suite: str | None = None
    out: str | None = None

    def merged(self, other: "RunConfig") -> "RunConfig":
        """``other`` wins wherever it sets a value."""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update({f.name: getattr(other, f.name) for f in fields(other) if getattr(other, f.name) is not None})
        return RunConfig(**values)

    def get(self, key: str, default=None):
        value = getattr(self, key)
        return default if value is None else value


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, text: str):
    kind = _TYPES[key]
    try:
        if kind.startswith("int"):
            return int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise DomainError(f"config key {key!r}: cannot parse {text!r} as {kind.split(' ')[0]}") from None
    return text


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise DomainError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return RunConfig(**values)


def serialize_config(config: RunConfig) -> str:
    lines = []
    for f in fields(config):
        value = getattr(config, f.name)
        if value is not None:
            lines.append(f"{f.name} = {value!r}" if isinstance(value, float) else f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except FileNotFoundError:
        raise DomainError(f"config file not found: {path}") from None
