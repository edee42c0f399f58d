"""Plain-text run configuration.

One ``key = value`` pair per line; ``#`` starts a comment; lists are written
``[v1, v2, ...]``. Numbers are parsed as int when possible, else float.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ParamError
from .model import PARAM_KEYS, ModelParams, validate_params


def _strict_int(v):
    if isinstance(v, bool) or not float(v).is_integer():
        raise ValueError(v)
    return int(v)


_strict_int.__name__ = "an integer"

RUN_KEYS = {
    "seed": _strict_int,
    "horizon": float,
    "sample_dt": float,
    "x0": float,
    "y0": float,
    "max_events": _strict_int,
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        where = f"{path}:{line}: " if line is not None and path else (f"line {line}: " if line else "")
        super().__init__(where + message)


@dataclass
class RunConfig:
    params: ModelParams
    raw: dict[str, Any]
    run: dict[str, Any] = field(default_factory=dict)

    def resolved(self) -> dict[str, Any]:
        """Model parameters and run options as a JSON-ready dict."""
        out = self.params.to_dict()
        out.update(self.run)
        return out


def _parse_scalar(text: str, lineno: int):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r}", lineno) from None


def _parse_value(text: str, lineno: int):
    text = text.strip()
    if not text:
        raise ConfigError("empty value", lineno)
    if text.startswith("["):
        if not text.endswith("]"):
            raise ConfigError("unterminated list", lineno)
        body = text[1:-1].strip()
        if not body:
            return []
        return [_parse_scalar(t, lineno) for t in body.split(",")]
    return _parse_scalar(text, lineno)


def parse_config_text(text: str, path: str | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    raw: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, path)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS and key not in RUN_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno, path)
        try:
            raw[key] = _parse_value(value, lineno)
        except ConfigError as e:
            raise ConfigError(str(e).split(": ", 1)[-1], lineno, path) from None
        lines[key] = lineno

    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    for key in PARAM_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", None, path)
    try:
        params = validate_params({k: raw[k] for k in PARAM_KEYS})
    except ParamError as e:
        key = getattr(e, "field", "").split("[")[0]
        raise ConfigError(str(e), lines.get(key), path) from None

    run = {}
    for key, conv in RUN_KEYS.items():
        if key in raw:
            try:
                run[key] = conv(raw[key])
            except (TypeError, ValueError):
                msg = f"{key} must be {getattr(conv, '__name__', 'numeric')}"
                raise ConfigError(msg, lines.get(key), path) from None
    return RunConfig(params=params, raw=raw, run=run)


def parse_config(path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return parse_config_text(text, str(path), overrides)
