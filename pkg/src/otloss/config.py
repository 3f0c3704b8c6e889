"""Flat ``key = value`` config files.

Blank lines and ``#`` comments are ignored. Keys must be fields of the target
dataclass; values are converted with the type of the field's default.
Tuple-valued fields take comma-separated integers.
"""

from __future__ import annotations

from dataclasses import MISSING, fields


class ConfigError(ValueError):
    pass


def parse_key_values(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = (value, lineno)
    return out


def _convert(value: str, default, key: str, where: str):
    try:
        if isinstance(default, bool):
            if value.lower() not in ("true", "false"):
                raise ValueError
            return value.lower() == "true"
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(int(v) for v in value.split(",") if v.strip())
        return value
    except ValueError:
        raise ConfigError(f"{where}: bad value {value!r} for {key!r}") from None


def load_config(cls, text: str, source: str = "<config>", **overrides):
    """Build dataclass ``cls`` from config text; ``overrides`` win over file values."""
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, (value, lineno) in parse_key_values(text, source).items():
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} (allowed: {', '.join(known)})")
        default = known[key].default
        if default is MISSING:
            raise ConfigError(f"{source}:{lineno}: {key!r} cannot be set from a config file")
        kwargs[key] = _convert(value, default, key, f"{source}:{lineno}")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def dump_config(obj) -> str:
    lines = []
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
