"""Experiment config files: flat ``key = value`` sections mirroring :class:`ExperimentConfig`.

Example::

    [experiment]
    scenario = TouchAndGo
    configuration = FullSoft
    seed = 3

    [horns]
    soft_k = 320

    [adc]
    bits = 12

Sections are ``experiment`` (top-level scalars), ``vehicle``, ``wall``, ``horns``,
``sensing``, ``adc`` (nested in sensing), ``profile``, ``attitude``, ``altitude``
and ``metrics``. Unknown sections or keys, repeated keys and unparsable values
are errors. ``none`` clears an optional value.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import fields, is_dataclass, replace
from pathlib import Path
from typing import Any

from .harness import ExperimentConfig

# section -> attribute path inside ExperimentConfig (empty: the config itself)
SECTIONS = {
    "experiment": (),
    "vehicle": ("vehicle",),
    "wall": ("wall",),
    "horns": ("horns",),
    "sensing": ("sensing",),
    "adc": ("sensing", "adc"),
    "profile": ("profile",),
    "attitude": ("attitude",),
    "altitude": ("altitude",),
    "metrics": ("metrics",),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def _get(cfg, path: tuple):
    obj = cfg
    for p in path:
        obj = getattr(obj, p)
    return obj


def _set(cfg, path: tuple, value):
    if not path:
        return value
    head, rest = path[0], path[1:]
    return replace(cfg, **{head: _set(getattr(cfg, head), rest, value)})


def _scalar_fields(obj) -> dict:
    return {f.name: f for f in fields(obj) if not is_dataclass(getattr(obj, f.name))}


def coerce(type_name: str, raw: str) -> Any:
    """Parse ``raw`` as the annotated field type (``float``, ``int``, ``bool``, ``str``, ``Optional[...]``)."""
    text = raw.strip()
    t = str(type_name)
    if t.startswith("Optional["):
        if text.lower() in ("none", ""):
            return None
        t = t[len("Optional["):-1]
    if t == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if t == "int":
        return int(text)
    if t == "float":
        v = float(text)
        if math.isnan(v):
            raise ValueError("nan is not allowed")
        return v
    if t == "str":
        return text
    raise ValueError(f"unsupported field type {type_name}")


def _resolve(cfg: ExperimentConfig, dotted: str):
    parts = dotted.split(".")
    if len(parts) == 1:
        section, key = "experiment", parts[0]
    elif len(parts) == 2:
        section, key = parts
    else:
        raise ConfigError(f"bad parameter name {dotted!r}; use section.key")
    if section not in SECTIONS:
        raise ConfigError(f"unknown section [{section}]")
    path = SECTIONS[section]
    known = _scalar_fields(_get(cfg, path))
    if key not in known:
        raise ConfigError(f"unknown key {key!r} in [{section}]; known: {', '.join(sorted(known))}")
    return section, path, known[key]


def parse_value(cfg: ExperimentConfig, dotted: str, raw: str):
    """Typed value of ``raw`` for the field named by ``section.key``."""
    section, _, f = _resolve(cfg, dotted)
    try:
        return coerce(f.type, raw)
    except ValueError as err:
        raise ConfigError(f"[{section}] {f.name}: {err}") from err


def get_value(cfg: ExperimentConfig, dotted: str):
    _, path, f = _resolve(cfg, dotted)
    return getattr(_get(cfg, path), f.name)


def set_value(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """Return ``cfg`` with ``section.key`` replaced by an already typed value."""
    section, path, f = _resolve(cfg, dotted)
    try:
        return _set(cfg, path, replace(_get(cfg, path), **{f.name: value}))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"[{section}] {f.name} = {value!r}: {err}") from err


def set_param(cfg: ExperimentConfig, dotted: str, raw: str) -> ExperimentConfig:
    """Return ``cfg`` with ``section.key`` set from its text form."""
    return set_value(cfg, dotted, parse_value(cfg, dotted, raw))


def parse_config(text: str, base: ExperimentConfig = ExperimentConfig(), source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__unused__",
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive field names
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"{source}: {err}") from err
    cfg = base
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]; known: {', '.join(SECTIONS)}")
        for key, raw in parser.items(section):
            dotted = key if section == "experiment" else f"{section}.{key}"
            try:
                cfg = set_param(cfg, dotted, raw)
            except ConfigError as err:
                raise ConfigError(f"{source}: {err}") from err
    return cfg


def load_config(path, base: ExperimentConfig = ExperimentConfig()) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"{path}: {err}") from err
    return parse_config(text, base, source=str(path))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Every setting in file form; ``parse_config(dump_config(c)) == c``."""
    lines = []
    for section, path in SECTIONS.items():
        obj = _get(cfg, path)
        lines.append(f"[{section}]")
        for name in _scalar_fields(obj):
            lines.append(f"{name} = {_fmt(getattr(obj, name))}")
        lines.append("")
    return "\n".join(lines)
