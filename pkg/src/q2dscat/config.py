"""
INI-style configuration with [model], [numerics] and [sweep] sections.

Example::

    [model]
    y = 0.7
    a_h = 1.7
    q = 0.05

    [numerics]
    ppw = 64

    [sweep]
    axis1 = a_d list 0 0.32 0.73 2.02
    axis2 = s linear -6 6 241
    output = fig8.csv
"""

from __future__ import annotations

import configparser
import math
from dataclasses import fields
from typing import Optional

from .params import ModelParams, NumericsParams
from .sweep import Axis, SweepSpec


class ConfigError(ValueError):
    pass


def _field_types(cls) -> dict:
    return {f.name: f.type for f in fields(cls)}


MODEL_KEYS = tuple(f.name for f in fields(ModelParams))
NUMERICS_KEYS = tuple(f.name for f in fields(NumericsParams))
SWEEP_KEYS = ("axis1", "axis2", "output", "json", "workers", "name")


def _convert(cls, key: str, raw):
    """Convert a raw string (or value) for a dataclass field, by the field's default type."""
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() in ("none", ""):
        return None
    default = {f.name: f.default for f in fields(cls)}[key]
    ftype = str(_field_types(cls)[key])
    try:
        if key == "statistics":
            return text
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int) or "int" in ftype:
            return int(text)
        if isinstance(default, float) or "float" in ftype:
            v = float(text)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def _build(cls, values: dict):
    kwargs = {k: _convert(cls, k, v) for k, v in values.items() if v is not None}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def read_config(path: Optional[str]) -> dict:
    """Raw section dictionaries from a config file (empty sections if ``path`` is None)."""
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    out = {}
    for section, keys in (("model", MODEL_KEYS), ("numerics", NUMERICS_KEYS), ("sweep", SWEEP_KEYS)):
        data = dict(cp[section]) if cp.has_section(section) else {}
        unknown = set(data) - set(keys)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        out[section] = data
    extra = set(cp.sections()) - {"model", "numerics", "sweep"}
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    return out


def merge(raw: dict, overrides: dict) -> dict:
    """Apply flag overrides (keys named as in the config) on top of the file values."""
    merged = {k: dict(v) for k, v in raw.items()}
    for key, value in overrides.items():
        if value is None:
            continue
        for section, keys in (("model", MODEL_KEYS), ("numerics", NUMERICS_KEYS), ("sweep", SWEEP_KEYS)):
            if key in keys:
                merged[section][key] = value
                break
        else:
            raise ConfigError(f"unknown option {key!r}")
    return merged


def model_from(raw: dict, base: Optional[ModelParams] = None) -> ModelParams:
    values = dict(base.to_dict()) if base is not None else {}
    values.update(raw.get("model", {}))
    return _build(ModelParams, values)


def numerics_from(raw: dict, base: Optional[NumericsParams] = None) -> NumericsParams:
    values = dict(base.to_dict()) if base is not None else {}
    values.update(raw.get("numerics", {}))
    return _build(NumericsParams, values)


def sweep_from(raw: dict, base: Optional[SweepSpec] = None) -> SweepSpec:
    sw = raw.get("sweep", {})
    model = model_from(raw, base.base if base else None)
    numerics = numerics_from(raw, base.numerics if base else None)
    try:
        axes = tuple(Axis.parse(sw[k]) if isinstance(sw[k], str) else sw[k] for k in ("axis1", "axis2") if sw.get(k))
        if not axes and base is not None:
            axes = base.axes
        workers = sw.get("workers")
        return SweepSpec(
            base=model,
            numerics=numerics,
            axes=axes,
            output=sw.get("output") or (base.output if base else None),
            json_output=sw.get("json") or (base.json_output if base else None),
            workers=int(workers) if workers not in (None, "") else (base.workers if base else None),
            name=sw.get("name") or (base.name if base else "sweep"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def spec_to_ini(spec: SweepSpec) -> str:
    """Serialize a sweep specification back to the config format."""
    cp = configparser.ConfigParser(interpolation=None)
    cp["model"] = {k: str(v) for k, v in spec.base.to_dict().items() if v is not None}
    cp["numerics"] = {k: str(v) for k, v in spec.numerics.to_dict().items() if v is not None}
    sw = {f"axis{i + 1}": a.describe() for i, a in enumerate(spec.axes)}
    sw["name"] = spec.name
    if spec.output:
        sw["output"] = spec.output
    if spec.json_output:
        sw["json"] = spec.json_output
    if spec.workers:
        sw["workers"] = str(spec.workers)
    cp["sweep"] = sw
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
