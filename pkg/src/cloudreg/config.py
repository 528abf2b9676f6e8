"""Experiment configuration: strict TOML schema, defaults, and presets.

A config is one TOML file with a top-level ``kind`` plus per-subsystem
tables. Unknown keys are rejected by name; a fully resolved copy (defaults
filled in) is written next to every run's outputs and can be re-run to
reproduce them byte for byte.
"""

from __future__ import annotations

import importlib.resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("gen-cloud", "simulate", "decompose", "compare", "stability")


class ConfigError(ValueError):
    """Configuration rejected; message names the offending key or value."""


_BOOL = "bool"
_INT = "int"
_FLOAT = "float"
_STR = "str"
_LIST = "list"

# section -> key -> (type, default); None default means required-if-used.
_SCHEMA = {
    "": {
        "kind": (_STR, None),
        "seed": (_INT, 0),
        "out": (_STR, "runs"),
        "name": (_STR, ""),
    },
    "cloud": {
        "ex": (_FLOAT, 0.0),
        "en1": (_FLOAT, 1.0),
        "en2": (_FLOAT, 1.0),
        "he": (_FLOAT, 0.0),
        "count": (_INT, 3000),
    },
    "plant": {
        "type": (_STR, "pendulum"),
        "g": (_FLOAT, 9.8),
        "m": (_FLOAT, 2.0),
        "mc": (_FLOAT, 8.0),
        "l": (_FLOAT, 0.5),
        "a": (_FLOAT, 0.1),
        "friction": (_BOOL, False),
        "cv": (_FLOAT, 0.05),
        "cd": (_FLOAT, 0.02),
        "num": (_LIST, [167.8]),
        "den": (_LIST, [1.0, 142.0, 146.0, 0.0]),
        "delay": (_FLOAT, 0.25),
    },
    "controller": {
        "type": (_STR, "cloud"),
        "engine": (_STR, "grid"),
        "shape": (_STR, "triangle"),
        "mode": (_STR, "stochastic"),
        "ke": (_FLOAT, 1.0),
        "kde": (_FLOAT, 1.0),
        "ku": (_FLOAT, 1.0),
        "j": (_INT, 2),
        "l": (_FLOAT, 1.0),
        "h": (_FLOAT, 1.0),
        "he": (_FLOAT, 0.0),
        "drops": (_INT, 3000),
        "output": (_STR, "positional"),
        "derror": (_STR, "difference"),
        "premise_skew": (_LIST, [1.0, 1.0]),
        "consequent_en": (_FLOAT, 0.0),
        "consequent_he": (_FLOAT, 0.0),
    },
    "lq": {
        "q_diag": (_LIST, [20.0, 0.1]),
        "r": (_FLOAT, 0.1),
    },
    "sim": {
        "dt": (_FLOAT, 0.005),
        "t_final": (_FLOAT, 10.0),
        "control_every": (_INT, 2),
        "x0": (_LIST, [0.0, 0.0]),
        "setpoint": (_FLOAT, 0.0),
    },
    "decompose": {
        "grid_n": (_INT, 101),
    },
}

_SECTIONS_BY_KIND = {
    "gen-cloud": ("cloud",),
    "simulate": ("plant", "controller", "lq", "sim"),
    "decompose": ("controller", "decompose"),
    "compare": ("plant", "controller", "lq", "sim"),
    "stability": (),
}


def _check_type(section: str, key: str, spec: str, value):
    path = f"{section}.{key}" if section else key
    if spec == _BOOL:
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean, got {value!r}")
        return value
    if spec == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    if spec == _FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if spec == _STR:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
        return value
    if spec == _LIST:
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list, got {value!r}")
        return value
    raise AssertionError(spec)


def resolve_config(raw: dict, source_name: str = "config") -> dict:
    """Validate a parsed config and fill every default.

    Rejects unknown sections/keys by name; the ``setpoint`` key additionally
    accepts a list of [time, value] breakpoints.
    """
    if "kind" not in raw:
        raise ConfigError("missing required key: kind")
    kind = raw["kind"]
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    allowed_sections = _SECTIONS_BY_KIND[kind]
    resolved: dict = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in allowed_sections:
                raise ConfigError(f"unknown section [{key}] for kind {kind!r}")
        elif key not in _SCHEMA[""]:
            raise ConfigError(f"unknown key: {key}")
    for key, (spec, default) in _SCHEMA[""].items():
        if key in raw:
            resolved[key] = _check_type("", key, spec, raw[key])
        elif default is not None:
            resolved[key] = default
    if not resolved.get("name"):
        resolved["name"] = source_name
    for section in allowed_sections:
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{section}] must be a table")
        schema = _SCHEMA[section]
        for key in given:
            if key not in schema:
                raise ConfigError(f"unknown key: {section}.{key}")
        out = {}
        for key, (spec, default) in schema.items():
            if key in given:
                if section == "sim" and key == "setpoint" and isinstance(given[key], list):
                    out[key] = [
                        [float(t), float(v)] for t, v in _breakpoints(given[key])
                    ]
                else:
                    out[key] = _check_type(section, key, spec, given[key])
            else:
                out[key] = default
        resolved[section] = out
    return resolved


def _breakpoints(value):
    for item in value:
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError("sim.setpoint list entries must be [time, value] pairs")
        yield item


def preset_path(name: str) -> Path:
    base = importlib.resources.files("cloudreg") / "presets"
    p = base / f"{name}.toml"
    if not p.is_file():
        available = sorted(f.name[: -len(".toml")] for f in base.iterdir() if f.name.endswith(".toml"))
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available)}")
    return Path(str(p))


def load_config(ref: str | Path) -> dict:
    """Load and resolve a config from a file path or a shipped preset name."""
    path = Path(ref)
    if not path.is_file() and not str(ref).endswith(".toml"):
        path = preset_path(str(ref))
    if not path.is_file():
        raise ConfigError(f"config file not found: {ref}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return resolve_config(raw, source_name=path.stem)


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize value {v!r}")


def dumps_toml(resolved: dict) -> str:
    """Emit a resolved config as TOML (top-level keys, then tables)."""
    lines = []
    for key, value in resolved.items():
        if not isinstance(value, dict):
            lines.append(f"{key} = {_toml_scalar(value)}")
    for key, value in resolved.items():
        if isinstance(value, dict):
            lines.append("")
            lines.append(f"[{key}]")
            for k, v in value.items():
                lines.append(f"{k} = {_toml_scalar(v)}")
    return "\n".join(lines) + "\n"
