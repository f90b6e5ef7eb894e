"""Flat key=value run configuration files.

One option per line, `key = value`, with `#` starting a comment anywhere on
the line. Keys are dotted lowercase names; the prefix routes the option to
one consumer:

    policy.*  training hyperparameters (epochs, batch_size, lr, k,
              inference_steps, eta, embed_dim, schedule_kind, ...)
    loop.*    control-loop parameters (gain, linear_cap, angular_cap, dt,
              density, point_budget)
    task.*    task overrides (position_jitter, yaw_jitter, max_ticks, ...)
    study.*   study-runner options (trials, modes, persona)

Unprefixed keys (task, seed, frames, out, ...) mirror the CLI flags of the
subcommand they are given to; explicit CLI flags always win over the file.
A config digest (sha256 over the canonicalized lines) identifies a resolved
configuration in output artifacts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import re
from typing import Dict

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*(\.[a-z][a-z0-9_]*)*$")


class ConfigError(ValueError):
    """A config file that cannot be parsed or applied."""


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse `key = value` lines into a flat string map.

    Blank lines and `#` comments are dropped; duplicate keys are an error
    (they are always a typo in a flat file).
    """
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> Dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def config_digest(conf: Dict[str, str]) -> str:
    """Order-independent identity of a parsed configuration."""
    canon = "\n".join(f"{k}={conf[k]}" for k in sorted(conf))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _convert(value: str, ftype, key: str):
    if ftype is int:
        return int(value)
    if ftype is float:
        return float(value)
    if ftype is bool:
        low = value.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if ftype is str:
        return value
    raise ConfigError(f"{key}: option is not a scalar and cannot be set from a file")


def typed_overrides(conf: Dict[str, str], prefix: str, dataclass_type) -> Dict[str, object]:
    """Extract `prefix.*` keys as typed constructor overrides.

    Types come from the dataclass field annotations; only scalar fields
    (int, float, bool, str) are settable. Unknown names are an error.
    """
    fields = {f.name: f.type for f in dataclasses.fields(dataclass_type)}
    out: Dict[str, object] = {}
    want = prefix + "."
    for key, value in conf.items():
        if not key.startswith(want):
            continue
        name = key[len(want):]
        if name not in fields:
            raise ConfigError(
                f"{key}: {dataclass_type.__name__} has no option {name!r}")
        ftype = fields[name]
        if isinstance(ftype, str):
            ftype = {"int": int, "float": float, "bool": bool, "str": str}.get(ftype, ftype)
        out[name] = _convert(value, ftype, key)
    return out
