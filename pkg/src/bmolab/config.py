"""Experiment configuration: a typed, flat key-value TOML document.

Keys are `block.name`. Unknown keys, wrong types and missing required keys
raise ConfigError naming the offending field. The resolved configuration
(defaults filled in) hashes to a short digest carried by every report row.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import MEMBERS

SCHEMA_VERSION = 1
TASKS = ("norms", "weights", "jn", "carleson", "equiv", "kernel-check", "norm", "bmo")
REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; the message names the field."""


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | bool | list[float] | list[str] | float?
    default: object
    choices: tuple = ()
    doc: str = ""


SCHEMA: dict[str, Key] = {
    "version": Key("int", REQUIRED, (SCHEMA_VERSION,), "schema version"),
    "grid.dim": Key("int", 1, (1, 2), "spatial dimension"),
    "grid.L": Key("float", 1.0, (), "torus side length"),
    "grid.N": Key("int", REQUIRED, (), "points per side (power of two)"),
    "growth.family": Key("str", "power", ("power", "weighted_power", "log_type", "ky_log"),
                         "growth family"),
    "growth.p": Key("float", 1.0, (), "t exponent (power, weighted_power, log_type s, ky_log p)"),
    "growth.weight_exponent": Key("float", 0.5, (), "a in the weight |x - anchor|^a"),
    "growth.ap_exponent": Key("float", 2.0, (), "declared A_p exponent of the weight"),
    "growth.rh_exponent": Key("float", 2.0, (), "declared reverse Holder exponent of the weight"),
    "growth.beta": Key("float", 0.0, (), "log_type spatial log exponent"),
    "growth.gamma": Key("float", 0.0, (), "log_type temporal log exponent"),
    "growth.anchor": Key("list[float]", [], (), "anchor point (defaults to the origin)"),
    "growth.lower_type": Key("float?", None, (), "declared lower type (ky_log)"),
    "growth.scale": Key("float", 1.0, (), "overall constant c"),
    "kernel.kind": Key("str", "poisson", ("poisson", "heat", "box"), "kernel family"),
    "kernel.m": Key("float", 1.0, (), "box kernel time exponent (poisson 1, heat 2)"),
    "kernel.backend": Key("str", "spectral", ("spectral", "direct"), "convolution backend"),
    "menu.stride": Key("int", 0, (), "center stride in points (0: N/64)"),
    "menu.levels": Key("int", 5, (), "dyadic radii from L/8 when menu.radii is empty"),
    "menu.radii": Key("list[float]", [], (), "explicit radii ladder"),
    "corpus.members": Key("list[str]", list(MEMBERS), MEMBERS, "corpus members"),
    "corpus.seed": Key("int", 0, (), "random_fourier seed"),
    "corpus.function_file": Key("str", "", (), "extra GridFunction file (member 'file')"),
    "task.p_tilde": Key("float", 2.0, (), "exponent of the p-variant seminorms"),
    "task.ap_exponents": Key("list[float]", [1.5, 2.0, 3.0], (), "A_p sweep"),
    "task.rh_exponents": Key("list[float]", [1.5, 2.0, 4.0], (), "reverse Holder sweep"),
    "task.lambda_points": Key("int", 80, (), "lambda grid size for distributions"),
    "task.jn_balls": Key("int", 8, (), "number of balls for distribution fits"),
    "task.jn_radius": Key("float", 0.0, (), "distribution ball radius (0: L/8)"),
    "task.p1": Key("float", 2.0, (), "p1 of the polynomial tail bound"),
    "task.exp_cap": Key("float", 10.0, (), "cap for the exponential-integrability sweep"),
    "task.t_points": Key("int", 48, (), "scales in the square-function grid"),
    "task.t": Key("float", 0.0, (), "kernel-check time t (0: (L/16)^m)"),
    "task.s": Key("float", 0.0, (), "kernel-check time s (0: (L/32)^m)"),
    "task.tolerance": Key("float", 1e-6, (), "kernel-check pass tolerance"),
    "task.norm_tol": Key("float", 1e-6, (), "Luxembourg bisection tolerance"),
    "output.directory": Key("str", "bmolab-out", (), "output directory"),
    "output.formats": Key("list[str]", ["csv", "json", "dat"], ("csv", "json", "dat"),
                          "files to write"),
}


def _coerce(name: str, key: Key, value):
    def fail(what):
        raise ConfigError(f"{name}: expected {what}, got {value!r}")

    k = key.kind
    if k == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
    elif k in ("float", "float?"):
        if value is None and k == "float?":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        value = float(value)
    elif k == "str":
        if not isinstance(value, str):
            fail("a string")
    elif k == "bool":
        if not isinstance(value, bool):
            fail("a boolean")
    elif k == "list[float]":
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float))
                                              for v in value):
            fail("a list of numbers")
        value = [float(v) for v in value]
    elif k == "list[str]":
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            fail("a list of strings")
    if key.choices:
        items = value if isinstance(value, list) else [value]
        bad = [v for v in items if v not in key.choices]
        if bad:
            raise ConfigError(f"{name}: {bad[0]!r} is not one of {list(key.choices)}")
    return value


def _flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in doc.items():
        name = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, name + "."))
        else:
            out[name] = v
    return out


def parse_override(text: str) -> tuple[str, object]:
    """`block.key=value` with a TOML value; bare words are read as strings."""
    if "=" not in text:
        raise ConfigError(f"override {text!r}: expected key=value")
    name, raw = text.split("=", 1)
    name = name.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return name, value


def resolve(flat: dict) -> dict:
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    out = {}
    for name, key in SCHEMA.items():
        if name in flat:
            out[name] = _coerce(name, key, flat[name])
        elif key.default is REQUIRED:
            raise ConfigError(f"{name}: missing required field")
        else:
            out[name] = key.default
    _check(out)
    return out


def _check(c: dict) -> None:
    n = c["grid.N"]
    if n < 16 or n & (n - 1):
        raise ConfigError("grid.N: must be a power of two >= 16")
    if not c["grid.L"] > 0:
        raise ConfigError("grid.L: must be positive")
    if c["menu.stride"] < 0:
        raise ConfigError("menu.stride: must be >= 0")
    if c["menu.levels"] < 1:
        raise ConfigError("menu.levels: must be >= 1")
    if c["kernel.kind"] == "poisson" and c["kernel.m"] != 1.0:
        raise ConfigError("kernel.m: the Poisson kernel has m = 1")
    if c["kernel.kind"] == "heat" and c["kernel.m"] not in (1.0, 2.0):
        raise ConfigError("kernel.m: the heat kernel has m = 2")
    if c["growth.anchor"] and len(c["growth.anchor"]) != c["grid.dim"]:
        raise ConfigError("growth.anchor: length must equal grid.dim")
    if not c["corpus.members"] and not c["corpus.function_file"]:
        raise ConfigError("corpus.members: empty corpus")
    if c["task.lambda_points"] < 5 or c["task.t_points"] < 2 or c["task.jn_balls"] < 1:
        raise ConfigError("task: lambda_points >= 5, t_points >= 2 and jn_balls >= 1 required")


def load_config(path, overrides=()) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    flat = _flatten(doc)
    for text in overrides:
        name, value = parse_override(text)
        flat[name] = value
    return resolve(flat)


def config_hash(config: dict) -> str:
    """Digest of the resolved configuration, excluding the output block."""
    body = {k: v for k, v in config.items() if not k.startswith("output.")}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def key_table() -> list[tuple[str, str, str, str]]:
    """(key, type, default, description) rows for documentation."""
    rows = []
    for name, key in SCHEMA.items():
        default = "required" if key.default is REQUIRED else json.dumps(key.default)
        rows.append((name, key.kind, default, key.doc))
    return rows
