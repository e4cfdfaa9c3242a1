"""Scenario configuration: a flat TOML key set with sectioned tables.

No expressions are evaluated.  Fields such as the source f, exterior data g
and the killing rate are chosen by name from small registries.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import operator as opm
from .geometry import domain_from_dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit status 2."""


VERIFY_CHECKS = ("weak-max", "strong-max", "bony", "hopf", "qhl-ia", "qhl-ib", "qhl-iia", "qhl-iib",
                 "delta-bound", "weak-harnack", "harnack-ratio", "mc-vs-grid")
TASKS = ("operator-check", "simulate", "eigen", "gauge", "barrier", "suite", "report") + \
    tuple("verify-" + c for c in VERIFY_CHECKS)

# section -> key -> (type, description)
SCHEMA: dict = {
    "": {
        "task": (str, "one of " + ", ".join(TASKS)),
        "output": (str, "output directory (overrides HOPFLAB_OUTPUT)"),
        "name": (str, "scenario label used in reports"),
    },
    "operator": {
        "preset": (str, "operator preset: " + ", ".join(opm.PRESETS)),
        "dim": (int, "space dimension (1..3); ignored by the 2D-only anisotropic preset"),
        "size": (float, "two-point-jump: jump length"),
        "mass": (float, "two-point-jump: jump mass"),
        "sigma": (float, "truncated-stable: index in (0, 2)"),
        "scale": (float, "truncated-stable: density prefactor"),
        "R": (float, "truncated-stable: outer truncation radius"),
        "eps": (float, "truncated-stable: small-jump cutoff"),
        "drift": (list, "drifted: constant drift vector"),
    },
    "domain": {
        "variant": (str, "ball, box, annulus or implicit"),
        "center": (list, "ball/annulus centre"),
        "radius": (float, "ball radius"),
        "lo": (list, "box lower corner"),
        "hi": (list, "box upper corner"),
        "r_in": (float, "annulus inner radius"),
        "r_out": (float, "annulus outer radius"),
        "name": (str, "implicit shape: twin-cusp, notched-disk, inward-cusp"),
        "offset": (float, "implicit level-set offset"),
    },
    "killing": {
        "kind": (str, "constant, bump or indicator"),
        "value": (float, "killing level (>= 0)"),
        "radius": (float, "support radius for bump/indicator, centred at the origin"),
    },
    "problem": {
        "f": (str, "source field name: " + "zero, one, bump"),
        "g": (str, "exterior data field name: zero, one, square, ramp"),
        "x0": (list, "starting point / evaluation point"),
        "t_grid": (list, "survival times"),
    },
    "grid": {
        "h": (float, "lattice spacing"),
        "quad_level": (int, "jump quadrature level (0 or 1)"),
    },
    "mc": {
        "dt": (float, "time step"),
        "n_paths": (int, "number of paths"),
        "seed": (int, "64-bit seed"),
        "antithetic": (bool, "antithetic Gaussian pairs"),
        "t_max": (float, "horizon; default 50 diam^2 / lambda"),
    },
    "verify": {
        "seeds": (list, "[first, last] seed range, inclusive"),
        "inner_margin": (float, "V = D_margin for the weak Harnack check"),
    },
    "barrier": {
        "k_target": (float, "target lower bound K"),
        "ybar": (list, "barrier centre"),
    },
    "suite": {
        "preset": (str, "suite preset: paper-core or smoke"),
    },
}

DEFAULTS = {
    "task": "eigen",
    "name": "scenario",
    "operator": {"preset": "laplacian", "dim": 1},
    "domain": {"variant": "box", "lo": [-1.0], "hi": [1.0]},
    "killing": {"kind": "constant", "value": 0.0, "radius": 0.5},
    "problem": {"f": "zero", "g": "zero", "t_grid": [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]},
    "grid": {"h": 0.01, "quad_level": 0},
    "mc": {"dt": 1e-3, "n_paths": 10000, "seed": 0, "antithetic": False},
    "verify": {"seeds": [0, 19], "inner_margin": 0.25},
    "barrier": {"k_target": 1.0},
    "suite": {"preset": "smoke"},
}


def _bump(x):
    return np.maximum(0.0, 1.0 - np.sum(x ** 2, axis=1))


SOURCE_FIELDS: dict = {
    "zero": lambda x: np.zeros(x.shape[0]),
    "one": lambda x: np.ones(x.shape[0]),
    "bump": _bump,
}
EXTERIOR_FIELDS: dict = {
    "zero": lambda x: np.zeros(x.shape[0]),
    "one": lambda x: np.ones(x.shape[0]),
    "square": lambda x: np.sum(x ** 2, axis=1),
    "ramp": lambda x: (x[:, 0] > 0).astype(float),
}


def _check_type(section, key, value, typ):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is bool and isinstance(value, bool):
        return value
    if typ is str and isinstance(value, str):
        return value
    if typ is list and isinstance(value, list):
        return value
    where = f"{section}.{key}" if section else key
    raise ConfigError(f"{where}: expected {typ.__name__}, got {value!r}")


def _merge(base: dict, extra: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for k, v in extra.items():
        if isinstance(v, dict):
            out.setdefault(k, {})
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def validate(raw: dict) -> dict:
    """Check keys and types against SCHEMA; returns the merged, typed mapping."""
    clean: dict = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]; valid sections: "
                                  + ", ".join(s for s in SCHEMA if s))
            spec = SCHEMA[key]
            sub = {}
            for k, v in value.items():
                if k not in spec:
                    raise ConfigError(f"unknown key {key}.{k}; valid keys: " + ", ".join(spec))
                sub[k] = _check_type(key, k, v, spec[k][0])
            clean[key] = sub
        else:
            if key not in SCHEMA[""]:
                raise ConfigError(f"unknown key {key!r}; valid top-level keys: " + ", ".join(SCHEMA[""]))
            clean[key] = _check_type("", key, value, SCHEMA[""][key][0])
    merged = _merge(DEFAULTS, clean)
    _check_ranges(merged)
    return merged


def _check_ranges(c: dict) -> None:
    if c["task"] not in TASKS:
        raise ConfigError(f"unknown task {c['task']!r}; valid tasks: " + ", ".join(TASKS))
    if c["operator"]["preset"] not in opm.PRESETS:
        raise ConfigError(f"unknown operator preset {c['operator']['preset']!r}; "
                          "valid: " + ", ".join(opm.PRESETS))
    if not 1 <= c["operator"].get("dim", 1) <= 3:
        raise ConfigError("operator.dim must be 1, 2 or 3")
    if c["grid"]["h"] <= 0:
        raise ConfigError("grid.h must be positive")
    if c["grid"]["quad_level"] not in (0, 1):
        raise ConfigError("grid.quad_level must be 0 or 1")
    mc = c["mc"]
    if mc["dt"] <= 0 or mc["n_paths"] < 1 or mc.get("t_max", 1.0) <= 0:
        raise ConfigError("mc: need dt > 0, n_paths >= 1 and t_max > 0")
    if not 0 <= mc["seed"] < 2 ** 64:
        raise ConfigError("mc.seed must fit in 64 bits")
    k = c["killing"]
    if k["kind"] not in ("constant", "bump", "indicator"):
        raise ConfigError("killing.kind must be constant, bump or indicator")
    if k["value"] < 0 or k["radius"] <= 0:
        raise ConfigError("killing.value must be >= 0 and killing.radius > 0")
    p = c["problem"]
    if p["f"] not in SOURCE_FIELDS:
        raise ConfigError(f"problem.f must be one of {', '.join(SOURCE_FIELDS)}")
    if p["g"] not in EXTERIOR_FIELDS:
        raise ConfigError(f"problem.g must be one of {', '.join(EXTERIOR_FIELDS)}")
    seeds = c["verify"]["seeds"]
    if len(seeds) != 2 or seeds[0] > seeds[1] or seeds[0] < 0:
        raise ConfigError("verify.seeds must be [first, last] with 0 <= first <= last")
    if c["suite"]["preset"] not in ("paper-core", "smoke"):
        raise ConfigError("suite.preset must be paper-core or smoke")
    try:
        dom = domain_from_dict(c["domain"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"domain: missing or malformed field {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from exc
    dim = 2 if c["operator"]["preset"] == "anisotropic" else c["operator"].get("dim", 1)
    if dom.dim != dim:
        raise ConfigError(f"domain dimension {dom.dim} does not match operator dimension {dim}")
    if dom.is_empty:
        raise ConfigError("domain is empty")


def parse_override(item: str):
    """'section.key=value' with the value read as a TOML literal (bare words are strings)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, text = item.split("=", 1)
    try:
        value = tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        value = text
    return key.strip().split("."), value


def load(path=None, overrides=()) -> "ScenarioConfig":
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    for item in overrides:
        keys, value = parse_override(item)
        if len(keys) == 1:
            raw[keys[0]] = value
        elif len(keys) == 2:
            raw.setdefault(keys[0], {})
            if not isinstance(raw[keys[0]], dict):
                raise ConfigError(f"{keys[0]} is not a section")
            raw[keys[0]][keys[1]] = value
        else:
            raise ConfigError(f"override key {'.'.join(keys)} is nested too deeply")
    return ScenarioConfig(validate(raw))


@dataclass
class ScenarioConfig:
    data: dict = field(default_factory=dict)

    def __getitem__(self, key) -> Any:
        return self.data[key]

    @property
    def task(self) -> str:
        return self.data["task"]

    def domain(self):
        return domain_from_dict(self.data["domain"])

    def killing(self):
        """(c, c_norm, c_low) ready for OperatorSpec.with_c."""
        k = self.data["killing"]
        v, rad = k["value"], k["radius"]
        if k["kind"] == "constant":
            return v, v, v
        if k["kind"] == "bump":
            return (lambda x: v * np.maximum(0.0, 1.0 - np.sum(x ** 2, axis=1) / rad ** 2)), v, 0.0
        return (lambda x: v * (np.sum(x ** 2, axis=1) < rad ** 2).astype(float)), v, 0.0

    def operator(self) -> opm.OperatorSpec:
        o = dict(self.data["operator"])
        preset = o.pop("preset")
        d = o.pop("dim", 1)
        if preset == "anisotropic":
            op = opm.anisotropic()
        elif preset == "drifted":
            op = opm.drifted(d, drift=o.get("drift"))
        else:
            extra = {k: v for k, v in o.items() if k != "drift"}
            try:
                op = opm.PRESETS[preset](d, **extra)
            except TypeError as exc:
                raise ConfigError(f"operator: {exc}") from exc
        c, c_norm, c_low = self.killing()
        return op.with_c(c, c_norm, c_low)

    def source(self) -> Callable:
        return SOURCE_FIELDS[self.data["problem"]["f"]]

    def exterior(self) -> Callable:
        return EXTERIOR_FIELDS[self.data["problem"]["g"]]

    def x0(self) -> np.ndarray:
        x0 = self.data["problem"].get("x0")
        dom = self.domain()
        return dom.anchor() if x0 is None else np.asarray(x0, dtype=float)

    def as_dict(self) -> dict:
        return self.data


def describe() -> str:
    """Human-readable key listing used by the CLI's error messages and docs."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]" if section else "(top level)")
        for k, (typ, desc) in keys.items():
            lines.append(f"  {k} ({typ.__name__}): {desc}")
    return "\n".join(lines)
