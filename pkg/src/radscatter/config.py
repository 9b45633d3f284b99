"""Experiment configuration: a typed YAML tree with defaults and path-tagged errors.

Example::

    equation: NLS
    nonlinearity: {kind: power, p: 4, lam: -1}
    grid: {kind: gauss-bessel, r_max: 40, n: 256}
    initial: {family: gaussian, A: 1.0, mu: 1.0}
    integrator: {dt: 1.0e-3, T: 5.0}
    audits:
      scatter-check: {T_list: [1, 2]}

Unknown keys are errors, so typos never silently fall back to defaults.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .errors import ConfigInvalid

DEFAULTS = {
    "equation": "NLS",
    "nonlinearity": {"kind": "power", "p": 4.0, "kappa0": 1.0, "lam": -1},
    "grid": {"kind": "gauss-bessel", "r_max": 40.0, "n": 256},
    "initial": {
        "family": "gaussian",
        "A": 1.0,
        "mu": 1.0,
        "eps": 0.5,
        "path": None,
        "velocity": {"family": "zero", "A": 0.0, "mu": 1.0},
    },
    "ground_state": {"c": 1.0, "r_max": 26.0, "n": 256},
    "integrator": {
        "dt": 1e-3,
        "T": 5.0,
        "snapshot_stride": 100,
        "monitor_stride": 1,
        "max_sup": 1e3,
        "max_grad_sq": 1e8,
        "boundary_fraction": 0.1,
        "boundary_tol": 1e-6,
    },
    "audits": {},
    "seed": 0,
    "output_dir": None,
}

AUDIT_DEFAULTS = {
    "morawetz-identity": {"R": 3.0, "window": None},
    "virial-morawetz": {"R_list": [2.0, 4.0, 8.0, 16.0], "windows": None, "translations": 8, "width": 10.0,
                        "start": 5.0, "step": 5.0, "threshold": None},
    "weighted-decay": {"T_list": [1.0, 2.0, 4.0, 8.0], "delta": 0.05},
    "weighted-f-l1": {"T_list": [1.0, 2.0, 4.0, 8.0], "delta": 0.05},
    "window-smallness": {"eps": 1e-2, "T": 1.0, "delta": 0.05},
    "scatter-check": {"T_list": [5.0, 10.0, 20.0]},
    "gn": {"count": 100},
    "tm": {"a": [1.0, 2.0], "kappa0": 1.0, "count": 20},
    "radial-sobolev": {"mu": [0.5, 1.0, 2.0, 4.0, 8.0], "r0": 0.0},
}

MORAWETZ_AUDITS = ("morawetz-identity", "virial-morawetz", "weighted-decay", "weighted-f-l1", "window-smallness")
INEQUALITY_AUDITS = ("gn", "tm", "radial-sobolev")

_CHOICES = {
    "equation": ("NLS", "NLKG"),
    "nonlinearity.kind": ("power", "exponential"),
    "grid.kind": ("gauss-bessel", "uniform"),
    "initial.family": ("gaussian", "scaled-ground-state", "file"),
    "initial.velocity.family": ("zero", "gaussian"),
}


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigInvalid(f"{where}: unknown key")
        if isinstance(base[key], dict) and base[key] and not isinstance(val, dict):
            raise ConfigInvalid(f"{where}: expected a mapping")
        if isinstance(base[key], dict) and base[key]:
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _get(cfg: dict, path: str):
    node = cfg
    for part in path.split("."):
        node = node[part]
    return node


def set_path(cfg: dict, path: str, value) -> dict:
    """Copy of ``cfg`` with the dotted ``path`` set; the path must exist in the schema."""
    out = copy.deepcopy(cfg)
    parts = path.split(".")
    node = out
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node, dict) or part not in node:
            raise ConfigInvalid(f"{'.'.join(parts[: i + 1])}: unknown key")
        node = node[part]
    last = parts[-1]
    if not isinstance(node, dict) or (last not in node and parts[0] != "audits"):
        raise ConfigInvalid(f"{path}: unknown key")
    node[last] = value
    return resolve(out)


def _number(cfg, path, *, positive=False, minimum=None, integer=False, nonneg=False):
    val = _get(cfg, path)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigInvalid(f"{path}: expected a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigInvalid(f"{path}: expected an integer, got {val!r}")
    if positive and not val > 0:
        raise ConfigInvalid(f"{path}: must be > 0 (got {val})")
    if nonneg and val < 0:
        raise ConfigInvalid(f"{path}: must be >= 0 (got {val})")
    if minimum is not None and val < minimum:
        raise ConfigInvalid(f"{path}: must be >= {minimum} (got {val})")
    return val


def resolve(raw: dict | None) -> dict:
    """Merge ``raw`` over the defaults and validate every field."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>: expected a mapping")
    cfg = _merge(DEFAULTS, {k: v for k, v in raw.items() if k != "audits"}, "")
    audits = raw.get("audits") or {}
    if not isinstance(audits, dict):
        raise ConfigInvalid("audits: expected a mapping")
    cfg["audits"] = {}
    for name, params in audits.items():
        if name not in AUDIT_DEFAULTS:
            raise ConfigInvalid(f"audits.{name}: unknown audit")
        cfg["audits"][name] = _merge(AUDIT_DEFAULTS[name], params or {}, f"audits.{name}")

    for path, choices in _CHOICES.items():
        if _get(cfg, path) not in choices:
            raise ConfigInvalid(f"{path}: must be one of {list(choices)} (got {_get(cfg, path)!r})")
    nl = cfg["nonlinearity"]
    if nl["lam"] not in (1, -1):
        raise ConfigInvalid(f"nonlinearity.lam: must be +1 or -1 (got {nl['lam']!r})")
    if nl["kind"] == "power":
        p = _number(cfg, "nonlinearity.p")
        if not p > 2:
            raise ConfigInvalid(f"nonlinearity.p: must satisfy p > 2 (got {p})")
    else:
        _number(cfg, "nonlinearity.kappa0", positive=True)
    _number(cfg, "grid.r_max", positive=True)
    _number(cfg, "grid.n", integer=True, minimum=16)
    _number(cfg, "ground_state.c", positive=True)
    _number(cfg, "ground_state.r_max", positive=True)
    _number(cfg, "ground_state.n", integer=True, minimum=16)
    ini = cfg["initial"]
    if ini["family"] == "gaussian":
        _number(cfg, "initial.A")
        _number(cfg, "initial.mu", positive=True)
    elif ini["family"] == "scaled-ground-state":
        _number(cfg, "initial.eps")
    elif not ini["path"]:
        raise ConfigInvalid("initial.path: required for the file family")
    if ini["velocity"]["family"] == "gaussian":
        _number(cfg, "initial.velocity.A")
        _number(cfg, "initial.velocity.mu", positive=True)
    for key in ("dt", "T", "max_sup", "max_grad_sq", "boundary_tol"):
        _number(cfg, f"integrator.{key}", positive=True)
    for key in ("snapshot_stride", "monitor_stride"):
        _number(cfg, f"integrator.{key}", integer=True, minimum=1)
    frac = _number(cfg, "integrator.boundary_fraction", positive=True)
    if frac >= 1:
        raise ConfigInvalid("integrator.boundary_fraction: must be < 1")
    if cfg["integrator"]["monitor_stride"] > cfg["integrator"]["snapshot_stride"]:
        raise ConfigInvalid("integrator.monitor_stride: must not exceed integrator.snapshot_stride")
    _number(cfg, "seed", integer=True, nonneg=True)
    for name, params in cfg["audits"].items():
        for key in ("delta", "eps", "R", "kappa0"):
            if key in params:
                _number(cfg, f"audits.{name}.{key}", positive=True)
        for key in ("T_list", "R_list", "a", "mu"):
            if key in params:
                vals = params[key]
                if not isinstance(vals, list) or not all(isinstance(v, (int, float)) and v > 0 for v in vals):
                    raise ConfigInvalid(f"audits.{name}.{key}: expected a list of positive numbers")
        if "a" in params and any(v < 1 for v in params["a"]):
            raise ConfigInvalid(f"audits.{name}.a: every exponent must be >= 1")
    return cfg


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return resolve({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"<file>: cannot read {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"<file>: not valid YAML: {exc}") from exc
    return resolve(raw)


def run_id(cfg: dict, command: str) -> str:
    """Content hash of the resolved config and the command."""
    body = {k: v for k, v in cfg.items() if k != "output_dir"}
    blob = json.dumps({"command": command, "config": body}, sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:12]
