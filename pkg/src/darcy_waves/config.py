"""Run configuration: TOML document -> validated :class:`RunConfig`."""
from __future__ import annotations

import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dtn import DEFAULT_NZ
from .spectral import Finite, FluidParams, GridFunction, Infinite

__all__ = ["MODES", "PRESETS", "ConfigError", "RunConfig", "load_config", "parse_config", "forcing_profile"]

log = logging.getLogger(__name__)

MODES = ("small-wave", "sweep-sigma", "continue", "evolve", "verify")
PRESETS = ("cos", "sin", "two-mode")
SCHEMES = ("if-euler", "if-rk2")
INITIAL = ("zero", "small-wave", "profile")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violation found."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


# section -> {key: default}
_SCHEMA: Dict[str, Dict[str, Any]] = {
    "fluid": {"sigma": 1.0, "gravity": 1.0, "speed": 1.0, "depth": "infinite", "truncation": 10.0},
    "forcing": {"profile": "cos", "coefficients": None, "kappa": 0.01},
    "grid": {"n": 128, "nz": DEFAULT_NZ},
    "solver": {"tol": 1e-12, "max_iter": 200, "accept_tol": 1e-8},
    "continuation": {"initial_step": 0.05, "max_step": 0.25, "min_step": 1e-10, "direction": 1,
                     "c1_max": 10.0, "clearance_fraction": 0.05, "kappa_max": 100.0, "max_points": 400,
                     "max_n": 512},
    "sweep": {"sigmas": [0.1, 0.01, 0.001]},
    "evolve": {"dt": 1e-3, "T": 1.0, "scheme": "if-euler", "sample_every": 100, "initial": "small-wave",
               "amplitude": 0.0, "noise": 0.0},
    "output": {"dir": "out", "render": True},
}


@dataclass
class RunConfig:
    mode: str
    params: FluidParams
    profile: str = "cos"
    coefficients: Optional[List[Tuple[int, float, float]]] = None
    kappa: float = 0.01
    n: int = 128
    nz: int = DEFAULT_NZ
    tol: float = 1e-12
    max_iter: int = 200
    accept_tol: float = 1e-8
    continuation: Dict[str, Any] = field(default_factory=lambda: dict(_SCHEMA["continuation"]))
    sigmas: List[float] = field(default_factory=lambda: list(_SCHEMA["sweep"]["sigmas"]))
    evolve: Dict[str, Any] = field(default_factory=lambda: dict(_SCHEMA["evolve"]))
    out_dir: str = "out"
    render: bool = True
    seed: Optional[int] = None
    source: Dict[str, Any] = field(default_factory=dict)
    notices: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        depth = self.params.depth
        d["params"] = {"sigma": self.params.sigma, "gravity": self.params.gravity, "speed": self.params.speed,
                       "depth": {"kind": "finite", "b": depth.b} if isinstance(depth, Finite)
                       else {"kind": "infinite", "L": depth.L}}
        return d


def forcing_profile(cfg: RunConfig, n: Optional[int] = None) -> GridFunction:
    """Sample the forcing profile on N points, projected to mean zero."""
    n = n or cfg.n
    x = 2 * np.pi * np.arange(n) / n
    if cfg.coefficients is not None:
        vals = np.zeros(n)
        for k, a, b in cfg.coefficients:
            vals += a * np.cos(k * x) + b * np.sin(k * x)
    elif cfg.profile == "cos":
        vals = np.cos(x)
    elif cfg.profile == "sin":
        vals = np.sin(x)
    else:
        vals = np.cos(x) + 0.5 * np.cos(2 * x)
    return GridFunction(vals - vals.mean(), mean_zero=True)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def parse_config(doc: Dict[str, Any], mode: Optional[str] = None) -> RunConfig:
    problems: List[str] = []
    notices: List[str] = []
    doc = dict(doc)
    file_mode = doc.pop("mode", None)
    mode = mode or file_mode
    if mode not in MODES:
        problems.append(f"mode must be one of {', '.join(MODES)} (got {mode!r})")
    elif file_mode is not None and file_mode != mode:
        notices.append(f"command-line mode {mode!r} overrides config mode {file_mode!r}")

    vals: Dict[str, Dict[str, Any]] = {}
    for sec, body in doc.items():
        if sec not in _SCHEMA:
            problems.append(f"unknown section or key '{sec}'")
            continue
        if not isinstance(body, dict):
            problems.append(f"'{sec}' must be a table")
            continue
        for key in body:
            if key not in _SCHEMA[sec]:
                problems.append(f"unknown key '{sec}.{key}'")
    for sec, defaults in _SCHEMA.items():
        body = doc.get(sec, {}) if isinstance(doc.get(sec, {}), dict) else {}
        vals[sec] = {k: body.get(k, v) for k, v in defaults.items()}

    def num(sec, key, lo=None, hi=None, strict_lo=False, integer=False):
        v = vals[sec][key]
        ok = _is_int(v) if integer else _is_num(v)
        if not ok:
            problems.append(f"{sec}.{key} must be {'an integer' if integer else 'a finite number'} (got {v!r})")
            return None
        if lo is not None and (v <= lo if strict_lo else v < lo):
            problems.append(f"{sec}.{key} must be {'>' if strict_lo else '>='} {lo} (got {v})")
        if hi is not None and v > hi:
            problems.append(f"{sec}.{key} must be <= {hi} (got {v})")
        return v

    fl = vals["fluid"]
    sigma = num("fluid", "sigma", 0)
    gravity = num("fluid", "gravity", 0)
    speed = num("fluid", "speed")
    if speed == 0:
        problems.append("speed must be nonzero")
    if sigma is not None and gravity is not None and sigma + gravity <= 0:
        problems.append("sigma + gravity must be positive")
    truncation = num("fluid", "truncation", 0, strict_lo=True)
    depth = None
    if fl["depth"] == "infinite":
        if truncation:
            depth = Infinite(float(truncation))
    elif _is_num(fl["depth"]) and fl["depth"] > 0:
        depth = Finite(float(fl["depth"]))
    else:
        problems.append(f"fluid.depth must be \"infinite\" or a positive number (got {fl['depth']!r})")

    fo = vals["forcing"]
    coeffs = None
    if fo["coefficients"] is not None:
        c = fo["coefficients"]
        if (not isinstance(c, list) or not c
                or not all(isinstance(r, list) and len(r) == 3 and _is_int(r[0]) and r[0] >= 0
                           and _is_num(r[1]) and _is_num(r[2]) for r in c)):
            problems.append("forcing.coefficients must be a non-empty list of [k, a_cos, a_sin] with integer k >= 0")
        else:
            coeffs = [(int(r[0]), float(r[1]), float(r[2])) for r in c]
            if any(k == 0 and a != 0 for k, a, _ in coeffs):
                notices.append("forcing profile has nonzero mean; projected to mean zero")
            if all(k == 0 or (a == 0 and b == 0) for k, a, b in coeffs):
                problems.append("forcing profile is zero after removing its mean")
    elif fo["profile"] not in PRESETS:
        problems.append(f"forcing.profile must be one of {', '.join(PRESETS)} (got {fo['profile']!r})")
    kappa = num("forcing", "kappa")

    n = num("grid", "n", 8, integer=True)
    if n and n & (n - 1):
        problems.append(f"grid.n must be a power of two (got {n})")
    nz = num("grid", "nz", 8, 512, integer=True)
    if coeffs and n and max(k for k, _, _ in coeffs) >= n // 2:
        problems.append("forcing.coefficients contain wavenumbers not resolved by grid.n")

    tol = num("solver", "tol", 0, strict_lo=True)
    max_iter = num("solver", "max_iter", 1, integer=True)
    accept_tol = num("solver", "accept_tol", 0, strict_lo=True)

    co = vals["continuation"]
    for key in ("initial_step", "max_step", "min_step", "c1_max", "kappa_max"):
        num("continuation", key, 0, strict_lo=True)
    num("continuation", "clearance_fraction", 0, 1)
    num("continuation", "max_points", 1, integer=True)
    num("continuation", "max_n", 8, integer=True)
    if co["direction"] not in (1, -1):
        problems.append("continuation.direction must be 1 or -1")
    if all(_is_num(co[k]) for k in ("initial_step", "max_step", "min_step")) and not (
            co["min_step"] <= co["initial_step"] <= co["max_step"]):
        problems.append("need continuation.min_step <= initial_step <= max_step")

    sig = vals["sweep"]["sigmas"]
    if not isinstance(sig, list) or not sig or not all(_is_num(s) and s > 0 for s in sig):
        problems.append("sweep.sigmas must be a non-empty list of positive numbers")
    elif any(b >= a for a, b in zip(sig, sig[1:])):
        problems.append("sweep.sigmas must be strictly decreasing")

    ev = vals["evolve"]
    dt = num("evolve", "dt", 0, strict_lo=True)
    T = num("evolve", "T", 0, strict_lo=True)
    if dt and T and T < dt:
        problems.append("evolve.T must be >= evolve.dt")
    if ev["scheme"] not in SCHEMES:
        problems.append(f"evolve.scheme must be one of {', '.join(SCHEMES)}")
    if ev["initial"] not in INITIAL:
        problems.append(f"evolve.initial must be one of {', '.join(INITIAL)}")
    num("evolve", "sample_every", 1, integer=True)
    num("evolve", "amplitude")
    num("evolve", "noise", 0)

    out = vals["output"]
    if not isinstance(out["dir"], str) or not out["dir"]:
        problems.append("output.dir must be a non-empty string")
    if not isinstance(out["render"], bool):
        problems.append("output.render must be true or false")

    params = None
    if depth is not None and sigma is not None and gravity is not None and speed:
        try:
            params = FluidParams(float(sigma), float(gravity), float(speed), depth)
        except ValueError as exc:
            if str(exc) not in problems:
                problems.append(str(exc))
    if problems:
        raise ConfigError(problems)
    for note in notices:
        log.info(note)
    return RunConfig(mode=mode, params=params, profile=fo["profile"], coefficients=coeffs, kappa=float(kappa),
                     n=n, nz=nz, tol=float(tol), max_iter=max_iter, accept_tol=float(accept_tol),
                     continuation=dict(co), sigmas=[float(s) for s in sig], evolve=dict(ev), out_dir=out["dir"],
                     render=out["render"], source=doc, notices=notices)


def load_config(path, mode: Optional[str] = None) -> RunConfig:
    """Read and validate a TOML run configuration.

    Syntax errors raise :class:`ConfigError` carrying the line and column.
    """
    text = Path(path).read_text()
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from exc
    return parse_config(doc, mode)
