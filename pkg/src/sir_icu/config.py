"""Flat ``key = value`` scenario files."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Optional

from .dynamics import REFERENCE_X0, EpidemicParams, EpidemicState, SolverConfig, reference_params
from .errors import ParseError
from .experiments import ScenarioSpec

FLOAT_KEYS = ("beta", "gamma", "v_max", "i_max", "lambda_v", "lambda_i", "s0", "i0", "T", "dt")
KEYS = FLOAT_KEYS + ("method",)


def defaults() -> dict:
    p = reference_params()
    return {
        "beta": p.beta,
        "gamma": p.gamma,
        "v_max": p.v_max,
        "i_max": p.i_max,
        "lambda_v": p.lambda_v,
        "lambda_i": p.lambda_i,
        "s0": REFERENCE_X0.s,
        "i0": REFERENCE_X0.i,
        "T": p.horizon_T,
        "dt": None,
        "method": "rk4",
    }


def _coerce(key: str, raw: str, line: Optional[int]):
    if key not in KEYS:
        raise ParseError(f"unknown key {key!r}", line)
    if key == "method":
        return raw
    if key == "dt" and raw.lower() in ("none", "default", ""):
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"{key} expects a number, got {raw!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{key} must be finite, got {raw!r}", line)
    return value


def parse_text(text: str) -> dict:
    """Key/value map of a config text, defaults not applied."""
    values: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        values[key] = _coerce(key, raw, lineno)
    return values


def apply_overrides(values: dict, overrides: Mapping[str, str]) -> dict:
    out = dict(values)
    for key, raw in overrides.items():
        out[key.strip()] = _coerce(key.strip(), str(raw).strip(), None)
    return out


def build(values: Mapping, name: str = "scenario"):
    """``(EpidemicParams, EpidemicState, SolverConfig, ScenarioSpec)`` from a key/value map."""
    v = {**defaults(), **values}
    params = EpidemicParams(
        beta=v["beta"],
        gamma=v["gamma"],
        v_max=v["v_max"],
        i_max=v["i_max"],
        lambda_v=v["lambda_v"],
        lambda_i=v["lambda_i"],
        horizon_T=v["T"],
    )
    x0 = EpidemicState(v["s0"], v["i0"])
    cfg = SolverConfig(method=v["method"], dt=v["dt"])
    spec = ScenarioSpec.from_params(name or "scenario", params, x0)
    return params, x0, cfg, spec


def parse_config(path, overrides: Optional[Mapping[str, str]] = None):
    """Read a scenario file; missing keys fall back to the reference scenario."""
    path = Path(path)
    values = parse_text(path.read_text(encoding="utf-8"))
    if overrides:
        values = apply_overrides(values, overrides)
    return build(values, path.stem)


def format_config(params: EpidemicParams, x0: EpidemicState, cfg: SolverConfig) -> str:
    """Canonical text; ``repr`` of a float parses back to the same double."""
    items = [
        ("beta", params.beta),
        ("gamma", params.gamma),
        ("v_max", params.v_max),
        ("i_max", params.i_max),
        ("lambda_v", params.lambda_v),
        ("lambda_i", params.lambda_i),
        ("s0", x0.s),
        ("i0", x0.i),
        ("T", params.horizon_T),
    ]
    lines = [f"{k} = {float(val)!r}" for k, val in items]
    if cfg.dt is not None:
        lines.append(f"dt = {float(cfg.dt)!r}")
    lines.append(f"method = {cfg.method}")
    return "\n".join(lines) + "\n"


def write_config(path, params: EpidemicParams, x0: EpidemicState, cfg: SolverConfig = SolverConfig()) -> Path:
    path = Path(path)
    path.write_text(format_config(params, x0, cfg), encoding="utf-8", newline="\n")
    return path

