"""JSON landscape configuration files.

A config names the manifold, the function, the metric, the density and
optional tolerances, for example::

    {
      "manifold": {"kind": "torus", "periods": ["2*pi", "2*pi"]},
      "dimension": 2,
      "F": "cos(x1) + 0.5*cos(x2) + 0.3*cos(x1 - x2)",
      "metric": "identity",
      "density": "riemannian",
      "tolerances": {"capture_radius": 1e-3}
    }

``"F": "builtin:<name>"`` takes both the function and (unless given) the
manifold from the catalog. Numeric fields accept numbers or constant
expressions such as ``"2*pi"``. Extra keys are kept in ``RunConfig.params``
so subcommands can read their defaults (``maximum``, ``deltas``, ...).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict

import numpy as np

from .catalog import builtin
from .errors import ConfigError, MorseFlowError
from .field import constant_value, parse_expr
from .geometry import Landscape, Manifold, MetricField, ToleranceSet

_LANDSCAPE_KEYS = {"manifold", "dimension", "F", "metric", "density", "tolerances", "name"}


@dataclass
class RunConfig:
    landscape: Landscape
    params: Dict[str, Any] = field(default_factory=dict)
    source: str = ""


def _number(value, what: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{what}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            c = constant_value(parse_expr(value, 1))
        except MorseFlowError as exc:
            raise ConfigError(f"{what}: {exc}") from None
        if c is None:
            raise ConfigError(f"{what}: {value!r} is not a constant")
        return float(c)
    raise ConfigError(f"{what}: expected a number, got {type(value).__name__}")


def _manifold(spec, n_hint) -> Manifold:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("manifold must be an object with a 'kind'")
    kind = spec["kind"]
    if kind == "torus":
        periods = spec.get("periods")
        if periods is None and "period" in spec and n_hint:
            periods = [spec["period"]] * n_hint
        if not periods:
            raise ConfigError("torus needs 'periods'")
        return Manifold.torus([_number(p, "period") for p in periods])
    if kind == "circle":
        return Manifold.circle(_number(spec.get("period", 2 * np.pi), "period"))
    if kind == "box":
        bounds = spec.get("bounds")
        if not bounds or any(len(b) != 2 for b in bounds):
            raise ConfigError("box needs 'bounds' as a list of [lower, upper] pairs")
        lower = [_number(b[0], "lower bound") for b in bounds]
        upper = [_number(b[1], "upper bound") for b in bounds]
        return Manifold.box(lower, upper)
    raise ConfigError(f"unknown manifold kind {kind!r}")


def landscape_from_dict(data: dict, name: str = "") -> Landscape:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "F" not in data:
        raise ConfigError("config has no 'F'")
    source = data["F"]
    if not isinstance(source, str):
        raise ConfigError("'F' must be a string")
    dim = data.get("dimension")
    try:
        if source.startswith("builtin:"):
            b = builtin(source.split(":", 1)[1].strip())
            manifold = _manifold(data["manifold"], b.n) if "manifold" in data else b.manifold
            if manifold.n != b.n:
                raise ConfigError(f"builtin has dimension {b.n}, manifold has {manifold.n}")
            F = b.expr
            name = name or source.split(":", 1)[1].strip()
        else:
            if "manifold" not in data:
                raise ConfigError("config has no 'manifold'")
            manifold = _manifold(data["manifold"], dim)
            F = parse_expr(source, manifold.n)
        if dim is not None and int(dim) != manifold.n:
            raise ConfigError(f"dimension {dim} does not match the manifold ({manifold.n})")
        n = manifold.n

        metric_spec = data.get("metric", "identity")
        if metric_spec == "identity":
            metric = MetricField.identity(n)
        elif isinstance(metric_spec, list):
            metric = MetricField(n, [[parse_expr(str(e), n) for e in row] for row in metric_spec])
        else:
            raise ConfigError("metric must be 'identity' or a matrix of expressions")

        density_spec = data.get("density", "riemannian")
        density = None if density_spec == "riemannian" else parse_expr(str(density_spec), n)

        tol_spec = data.get("tolerances", {}) or {}
        known = {f.name for f in fields(ToleranceSet)}
        unknown = set(tol_spec) - known
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        tolerances = ToleranceSet(**{k: _number(v, k) for k, v in tol_spec.items()})
        return Landscape(manifold, F, metric, density, tolerances, data.get("name", name))
    except ConfigError:
        raise
    except (MorseFlowError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    L = landscape_from_dict(data, name=path.stem)
    params = {k: v for k, v in data.items() if k not in _LANDSCAPE_KEYS}
    return RunConfig(L, params, str(path))
