"""Builtin landscapes used by the tests, the CLI and the experiments."""

from __future__ import annotations

import math
from typing import NamedTuple

from .errors import UnknownBuiltin
from .field import Expr, parse_expr
from .geometry import Landscape, Manifold

TWO_PI = 2 * math.pi


class Builtin(NamedTuple):
    expr: Expr
    manifold: Manifold
    n: int
    description: str


def _quartic_well(q1: float, q2: float) -> str:
    # -q1 x1^2 - q2 x2^2 near the origin; quartic terms add minima at (+-1, 0)
    # and (0, +-1) and make the box [-1.5, 1.5]^2 inward-flowing
    k = q1 + q2
    return (f"-{q1!r}*x1^2 - {q2!r}*x2^2 + {q1 / 2!r}*x1^4 + {q2 / 2!r}*x2^4"
            f" + {k!r}*x1^2*x2^2")


_TORUS2 = Manifold.torus((TWO_PI, TWO_PI))
_QUAD_BOX = Manifold.box((-1.5, -1.5), (1.5, 1.5))

_CATALOG = {
    "torus2_sep": ("cos(x1) + 0.5*cos(x2)", _TORUS2,
                   "separable pair on T^2; the maximum's principal line hits a saddle"),
    "torus2_skew": ("cos(x1) + 0.5*cos(x2) + 0.3*cos(x1 - x2)", _TORUS2,
                    "coupled pair on T^2 with a simple maximum"),
    "box_quad": (_quartic_well(2.0, 1.0), _QUAD_BOX,
                 "-x'Qx with Q = diag(2, 1) near the origin, confined by quartic walls"),
    "box_quad3": (_quartic_well(3.0, 1.0), _QUAD_BOX,
                  "as box_quad with Q = diag(3, 1)"),
    "box_quad_tie": (_quartic_well(1.1, 1.0), _QUAD_BOX,
                     "as box_quad with a near-tie Q = diag(1.1, 1)"),
}
for _k in (1, 2, 3):
    _CATALOG[f"circle_{_k}"] = (
        "sin(x1)" if _k == 1 else f"sin({_k}*x1)", Manifold.circle(TWO_PI),
        f"sin({_k} x) on the circle: {_k} maxima and {_k} minima")
    _CATALOG[f"line_{_k}"] = (
        "-cos(x1)", Manifold.box((-1.0,), (TWO_PI * _k + 1.0,)),
        f"-cos x on an interval: {_k} maxima and {_k + 1} minima")


def names():
    return sorted(_CATALOG)


def builtin(name: str) -> Builtin:
    """Look up a catalog landscape by name."""
    try:
        source, manifold, description = _CATALOG[name]
    except KeyError:
        raise UnknownBuiltin(f"unknown builtin landscape {name!r}; known: {', '.join(names())}") from None
    return Builtin(parse_expr(source, manifold.n), manifold, manifold.n, description)


def landscape(name: str, **kwargs) -> Landscape:
    """Builtin landscape with the identity metric and default tolerances."""
    b = builtin(name)
    return Landscape(b.manifold, b.expr, name=name, **kwargs)
