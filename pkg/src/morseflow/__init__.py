"""Gradient-flow analysis of Morse functions on flat charts."""

from .catalog import builtin, landscape, names
from .critical import CriticalPoint, CriticalSet, find_critical_points, linearization, simplicity_gap
from .field import Expr, Jet2, eval_jet2, parse_expr
from .flow import classify_point, classify_points, integrate, trace_principal
from .geometry import Landscape, Manifold, MetricField, ToleranceSet

__all__ = [
    "CriticalPoint", "CriticalSet", "Expr", "Jet2", "Landscape", "Manifold", "MetricField",
    "ToleranceSet", "builtin", "classify_point", "classify_points", "eval_jet2",
    "find_critical_points", "integrate", "landscape", "linearization", "names", "parse_expr",
    "simplicity_gap", "trace_principal",
]
