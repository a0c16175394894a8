"""The bipartite max-min graph built from principal flow line terminals."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .critical import CriticalSet
from .errors import NonSimpleInput, StructureViolation
from .flow import MINIMUM_REACHED, PrincipalFlowLine

RANK0, RANK1 = "rank0", "rank1"


@dataclass
class MaxMinGraph:
    minima: List[int]
    maxima: List[int]
    # (max id, min id) -> signs of the principal lines producing the edge
    edges: Dict[Tuple[int, int], Tuple[str, ...]]
    positions: Dict[int, float] = field(default_factory=dict)   # 1-D chart coordinates
    period: Optional[float] = None

    def __post_init__(self):
        self.minima = sorted(self.minima)
        self.maxima = sorted(self.maxima)
        self.edges = {k: tuple(sorted(v)) for k, v in sorted(self.edges.items())}
        self.check_abstract()

    def degree(self, node: int) -> int:
        return sum(1 for p, m in self.edges if node in (p, m))

    def signed_degree(self, node: int) -> int:
        return sum(len(s) for (p, m), s in self.edges.items() if node in (p, m))

    def check_abstract(self) -> None:
        """Bipartite, both sides non-empty, and every maximum of degree 1 or 2."""
        if not self.minima:
            raise StructureViolation("graph has no minima")
        if not self.maxima:
            raise StructureViolation("graph has no maxima")
        lo, hi = set(self.minima), set(self.maxima)
        for p, m in self.edges:
            if p not in hi or m not in lo:
                raise StructureViolation(f"edge ({p}, {m}) does not join a maximum to a minimum")
        for p in self.maxima:
            d = self.degree(p)
            if not 1 <= d <= 2:
                raise StructureViolation(f"maximum {p} has degree {d}, outside [1, 2]")

    def to_record(self) -> dict:
        return {
            "minima": list(self.minima),
            "maxima": list(self.maxima),
            "edges": [{"max": p, "min": m, "signs": list(s)} for (p, m), s in self.edges.items()],
        }


def build_maxmin(critset: CriticalSet, lines: Iterable[PrincipalFlowLine]) -> MaxMinGraph:
    """Graph on minima and maxima with one edge per distinct principal terminal."""
    by_max: Dict[int, Dict[str, PrincipalFlowLine]] = {p.id: {} for p in critset.maxima}
    for line in lines:
        by_max.setdefault(line.maximum_id, {})[line.sign] = line
    offenders = []
    edges: Dict[Tuple[int, int], List[str]] = {}
    for pid, signed in sorted(by_max.items()):
        if set(signed) != {"+", "-"} or any(l.outcome != MINIMUM_REACHED for l in signed.values()):
            offenders.append(pid)
            continue
        for sign, line in signed.items():
            edges.setdefault((pid, line.terminal_id), []).append(sign)
    if offenders:
        raise NonSimpleInput(f"maxima without two principal lines ending at minima: {offenders}", offenders)
    positions, period = {}, None
    if critset.manifold.n == 1:
        positions = {p.id: float(p.location[0]) for p in critset}
        if critset.manifold.periodic:
            period = float(critset.manifold.periods[0])
    return MaxMinGraph([m.id for m in critset.minima], [p.id for p in critset.maxima],
                       {k: tuple(v) for k, v in edges.items()}, positions, period)


@dataclass
class Dim1Report:
    topology: str
    order: List[int]        # node ids along the line or around the circle
    edges_checked: int


def _alternating(order, minima) -> bool:
    kinds = [node in minima for node in order]
    return all(a != b for a, b in zip(kinds, kinds[1:]))


def validate_dim1(g: MaxMinGraph, topology: str) -> Dim1Report:
    """Check the one-dimensional structure against the ordering of critical points.

    ``rank0`` (interval): one more minimum than maxima, and the edges are
    exactly ``(p_i, m_i), (p_i, m_{i+1})`` along the sorted order.
    ``rank1`` (circle): as many minima as maxima, and the same edge pattern
    read cyclically, so every node has degree 2 counting both signed lines.
    """
    if topology not in (RANK0, RANK1):
        raise ValueError(f"topology must be {RANK0!r} or {RANK1!r}")
    if not g.positions:
        raise StructureViolation("graph carries no 1-D coordinates")
    lows, highs = set(g.minima), set(g.maxima)
    order = sorted(lows | highs, key=lambda i: (g.positions[i], i))
    actual = Counter({e: len(s) for e, s in g.edges.items()})

    if topology == RANK0:
        if len(lows) != len(highs) + 1:
            raise StructureViolation(f"{len(lows)} minima but {len(highs)} maxima; "
                                     f"a path needs one more minimum")
        if order[0] not in lows or not _alternating(order, lows):
            raise StructureViolation("minima and maxima do not alternate along the interval")
        expected = Counter()
        for k in range(1, len(order), 2):
            expected[(order[k], order[k - 1])] += 1
            expected[(order[k], order[k + 1])] += 1
        if actual != expected:
            raise StructureViolation("edge set differs from the path through the sorted critical points")
        for node in lows:
            deg = g.degree(node)
            ends = node in (order[0], order[-1])
            if deg != (1 if ends else 2):
                raise StructureViolation(f"minimum {node} has degree {deg} on the path")
        return Dim1Report(RANK0, order, len(expected))

    if len(lows) != len(highs):
        raise StructureViolation(f"{len(lows)} minima differ from {len(highs)} maxima")
    if order[0] not in lows:
        order = order[1:] + order[:1]
    if not _alternating(order + order[:1], lows):
        raise StructureViolation("minima and maxima do not alternate around the circle")
    expected = Counter()
    size = len(order)
    for k in range(1, size, 2):
        expected[(order[k], order[k - 1])] += 1
        expected[(order[k], order[(k + 1) % size])] += 1
    if actual != expected:
        raise StructureViolation("signed edges differ from the cyclic order of critical points")
    for node in lows | highs:
        if g.signed_degree(node) != 2:
            raise StructureViolation(f"node {node} has signed degree {g.signed_degree(node)}, not 2")
    return Dim1Report(RANK1, order, sum(expected.values()))


def to_dot(g: MaxMinGraph) -> str:
    lines = ["graph maxmin {"]
    for p in g.maxima:
        lines.append(f'  "max{p}" [shape=triangle, label="{p}"];')
    for m in g.minima:
        lines.append(f'  "min{m}" [shape=circle, label="{m}"];')
    for (p, m), signs in g.edges.items():
        lines.append(f'  "max{p}" -- "min{m}" [label="{"".join(signs)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(g: MaxMinGraph) -> str:
    return json.dumps(g.to_record(), indent=2) + "\n"


def export(g: MaxMinGraph, fmt: str = "dot") -> str:
    if fmt == "dot":
        return to_dot(g)
    if fmt == "json":
        return to_json(g)
    raise ValueError(f"unsupported graph format {fmt!r}")
