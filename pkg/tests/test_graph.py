import json
import math

import numpy as np
import pytest

from morseflow.critical import MINIMUM
from morseflow.errors import NonSimpleInput, StructureViolation
from morseflow.flow import trace_all
from morseflow.graph import RANK0, RANK1, MaxMinGraph, build_maxmin, export, to_dot, validate_dim1
from oracles import rk4_descent, torus_wrap


def _graph(critsets, name):
    L, cs = critsets(name)
    return cs, build_maxmin(cs, trace_all(L, cs))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_circle_graphs_are_cycles(critsets, k):
    cs, g = _graph(critsets, f"circle_{k}")
    assert len(g.minima) == len(g.maxima) == k
    rep = validate_dim1(g, RANK1)
    assert rep.edges_checked == 2 * k
    assert all(g.signed_degree(v) == 2 for v in g.minima + g.maxima)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_line_graphs_are_paths(critsets, k):
    cs, g = _graph(critsets, f"line_{k}")
    assert len(g.minima) == k + 1 and len(g.maxima) == k
    rep = validate_dim1(g, RANK0)
    assert rep.edges_checked == 2 * k
    ends = [rep.order[0], rep.order[-1]]
    assert [g.degree(v) for v in ends] == [1, 1]
    # the path is connected: every consecutive pair is an edge
    for a, b in zip(rep.order, rep.order[1:]):
        p, m = (a, b) if a in g.maxima else (b, a)
        assert (p, m) in g.edges


def test_wrong_topology_rejected(critsets):
    _, g = _graph(critsets, "circle_3")
    with pytest.raises(StructureViolation):
        validate_dim1(g, RANK0)
    _, g = _graph(critsets, "line_2")
    with pytest.raises(StructureViolation):
        validate_dim1(g, RANK1)


def test_skew_edges_match_rk4_oracle(critsets):
    L, cs = critsets("torus2_skew")
    g = build_maxmin(cs, trace_all(L, cs))

    def grad(x):
        d = math.sin(x[0] - x[1])
        return np.array([-math.sin(x[0]) - 0.3 * d, -0.5 * math.sin(x[1]) + 0.3 * d])

    p = cs.maxima[0]
    expected = {}
    for sign in (+1, -1):
        end, _ = rk4_descent(grad, p.location + sign * 1e-4 * cs.separation(p.id) * p.v1, 1e-2,
                             lambda x: np.linalg.norm(grad(x)) < 1e-9)
        end = torus_wrap(end)
        mid = int(np.argmin(cs.manifold.distance(cs.locations, end)))
        assert cs[mid].kind == MINIMUM
        expected.setdefault((p.id, mid), []).append("+" if sign > 0 else "-")
    assert g.edges == {k: tuple(sorted(v)) for k, v in expected.items()}


def test_box_quad_graph(critsets):
    cs, g = _graph(critsets, "box_quad")
    (p,) = g.maxima
    targets = sorted(m for _, m in g.edges)
    assert len(targets) == 2
    # the unstable direction is the x1 axis, so the lines end at (+-1, 0)
    xs = sorted(float(cs[m].location[0]) for m in targets)
    assert xs == pytest.approx([-1.0, 1.0], abs=1e-8)


def test_abstract_checks():
    with pytest.raises(StructureViolation):
        MaxMinGraph([0, 1, 2], [3], {(3, 0): ("+",), (3, 1): ("-",), (3, 2): ("+",)})
    with pytest.raises(StructureViolation):
        MaxMinGraph([], [3], {})
    with pytest.raises(StructureViolation):
        MaxMinGraph([0], [], {})
    with pytest.raises(StructureViolation):
        MaxMinGraph([0], [3], {(0, 3): ("+", "-")})
    with pytest.raises(StructureViolation):
        MaxMinGraph([0], [3], {})


def test_disconnected_graph_allowed():
    g = MaxMinGraph([0, 1, 2], [3, 4], {(3, 0): ("+", "-"), (4, 1): ("+",), (4, 2): ("-",)})
    assert g.degree(0) == 1 and g.degree(4) == 2


def test_missing_line_is_non_simple(critsets):
    L, cs = critsets("circle_3")
    lines = trace_all(L, cs)[:-1]
    with pytest.raises(NonSimpleInput) as err:
        build_maxmin(cs, lines)
    assert err.value.offenders == (lines[-1].maximum_id,)


def test_saddle_hit_is_non_simple(critsets):
    L, cs = critsets("torus2_sep")
    with pytest.raises(NonSimpleInput):
        build_maxmin(cs, trace_all(L, cs))


def test_exports(critsets):
    _, g = _graph(critsets, "circle_3")
    dot = export(g, "dot")
    assert dot == to_dot(g) == export(g, "dot")
    assert dot.startswith("graph maxmin {") and dot.count(" -- ") == len(g.edges) == 6
    assert dot.count("shape=triangle") == 3 and dot.count("shape=circle") == 3
    rec = json.loads(export(g, "json"))
    assert rec["minima"] == g.minima and len(rec["edges"]) == 6
    with pytest.raises(ValueError):
        export(g, "png")
