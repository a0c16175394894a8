import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from morseflow import landscape
from morseflow.errors import MetricNotSPD, NotInwardFlowing, RejectionOverflow, WrongManifold
from morseflow.field import parse_expr
from morseflow.geometry import (BallSampler, Landscape, Manifold, MetricField, ToleranceSet, check_invariance,
                                distance, riemannian_gradient, sample_ball)
from morseflow.rng import substream


def metric(rows, n=2):
    return MetricField(n, [[parse_expr(str(v), n) for v in row] for row in rows])


BOX2 = Manifold.box((-1, -1), (1, 1))


def test_identity_gradient_circle():
    L = Landscape(Manifold.circle(), parse_expr("cos(x1)", 1))
    assert riemannian_gradient(L, [math.pi / 2]) == pytest.approx([-1.0], abs=1e-15)


def test_diagonal_metric_gradient():
    L = Landscape(BOX2, parse_expr("2*x1 + 3*x2", 2), metric([[4, 0], [0, 1]]))
    assert np.allclose(riemannian_gradient(L, [0.2, 0.1]), [0.5, 3.0], rtol=1e-15)


def test_coupled_metric_gradient():
    L = Landscape(BOX2, parse_expr("x1", 2), metric([[2, 1], [1, 2]]))
    assert np.allclose(riemannian_gradient(L, [0.0, 0.0]), [2 / 3, -1 / 3], rtol=1e-14)


def test_metric_not_spd():
    L = Landscape(BOX2, parse_expr("x1", 2), metric([[1, 2], [2, 1]]))
    with pytest.raises(MetricNotSPD):
        riemannian_gradient(L, [0.0, 0.0])


def test_pointwise_metric_not_spd_reports_point():
    L = Landscape(BOX2, parse_expr("x1", 2), metric([["x1", "0"], ["0", "1"]]))
    riemannian_gradient(L, [0.5, 0.0])
    with pytest.raises(MetricNotSPD) as info:
        riemannian_gradient(L, [-0.5, 0.0])
    assert list(info.value.point) == [-0.5, 0.0]


def test_asymmetric_metric_rejected():
    with pytest.raises(ValueError):
        metric([[1, 0.5], [0.2, 1]])


VARIABLE = [["2 + sin(x1)", "0.3*cos(x2)"], ["0.3*cos(x2)", "1 + x2^2"]]


@settings(max_examples=100, deadline=None)
@given(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_gradient_defining_identity(x, X):
    F = parse_expr("sin(x1)*x2 + exp(0.5*x2)", 2)
    L = Landscape(BOX2, F, metric(VARIABLE))
    x, X = np.array(x), np.array(X)
    grad = riemannian_gradient(L, x)
    G = L.metric.matrices(x[None])[0]
    from morseflow.field import eval_jet2
    dF = eval_jet2(F, x).gradient
    assert abs(grad @ G @ X - dF @ X) <= 1e-10 * (1 + abs(dF @ X))


def test_distance_examples():
    T = Manifold.torus((2 * math.pi, 2 * math.pi))
    assert distance(T, [0.1, 0.0], [2 * math.pi - 0.1, 0.0]) == pytest.approx(0.2, abs=1e-15)
    assert distance(T, [1.0, 2.0], [1.0, 2.0]) == 0.0
    assert distance(Manifold.box((0, 0), (10, 10)), [0, 0], [3, 4]) == 5.0


def test_torus_distance_is_a_metric():
    T = Manifold.torus((2 * math.pi, 3.0))
    rng = np.random.default_rng(11)
    P = rng.uniform(-10, 10, (1000, 3, 2))
    dxy = T.distance(P[:, 0], P[:, 1])
    dyx = T.distance(P[:, 1], P[:, 0])
    dxz = T.distance(P[:, 0], P[:, 2])
    dyz = T.distance(P[:, 1], P[:, 2])
    assert np.array_equal(dxy, dyx)
    assert np.all(dxz <= dxy + dyz + 1e-12)
    assert np.all(T.distance(P[:, 0], P[:, 0]) == 0)
    assert np.all(dxy <= 0.5 * np.hypot(2 * math.pi, 3.0) + 1e-12)


def test_torus_wrap_normalizes():
    T = Manifold.torus((2.0, 3.0))
    W = T.wrap(np.array([[-0.5, 7.0], [2.0, -3.0]]))
    assert np.all((W >= 0) & (W < np.array([2.0, 3.0])))
    assert np.allclose(W, [[1.5, 1.0], [0.0, 0.0]])


def test_manifold_validation():
    with pytest.raises(ValueError):
        Manifold.torus((1.0, 0.0))
    with pytest.raises(ValueError):
        Manifold.box((0, 1), (1, 1))


def test_tolerances_positive_and_tightened():
    with pytest.raises(ValueError):
        ToleranceSet(capture_radius=0.0)
    t = ToleranceSet().tightened(10)
    assert t.ode_rel_tol == pytest.approx(1e-10) and t.ode_abs_tol == pytest.approx(1e-13)
    assert t.capture_radius == 1e-3 and t.grad_tol == 1e-9


def test_ball_samples_centered_and_deterministic():
    L = landscape("torus2_skew")
    p = np.array([1.0, 2.0])
    a = np.array([sample_ball(L, p, 0.3, substream(5, j)) for j in range(4000)])
    b = np.array([sample_ball(L, p, 0.3, substream(5, j)) for j in range(4000)])
    assert np.array_equal(a, b)
    assert np.all(np.linalg.norm(a - p, axis=1) <= 0.3)
    # uniform disk: per-axis std is delta/2
    assert np.all(np.abs(a.mean(axis=0) - p) < 4 * 0.15 / math.sqrt(4000))


def test_ball_sector_uniformity():
    L = Landscape(BOX2, parse_expr("x1", 2))
    sampler = BallSampler(L, [0.0, 0.0], 0.5)
    X = np.array([sampler.draw(substream(9, j)) for j in range(20000)])
    sector = (np.floor((np.arctan2(X[:, 1], X[:, 0]) + math.pi) / (math.pi / 4))).astype(int) % 8
    assert chisquare(np.bincount(sector, minlength=8)).pvalue > 0.001
    assert sampler.acceptance == pytest.approx(math.pi / 4, abs=0.01)


def test_ball_density_weighting():
    # density 1 + x1 on the disk of radius d has mean x1 = d^2 / 4
    L = Landscape(BOX2, parse_expr("x2", 2), density=parse_expr("1 + x1", 2))
    d = 0.5
    X = np.array([sample_ball(L, [0.0, 0.0], d, substream(2, j)) for j in range(20000)])
    se = 0.25 / math.sqrt(20000)
    assert abs(X[:, 0].mean() - d * d / 4) < 4 * se


def test_rejection_overflow():
    L = Landscape(BOX2, parse_expr("x1", 2), density=parse_expr("1e-9 + exp(-100000000*(x1^2 + x2^2))", 2))
    with pytest.raises(RejectionOverflow):
        sample_ball(L, [0.0, 0.0], 1.0, substream(0, 0))


def test_default_density_is_volume_form():
    L = Landscape(BOX2, parse_expr("x1", 2), metric([["4", "0"], ["0", "1 + x1^2"]]))
    x = np.array([[0.5, 0.0]])
    assert L.density_at(x)[0] == pytest.approx(math.sqrt(4 * 1.25))


def test_invariance_positive_definite_quadratic():
    L = Landscape(BOX2, parse_expr("x1^2 + 2*x2^2", 2))
    rep = check_invariance(L)
    assert rep.min_margin > 0
    assert rep.min_margin == pytest.approx(2.0)


def test_invariance_violation():
    L = Landscape(BOX2, parse_expr("x1", 2))
    with pytest.raises(NotInwardFlowing):
        check_invariance(L)


def test_invariance_wrong_manifold():
    with pytest.raises(WrongManifold):
        check_invariance(landscape("torus2_sep"))


@pytest.mark.parametrize("name", ["box_quad", "box_quad3", "box_quad_tie", "line_1", "line_2", "line_3"])
def test_catalog_boxes_are_inward(name):
    assert check_invariance(landscape(name)).min_margin > 0
