"""Self-checks run by the ``linear-check`` and ``perturb-check`` subcommands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .critical import eigvec_continuity_check, perturb_distinct_eigs
from .eigen import jacobi_eigh
from .linear_model import (DiagonalSystem, cusp_geometry, empty_geometry, f_lower, f_upper, flow,
                           in_invariant_region, limit_tangent, measure_union_check,
                           scaling_exponent_estimate, velocity_direction, whole_geometry)
from .rng import substream

DEFAULT_SYSTEMS = ((-2.0, -1.0), (-3.0, -1.0), (-3.0, -2.0, -1.0), (-4.0, -3.0, -2.0, -1.0))
SCALING_DELTAS = (0.2, 0.1, 0.05, 0.025)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def _random_w(rng, sys: DiagonalSystem, count: int) -> np.ndarray:
    d = sys.n - 1
    g = rng.standard_normal((count, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * sys.rho * rng.uniform(size=(count, 1)) ** (1.0 / d)


def _sphere(rng, sys: DiagonalSystem, count: int) -> np.ndarray:
    g = rng.standard_normal((count, sys.n))
    return sys.r * g / np.linalg.norm(g, axis=1, keepdims=True)


def linear_checks(seed: int = 0, samples: int = 100_000, points: int = 10_000):
    """Property checks of the linear model; returns ``(checks, scaling estimates)``."""
    checks: List[Check] = []
    estimates = {}
    for k, lam in enumerate(DEFAULT_SYSTEMS):
        sys = DiagonalSystem(lam)
        tag = "lam=" + ",".join(f"{v:g}" for v in lam)
        rng = substream(seed, k, 0)

        W = _random_w(rng, sys, points)
        excess = float(np.max(f_lower(sys, W) - f_upper(sys, W)))
        checks.append(Check(f"domination {tag}", excess <= 1e-9, f"max excess {excess:.3g}"))
        if sys.n == 2:
            err = float(np.max(np.abs(f_lower(sys, W) - f_upper(sys, W))))
            checks.append(Check(f"closed form {tag}", err <= 1e-12, f"max error {err:.3g}"))

        # flowed cap boundary lies on the graph of f_lower
        Y = np.column_stack([np.full(1000, sys.r0), _random_w(rng, sys, 1000)])
        Y[:, 1:] *= sys.rho / np.linalg.norm(Y[:, 1:], axis=1, keepdims=True)
        Z = flow(sys, Y, rng.uniform(0.0, 5.0, 1000))
        gerr = float(np.max(np.abs(Z[:, 0] - f_lower(sys, Z[:, 1:]))))
        checks.append(Check(f"graph consistency {tag}", gerr <= 1e-9, f"max error {gerr:.3g}"))

        Z = _sphere(rng, sys, 4 * points) * rng.uniform(size=(4 * points, 1)) ** (1.0 / sys.n)
        members = Z[in_invariant_region(sys, Z)][:points]
        moved = flow(sys, members, rng.uniform(0.0, 10.0, len(members)))
        kept = bool(np.all(in_invariant_region(sys, moved)))
        checks.append(Check(f"forward invariance {tag}", kept, f"{len(members)} members"))

        S = np.vstack([_sphere(rng, sys, 1000), sys.r * np.eye(sys.n)[:1], -sys.r * np.eye(sys.n)[:1]])
        t_end = 40.0 * np.max(1.0 / np.abs(sys.lam))
        axis_hits, worst = 0, 0.0
        for z in S:
            tangent = limit_tangent(sys, z)
            if abs(abs(tangent[0]) - 1.0) == 0.0:
                axis_hits += 1
            worst = max(worst, float(np.max(np.abs(tangent + velocity_direction(sys, z, t_end)))))
        checks.append(Check(f"two principal directions {tag}", axis_hits == 2, f"{axis_hits} axis limits"))
        checks.append(Check(f"velocity limit {tag}", worst <= 1e-8, f"max error {worst:.3g}"))

    for ratio in (2.0, 3.0):
        sys = DiagonalSystem((-ratio, -1.0))
        est = scaling_exponent_estimate(sys, SCALING_DELTAS, samples, seed)
        estimates[ratio] = est
        checks.append(Check(f"scaling exponent ratio={ratio:g}", abs(est.deviation) <= 0.15,
                            f"fitted {est.slope:.4f}, predicted {est.predicted:.4f}"))

    cusp = measure_union_check(cusp_geometry(DiagonalSystem((-2.0, -1.0))), (0.4, 0.2, 0.1, 0.05),
                               samples, seed)
    whole = measure_union_check(whole_geometry(), (0.4, 0.1), 1000, seed)
    empty = measure_union_check(empty_geometry(), (0.4, 0.1), 1000, seed)
    checks.append(Check("measure union cusp", cusp.passed,
                        f"max identity error {cusp.identity_error.max():.3g}"))
    checks.append(Check("measure union whole", whole.passed and bool(np.all(whole.full_ratio == 1.0))))
    checks.append(Check("measure union empty", empty.passed and bool(np.all(empty.full_ratio == 0.0))))
    return checks, estimates


def repeated_spectrum_pair(rng, n: int):
    """SPD (A, B) whose product AB has a repeated eigenvalue."""
    M = rng.standard_normal((n, n))
    B = M @ M.T + n * np.eye(n)
    w, U = jacobi_eigh(B)
    Bih = (U / np.sqrt(w)) @ U.T
    d = rng.uniform(0.5, 3.0, n)
    d[1] = d[0]
    P, _ = np.linalg.qr(rng.standard_normal((n, n)))
    S = (P * d) @ P.T
    A = Bih @ S @ Bih
    return 0.5 * (A + A.T), B


def product_spectrum(A, B) -> np.ndarray:
    """Eigenvalues of AB via the similar symmetric matrix B^1/2 A B^1/2."""
    w, U = jacobi_eigh(B)
    Bh = (U * np.sqrt(w)) @ U.T
    return jacobi_eigh(Bh @ A @ Bh)[0]


def perturb_checks(seed: int = 0, pairs: int = 200, eps: float = 1e-3, trials: int = 500) -> List[Check]:
    failures = []
    for k in range(pairs):
        rng = substream(seed, k)
        n = 2 + k % 4
        A, B = repeated_spectrum_pair(rng, n)
        Q = perturb_distinct_eigs(A, B, eps)
        spd = bool(np.all(np.linalg.eigvalsh(Q) > 0))
        small = np.linalg.norm(Q, 2) < eps
        gaps = np.diff(product_spectrum(A + Q, B))
        if not (spd and small and np.all(gaps > 0)):
            failures.append(k)
    checks = [Check("perturbation splits repeated spectra", not failures,
                    f"{pairs - len(failures)}/{pairs} pairs; failures {failures[:5]}")]
    rep = eigvec_continuity_check(np.diag([2.0, 1.0]), 1e-4, trials, seed)
    checks.append(Check("eigenvector continuity", rep.passed, f"max ratio {rep.max_ratio:.3f}"))
    return checks
