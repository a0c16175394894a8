"""Critical points, Morse indices and the linearisation of the gradient field.

At a critical point p the Jacobian of the Riemannian gradient in coordinates
is ``H = G(p)^-1 Hess F(p)`` (the derivative of G drops out because dF
vanishes there). H is not symmetric, but it is similar to the symmetric
matrix ``G^-1/2 Hess F G^-1/2``, which is what gets diagonalised.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .eigen import jacobi_eigh, normalize_sign, spd_power
from .errors import DegenerateCriticalPoint, GapTooSmall, MetricNotSPD
from .field import eval_jet2, evaluate
from .geometry import Landscape
from .rng import substream

MINIMUM, SADDLE, MAXIMUM = "minimum", "saddle", "maximum"


@dataclass
class CriticalPoint:
    id: int
    location: np.ndarray
    value: float
    morse_index: int
    eigenvalues: np.ndarray       # of H, ascending
    eigenvectors: np.ndarray      # columns, chart-Euclidean unit length
    gap_rel: Optional[float]      # (l2 - l1) / |l1|; None when n == 1
    v1: Optional[np.ndarray]      # only for maxima whose smallest eigenvalue is isolated
    margin: float                 # min |eigenvalue|
    n: int = 0

    def __post_init__(self):
        self.n = len(self.location)

    @property
    def kind(self) -> str:
        if self.morse_index == 0:
            return MINIMUM
        if self.morse_index == self.n:
            return MAXIMUM
        return SADDLE

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "kind": self.kind,
            "location": [float(v) for v in self.location],
            "value": float(self.value),
            "index": int(self.morse_index),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "gap_rel": None if self.gap_rel is None else float(self.gap_rel),
        }
        if self.v1 is not None:
            rec["v1"] = [float(v) for v in self.v1]
        return rec


class CriticalSet:
    """Deduplicated critical points, ids ordered by (index, location)."""

    def __init__(self, points, manifold):
        self.points = list(points)
        self.manifold = manifold
        self.locations = (np.array([p.location for p in self.points])
                          if self.points else np.empty((0, manifold.n)))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, cid: int) -> CriticalPoint:
        return self.points[cid]

    @property
    def minima(self):
        return [p for p in self.points if p.kind == MINIMUM]

    @property
    def saddles(self):
        return [p for p in self.points if p.kind == SADDLE]

    @property
    def maxima(self):
        return [p for p in self.points if p.kind == MAXIMUM]

    def euler_sum(self) -> int:
        return sum((-1) ** p.morse_index for p in self.points)

    def nearest(self, X):
        """Nearest critical point of each row; ties go to the lowest id."""
        X = np.atleast_2d(X)
        d = self.manifold.distance(X[:, None, :], self.locations[None, :, :])
        ids = np.argmin(d, axis=1)
        return ids, d[np.arange(len(X)), ids]

    def separation(self, cid: int) -> float:
        """Distance from point ``cid`` to the nearest other critical point."""
        if len(self.points) < 2:
            return float(np.inf)
        d = self.manifold.distance(self.locations[cid], self.locations)
        d[cid] = np.inf
        return float(d.min())

    def to_record(self) -> dict:
        return {
            "points": [p.to_record() for p in self.points],
            "counts": {MINIMUM: len(self.minima), SADDLE: len(self.saddles),
                       MAXIMUM: len(self.maxima)},
            "euler_sum": self.euler_sum(),
        }


def spectrum(G, hess):
    """Eigenvalues (ascending) and unit eigenvectors of ``G^-1 hess``."""
    try:
        Gih = spd_power(G, -0.5)
    except np.linalg.LinAlgError:
        raise MetricNotSPD(np.full(len(G), np.nan)) from None
    S = Gih @ hess @ Gih
    w, U = jacobi_eigh(0.5 * (S + S.T))
    V = Gih @ U
    V /= np.linalg.norm(V, axis=0)
    for k in range(V.shape[1]):
        V[:, k] = normalize_sign(V[:, k])
    return w, V


def linearization(L: Landscape, p) -> np.ndarray:
    """The matrix H = G(p)^-1 Hess F(p); ``p`` is a CriticalPoint or a location."""
    x = p.location if isinstance(p, CriticalPoint) else np.asarray(p, dtype=float)
    G = L.metric.matrices(x[None, :])[0]
    return np.linalg.solve(G, eval_jet2(L.F, x).hessian)


def linearization_spectrum(L: Landscape, x):
    x = np.asarray(x, dtype=float)
    G = L.metric.matrices(x[None, :])[0]
    return spectrum(G, eval_jet2(L.F, x).hessian)


@dataclass(frozen=True)
class Simple:
    v1: np.ndarray
    gap_rel: float


@dataclass(frozen=True)
class NonSimpleTie:
    gap_rel: float


def simplicity_gap(p: CriticalPoint, gap_rel_tol: float = 1e-6) -> Union[Simple, NonSimpleTie]:
    """Decide whether the smallest eigenvalue of H at a maximum is isolated."""
    if p.kind != MAXIMUM:
        raise ValueError(f"critical point {p.id} is a {p.kind}, not a maximum")
    if p.n == 1:
        return Simple(normalize_sign(p.eigenvectors[:, 0]), float("inf"))
    gap = _gap_rel(p.eigenvalues)
    if gap > gap_rel_tol:
        return Simple(normalize_sign(p.eigenvectors[:, 0]), gap)
    return NonSimpleTie(gap)


def _gap_rel(w) -> float:
    return float((w[1] - w[0]) / abs(w[0]))


# ---------------------------------------------------------------------------
# Newton search
# ---------------------------------------------------------------------------

def _jacobians(L: Landscape, X):
    if L.metric.is_constant:
        _, _, hess = evaluate(L.F, X, order=2)
        if L.metric.is_identity:
            return hess
        return np.linalg.solve(L.metric.matrices(X), hess)
    n = L.n
    J = np.empty((len(X), n, n))
    h = 1e-6 * np.maximum(1.0, np.abs(X))
    for j in range(n):
        E = np.zeros_like(X)
        E[:, j] = h[:, j]
        gp = L.value_and_gradient(X + E)[1]
        gm = L.value_and_gradient(X - E)[1]
        J[:, :, j] = (gp - gm) / (2 * h[:, j, None])
    return J


def _newton(L: Landscape, X, max_iter=60):
    M = L.manifold
    tol = L.tolerances.grad_tol
    lo, hi = M.bounds()
    max_step = 0.25 * float(np.min(hi - lo))
    X = X.copy()
    alive = np.ones(len(X), dtype=bool)
    done = np.zeros(len(X), dtype=bool)
    for _ in range(max_iter):
        act = np.flatnonzero(alive & ~done)
        if act.size == 0:
            break
        Xa = X[act]
        R = L.value_and_gradient(Xa)[1]
        rnorm = np.linalg.norm(R, axis=1)
        J = _jacobians(L, Xa)
        ok = np.abs(np.linalg.det(J)) > 1e-300
        step = np.zeros_like(Xa)
        if ok.any():
            try:
                step[ok] = np.linalg.solve(J[ok], R[ok][..., None])[..., 0]
            except np.linalg.LinAlgError:
                for k in np.flatnonzero(ok):
                    try:
                        step[k] = np.linalg.solve(J[k], R[k])
                    except np.linalg.LinAlgError:
                        ok[k] = False
        alive[act[~ok & (rnorm > 1e-3 * tol)]] = False
        snorm = np.linalg.norm(step, axis=1)
        too_big = snorm > max_step
        step[too_big] *= (max_step / snorm[too_big])[:, None]
        Xn = M.wrap(Xa - step)
        converged = rnorm <= 1e-3 * tol
        X[act] = np.where(converged[:, None], Xa, Xn)
        done[act[converged]] = True
        if M.kind == "box":
            alive[act[~M.contains(X[act])]] = False
    Xa = X[alive]
    R = L.value_and_gradient(Xa)[1] if len(Xa) else np.empty((0, L.n))
    good = np.linalg.norm(R, axis=1) <= tol
    return Xa[good]


def find_critical_points(L: Landscape, grid_per_axis: int = 32) -> "CriticalSet":
    """Newton iteration on the Riemannian gradient from every node of a grid.

    Roots closer than ``dedup_radius`` are merged; divergent starts are
    dropped. Every surviving root is classified from the spectrum of H and
    rejected as degenerate if some eigenvalue is below sqrt(grad_tol).
    """
    if grid_per_axis < 4:
        raise ValueError("grid_per_axis must be at least 4")
    M = L.manifold
    tol = L.tolerances
    roots = _newton(L, M.grid(grid_per_axis))
    kept = []
    for x in roots:
        x = x + 0.0  # no signed zeros in reports
        if all(M.distance(x, y) >= tol.dedup_radius for y in kept):
            kept.append(x)
    points = []
    for x in kept:
        jet = eval_jet2(L.F, x)
        G = L.metric.matrices(x[None, :])[0]
        w, V = spectrum(G, jet.hessian)
        margin = float(np.min(np.abs(w)))
        if margin <= np.sqrt(tol.grad_tol):
            raise DegenerateCriticalPoint(x, w)
        index = int(np.sum(w < 0))
        points.append((index, x, jet.value, w, V, margin))
    points.sort(key=lambda r: (r[0], tuple(np.round(r[1], 9))))
    out = []
    for cid, (index, x, value, w, V, margin) in enumerate(points):
        gap = _gap_rel(w) if L.n > 1 else None
        cp = CriticalPoint(cid, x, value, index, w, V, gap, None, margin)
        if cp.kind == MAXIMUM:
            verdict = simplicity_gap(cp, tol.gap_rel_tol)
            if isinstance(verdict, Simple):
                cp.v1 = verdict.v1
        out.append(cp)
    return CriticalSet(out, M)


# ---------------------------------------------------------------------------
# Eigenvalue perturbation checks
# ---------------------------------------------------------------------------

def perturb_distinct_eigs(A, B, eps: float) -> np.ndarray:
    """Small SPD Q such that (A + Q) B has pairwise distinct eigenvalues.

    With B^1/2 A B^1/2 = P D P^T and v_i = B^-1/2 p_i, adding
    Q = sum_i e_i v_i v_i^T shifts the i-th eigenvalue of the product by
    exactly e_i. The shifts are strictly increasing along the sorted
    spectrum, so ties split, and are scaled so that ||Q||_2 < eps.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = A.shape[0]
    wB, UB = jacobi_eigh(B)
    if np.any(wB <= 0) or np.any(jacobi_eigh(A)[0] <= 0):
        raise ValueError("A and B must be symmetric positive definite")
    Bh = (UB * np.sqrt(wB)) @ UB.T
    Bih = (UB / np.sqrt(wB)) @ UB.T
    d, P = jacobi_eigh(Bh @ A @ Bh)
    # ||Q|| <= max(e_i) * ||B^-1|| = max(e_i) / min(wB)
    scale = 0.5 * eps * wB.min()
    shifts = scale * np.arange(1, n + 1) / (n + 1)
    Vv = Bih @ P
    Q = (Vv * shifts) @ Vv.T
    return 0.5 * (Q + Q.T)


@dataclass
class ContinuityReport:
    gap: float
    eta: float
    trials: int
    max_angle: float
    max_ratio: float  # angle * gap / eta
    bound: float = 4.0

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.bound


def _v1(A):
    return jacobi_eigh(A)[1][:, 0]


def eigvec_continuity_check(A, eta: float, trials: int = 500, seed: int = 0) -> ContinuityReport:
    """Check that v1 moves by at most 4 eta / gap under perturbations of size eta."""
    A = np.asarray(A, dtype=float)
    w, V = jacobi_eigh(A)
    gap = float(w[1] - w[0])
    if gap <= 0 or eta > gap / 4:
        raise GapTooSmall(f"perturbation {eta:g} exceeds a quarter of the eigengap {gap:g}")
    v = V[:, 0]
    n = len(A)
    max_angle = 0.0
    for k in range(trials):
        rng = substream(seed, k)
        E = rng.standard_normal((n, n))
        E = E + E.T
        norm = np.linalg.norm(E, 2)
        E = E * (eta / norm) if norm > 0 else E * 0.0
        u = _v1(A + E)
        c = abs(v @ u)
        angle = float(np.arctan2(np.linalg.norm(u - (v @ u) * v), c))
        max_angle = max(max_angle, angle)
    ratio = 0.0 if eta == 0 else max_angle * gap / eta
    return ContinuityReport(gap, eta, trials, max_angle, ratio)
