"""Closed-form oracle for the diagonal linear system ``z' = diag(lam) z``.

Coordinates are ordered so that ``z[0]`` is the fast (principal) axis and
``w = z[1:]`` collects the remaining ones. With ``lam`` ascending and
negative, the forward flow contracts every orbit to the origin, and an orbit
reaches the origin along the principal axis only if it starts on it.

The region swept by the forward flow of the upper spherical cap
``{|z| = r, z[0] >= r0}`` is the epigraph, inside the ball, of the lower
boundary function ``f_lower``; ``f_upper`` is a closed-form power law that
dominates it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InsufficientSamples, NotReached, OutOfDomain, UndefinedLimit
from .rng import substream


@dataclass(frozen=True)
class DiagonalSystem:
    eigenvalues: tuple
    r: float = np.sqrt(2.0)
    r0: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size < 2:
            raise ValueError("need at least two eigenvalues")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in lam))
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be ascending")
        if not lam[0] < lam[1]:
            raise ValueError("the smallest eigenvalue must be strictly separated")
        if np.any(lam >= 0):
            raise ValueError("all eigenvalues must be negative")
        if not 0 < self.r0 < self.r:
            raise ValueError("cap height must satisfy 0 < r0 < r")

    @property
    def lam(self) -> np.ndarray:
        return np.asarray(self.eigenvalues)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def rho(self) -> float:
        """Radius of the cap's boundary sphere, measured in the ``w`` plane."""
        return float(np.sqrt(self.r ** 2 - self.r0 ** 2))

    @property
    def ratio(self) -> float:
        lam = self.lam
        return float(lam[0] / lam[1])

    @property
    def predicted_exponent(self) -> float:
        return self.ratio - 1.0


def flow(sys: DiagonalSystem, z0, t) -> np.ndarray:
    """Exact flow map; ``t`` broadcasts against the leading axes of ``z0``."""
    z0 = np.asarray(z0, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    return z0 * np.exp(sys.lam * t)


def limit_tangent(sys: DiagonalSystem, z0) -> np.ndarray:
    """Limit of ``z(t) / |z(t)|`` as ``t -> inf``.

    The slowest surviving mode dominates: with ``j`` the largest index with a
    nonzero component, the limit is ``sign(z0[j]) e_j``. When several
    surviving indices share that eigenvalue, the limit is the normalized
    restriction of ``z0`` to them.
    """
    z0 = np.asarray(z0, dtype=float)
    alive = np.flatnonzero(z0 != 0.0)
    if alive.size == 0:
        raise UndefinedLimit("orbit of the origin has no limit direction")
    lam = sys.lam
    slow = alive[lam[alive] == lam[alive[-1]]]
    out = np.zeros_like(z0)
    out[slow] = z0[slow]
    return out / np.linalg.norm(out)


def velocity_direction(sys: DiagonalSystem, z0, t: float) -> np.ndarray:
    """Normalized velocity ``lam * z(t) / |lam * z(t)|``.

    Evaluated with every mode rescaled by ``exp(-lam_max t)`` so that long
    times do not underflow the slowest component.
    """
    z0 = np.asarray(z0, dtype=float)
    lam = sys.lam
    v = lam * z0 * np.exp((lam - lam.max()) * t)
    return v / np.linalg.norm(v)


def _w_norm(sys: DiagonalSystem, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != sys.n - 1:
        raise OutOfDomain(f"expected {sys.n - 1} transverse coordinates, got {w.shape[-1]}")
    if not np.all(np.isfinite(w)):
        raise OutOfDomain("non-finite transverse coordinates")
    return np.linalg.norm(w, axis=-1)


def f_upper(sys: DiagonalSystem, w) -> np.ndarray:
    """Power-law bound ``(|w| / rho)^(lam1/lam2) * r0`` on ``|w| <= rho``."""
    norm = _w_norm(sys, w)
    rho = sys.rho
    if np.any(norm > rho * (1 + 1e-12)):
        raise OutOfDomain(f"|w| exceeds rho = {rho:g}")
    return np.minimum(norm / rho, 1.0) ** sys.ratio * sys.r0


def cap_exit_time(sys: DiagonalSystem, w, iterations: int = 200) -> np.ndarray:
    """Time ``t >= 0`` at which the backward orbit of ``w`` reaches radius ``rho``.

    Solves ``sum_i w_i^2 exp(-2 lam_i t) = rho^2`` (strictly increasing in
    ``t``) by bisection, working with logarithms to avoid overflow. The
    bracket comes from replacing every rate by the slowest and by the
    fastest transverse rate; it collapses to the exact root when ``w`` has
    one component. Returns ``inf`` at ``w = 0``.
    """
    w = np.asarray(w, dtype=float)
    norm = _w_norm(sys, w)
    rho = sys.rho
    if np.any(norm > rho * (1 + 1e-12)):
        raise NotReached(f"|w| exceeds rho = {rho:g}: the orbit never lies on the cap boundary")
    rates = -sys.lam[1:]                       # positive, descending
    shape = norm.shape
    W = w.reshape(-1, sys.n - 1)
    nrm = norm.reshape(-1)
    t = np.full(nrm.shape, np.inf)
    live = nrm > 0
    if not live.any():
        return t.reshape(shape)
    with np.errstate(divide="ignore"):
        logw2 = np.log(W[live] ** 2)
        gap = np.maximum(np.log(rho) - np.log(nrm[live]), 0.0)
    lo = gap / rates[0]
    hi = gap / rates[-1]
    target = 2.0 * np.log(rho)

    def h(tt):
        terms = logw2 + 2.0 * rates * tt[:, None]
        return np.logaddexp.reduce(terms, axis=1) - target

    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if done.all():
            break
        up = h(mid) < 0
        lo = np.where(up & ~done, mid, lo)
        hi = np.where(~up & ~done, mid, hi)
    t[live] = 0.5 * (lo + hi)
    return t.reshape(shape)


def f_lower(sys: DiagonalSystem, w) -> np.ndarray:
    """Height of the flowed cap boundary above ``w``; zero at ``w = 0``."""
    t = cap_exit_time(sys, w)
    with np.errstate(invalid="ignore"):
        out = np.exp(sys.lam[0] * t) * sys.r0
    return np.where(np.isinf(t), 0.0, out)


def in_invariant_region(sys: DiagonalSystem, z) -> np.ndarray:
    """Membership in the forward-flow image of the upper cap (origin included)."""
    z = np.asarray(z, dtype=float)
    w = z[..., 1:]
    norm_w = np.linalg.norm(w, axis=-1)
    inside = (np.linalg.norm(z, axis=-1) <= sys.r) & (norm_w <= sys.rho)
    heights = np.zeros(norm_w.shape)
    if np.any(inside):
        heights[inside] = f_lower(sys, w[inside])
    return inside & (z[..., 0] >= heights)


# ---------------------------------------------------------------------------
# Volume scaling of the thin complement
# ---------------------------------------------------------------------------

@dataclass
class ScalingEstimate:
    deltas: np.ndarray
    ratios: np.ndarray
    hits: np.ndarray
    slope: float
    intercept: float
    predicted: float

    @property
    def deviation(self) -> float:
        return self.slope - self.predicted

    def rows(self):
        return list(zip(self.deltas.tolist(), self.ratios.tolist()))


def _below_upper(sys: DiagonalSystem, Z) -> np.ndarray:
    return Z[:, 0] < f_upper(sys, Z[:, 1:])


def _stratum_draw(rng, count, lower, upper, delta, n, block=4096):
    """Uniform points of ``{|z| <= delta, lower <= z[0] < upper}`` by rejection.

    Returns the points and the acceptance rate against the enclosing box.
    """
    got, tried = [], 0
    have = 0
    while have < count:
        Z = np.empty((block, n))
        Z[:, 0] = rng.uniform(lower, upper, block)
        Z[:, 1:] = rng.uniform(-delta, delta, (block, n - 1))
        ok = np.einsum("ij,ij->i", Z, Z) <= delta * delta
        tried += block
        got.append(Z[ok])
        have += int(ok.sum())
    pts = np.concatenate(got)[:count]
    return pts, have / tried


def hypograph_fraction(sys: DiagonalSystem, delta: float, samples: int, rng, strata: int = 20):
    """Monte Carlo volume fraction of the upper half-ball below ``f_upper``.

    The half-ball is cut into horizontal slabs whose heights halve towards
    the base, where the thin hypograph lives; each slab gets the same share
    of samples and is weighted by its estimated volume.
    Returns ``(fraction, hits)``.
    """
    n = sys.n
    edges = delta * np.concatenate([[0.0], 0.5 ** np.arange(strata - 1, -1, -1)])
    per = max(samples // strata, 1)
    vol = np.empty(strata)
    frac = np.empty(strata)
    hits = 0
    for k in range(strata):
        lo, hi = edges[k], edges[k + 1]
        pts, acc = _stratum_draw(rng, per, lo, hi, delta, n)
        below = _below_upper(sys, pts)
        hits += int(below.sum())
        vol[k] = (hi - lo) * (2 * delta) ** (n - 1) * acc
        frac[k] = below.mean()
    return float(np.dot(vol, frac) / vol.sum()), hits


def scaling_exponent_estimate(sys: DiagonalSystem, deltas: Sequence[float], samples: int = 100_000,
                              seed: int = 0, min_hits: int = 100) -> ScalingEstimate:
    """Fit the power law of the hypograph volume fraction against ``delta``."""
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size < 4 or np.any(np.diff(deltas) >= 0):
        raise ValueError("deltas must be strictly decreasing with at least 4 entries")
    if deltas[0] > sys.rho:
        raise ValueError(f"largest delta exceeds rho = {sys.rho:g}")
    ratios = np.empty(deltas.size)
    hits = np.empty(deltas.size, dtype=np.int64)
    for i, d in enumerate(deltas):
        ratios[i], hits[i] = hypograph_fraction(sys, d, samples, substream(seed, i))
        if hits[i] < min_hits:
            raise InsufficientSamples(f"delta={d:g}: only {hits[i]} hits (need {min_hits})")
    slope, intercept = np.polyfit(np.log(deltas), np.log(ratios), 1)
    return ScalingEstimate(deltas, ratios, hits, float(slope), float(intercept), sys.predicted_exponent)


# ---------------------------------------------------------------------------
# Union of two half-ball regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfBallGeometry:
    """Two regions, one per half-ball, split by the sign of the first coordinate.

    ``upper(Z)`` / ``lower(Z)`` are membership predicates; each region must
    meet the opposite half-ball only in a null set.
    """
    name: str
    upper: Callable[[np.ndarray], np.ndarray]
    lower: Callable[[np.ndarray], np.ndarray]
    n: int = 2


def cusp_geometry(sys: DiagonalSystem) -> HalfBallGeometry:
    """Upper half minus the hypograph of ``f_upper``, and its mirror image."""
    def upper(Z):
        return (Z[:, 0] > 0) & ~_below_upper(sys, Z)

    def lower(Z):
        M = Z.copy()
        M[:, 0] = -M[:, 0]
        return upper(M)

    return HalfBallGeometry("cusp", upper, lower, sys.n)


def whole_geometry(n: int = 2) -> HalfBallGeometry:
    return HalfBallGeometry("whole", lambda Z: Z[:, 0] >= 0, lambda Z: Z[:, 0] <= 0, n)


def empty_geometry(n: int = 2) -> HalfBallGeometry:
    none = lambda Z: np.zeros(len(Z), dtype=bool)
    return HalfBallGeometry("empty", none, none, n)


def _ball_points(rng, count, delta, n, half=0):
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    Z = g * (delta * rng.uniform(size=(count, 1)) ** (1.0 / n))
    if half:
        Z[:, 0] = half * np.abs(Z[:, 0])
    return Z


@dataclass
class MeasureUnionReport:
    geometry: str
    deltas: np.ndarray
    upper_ratio: np.ndarray
    lower_ratio: np.ndarray
    full_ratio: np.ndarray
    identity_error: np.ndarray     # |full deficit - mean of half deficits| per delta
    tolerance: float
    passed: bool

    def __bool__(self):
        return self.passed


def measure_union_check(geometry: HalfBallGeometry, deltas: Sequence[float], samples: int = 100_000,
                        seed: int = 0, tolerance: float = 0.01) -> MeasureUnionReport:
    """Check the complement-additivity of two half-ball regions by Monte Carlo.

    Half-ball and full-ball ratios come from independent draws. The check
    passes when at every ``delta`` the full-ball deficit equals the mean of
    the two half-ball deficits within ``tolerance``, and when half ratios
    that do not fall from the largest to the smallest ``delta`` leave the
    full ratio not falling either (again within ``tolerance``).
    """
    deltas = np.asarray(deltas, dtype=float)
    n = geometry.n
    up = np.empty(deltas.size)
    lo = np.empty(deltas.size)
    full = np.empty(deltas.size)
    for i, d in enumerate(deltas):
        up[i] = geometry.upper(_ball_points(substream(seed, i, 0), samples, d, n, +1)).mean()
        lo[i] = geometry.lower(_ball_points(substream(seed, i, 1), samples, d, n, -1)).mean()
        Z = _ball_points(substream(seed, i, 2), samples, d, n)
        top = Z[:, 0] >= 0
        member = np.where(top, geometry.upper(Z), geometry.lower(Z))
        full[i] = member.mean()
    err = np.abs((1 - full) - 0.5 * ((1 - up) + (1 - lo)))
    ok = bool(np.all(err <= tolerance))
    if deltas.size > 1:
        first, last = int(np.argmax(deltas)), int(np.argmin(deltas))
        halves_rise = min(up[last], lo[last]) >= min(up[first], lo[first]) - tolerance
        if halves_rise:
            ok &= bool(full[last] >= full[first] - tolerance)
    return MeasureUnionReport(geometry.name, deltas, up, lo, full, err, tolerance, ok)
