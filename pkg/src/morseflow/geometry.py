"""Charts, metrics, densities and the Riemannian gradient.

A :class:`Landscape` bundles everything the flow needs: a single-chart
manifold (flat torus, circle or an inward-flowing box), a scalar field F,
a metric field G, a reference density and the numerical tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import MetricNotSPD, NotInwardFlowing, RejectionOverflow, WrongManifold
from .field import Expr, _const, evaluate
from .rng import substream

TORUS, BOX, CIRCLE = "torus", "box", "circle"


@dataclass(frozen=True)
class Manifold:
    """Single-chart manifold: ``torus``/``circle`` (periodic) or ``box``."""

    kind: str
    n: int
    periods: Optional[tuple] = None
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None

    def __post_init__(self):
        if self.kind in (TORUS, CIRCLE):
            if self.periods is None or len(self.periods) != self.n:
                raise ValueError("periodic manifold needs one period per axis")
            if any(p <= 0 for p in self.periods):
                raise ValueError("periods must be positive")
            if self.kind == CIRCLE and self.n != 1:
                raise ValueError("a circle is one-dimensional")
        elif self.kind == BOX:
            if self.lower is None or self.upper is None:
                raise ValueError("box needs lower and upper bounds")
            if len(self.lower) != self.n or len(self.upper) != self.n:
                raise ValueError("box bounds must have length n")
            if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("box bounds must satisfy lower < upper")
        else:
            raise ValueError(f"unknown manifold kind {self.kind!r}")

    @classmethod
    def torus(cls, periods):
        periods = tuple(float(p) for p in periods)
        return cls(TORUS, len(periods), periods=periods)

    @classmethod
    def circle(cls, period=2 * np.pi):
        return cls(CIRCLE, 1, periods=(float(period),))

    @classmethod
    def box(cls, lower, upper):
        lower = tuple(float(v) for v in lower)
        upper = tuple(float(v) for v in upper)
        return cls(BOX, len(lower), lower=lower, upper=upper)

    @property
    def periodic(self) -> bool:
        return self.kind != BOX

    @cached_property
    def _period_array(self):
        return np.asarray(self.periods, dtype=float)

    def wrap(self, X):
        """Normalise periodic coordinates to [0, L); boxes are returned unchanged."""
        X = np.asarray(X, dtype=float)
        if not self.periodic:
            return X
        L = self._period_array
        W = np.mod(X, L)
        # mod can round up to exactly L for tiny negative inputs
        return np.where(W >= L, W - L, W)

    def displacement(self, x, y):
        """Minimum-image vector from ``x`` to ``y``."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        if self.periodic:
            L = self._period_array
            d = d - L * np.round(d / L)
        return d

    def distance(self, x, y):
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    def contains(self, X, slack=0.0):
        if self.periodic:
            return np.ones(np.atleast_2d(X).shape[0], dtype=bool)
        X = np.atleast_2d(X)
        lo = np.asarray(self.lower) - slack
        hi = np.asarray(self.upper) + slack
        return np.all((X >= lo) & (X <= hi), axis=1)

    def bounds(self):
        """Chart extent as (lower, upper) arrays."""
        if self.periodic:
            return np.zeros(self.n), self._period_array.copy()
        return np.asarray(self.lower, dtype=float), np.asarray(self.upper, dtype=float)

    def grid(self, per_axis: int):
        """Seed nodes: lattice on the torus, cell centres in a box."""
        lo, hi = self.bounds()
        axes = []
        for a, b in zip(lo, hi):
            step = (b - a) / per_axis
            offset = 0.0 if self.periodic else 0.5 * step
            axes.append(a + offset + step * np.arange(per_axis))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def volume(self) -> float:
        lo, hi = self.bounds()
        return float(np.prod(hi - lo))

    def sample_uniform(self, rng, count):
        lo, hi = self.bounds()
        return lo + (hi - lo) * rng.random((count, self.n))

    def to_record(self):
        if self.kind == BOX:
            return {"kind": BOX, "bounds": [[lo, hi] for lo, hi in zip(self.lower, self.upper)]}
        if self.kind == CIRCLE:
            return {"kind": CIRCLE, "period": self.periods[0]}
        return {"kind": TORUS, "periods": list(self.periods)}


def distance(M: Manifold, x, y) -> float:
    """Chart-Euclidean distance, minimum image on periodic axes."""
    return float(M.distance(np.asarray(x, float), np.asarray(y, float)))


class MetricField:
    """Riemannian metric G(x), either the identity or a symmetric matrix of expressions."""

    def __init__(self, n: int, entries=None):
        self.n = n
        self._upper = None
        self._constant = None
        if entries is None:
            self._constant = np.eye(n)
            self.is_identity = True
            return
        if len(entries) != n or any(len(row) != n for row in entries):
            raise ValueError(f"metric must be a {n}x{n} matrix")
        for i in range(n):
            for j in range(i + 1, n):
                if entries[i][j] != entries[j][i]:
                    raise ValueError(f"metric entries ({i},{j}) and ({j},{i}) differ")
        self._upper = [(i, j, entries[i][j]) for i in range(n) for j in range(i, n)]
        consts = [_const(e.root) for _, _, e in self._upper]
        if all(c is not None for c in consts):
            G = np.empty((n, n))
            for (i, j, _), c in zip(self._upper, consts):
                G[i, j] = G[j, i] = c
            self._constant = G
        self.is_identity = self._constant is not None and np.array_equal(self._constant, np.eye(n))
        self.entries = entries

    @classmethod
    def identity(cls, n):
        return cls(n)

    @property
    def is_constant(self) -> bool:
        return self._constant is not None

    @cached_property
    def _constant_inverse(self):
        G = self._constant
        self._check_spd(G[None], np.zeros((1, self.n)))
        return np.linalg.inv(G)

    @staticmethod
    def _check_spd(G, X):
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            bad = np.linalg.eigvalsh(G).min(axis=1) <= 0
            row = int(np.argmax(bad)) if bad.any() else 0
            raise MetricNotSPD(np.atleast_2d(X)[min(row, len(X) - 1)]) from None

    def matrices(self, X):
        """G at each point of a batch, shape (B, n, n); SPD is verified."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        B = X.shape[0]
        if self._constant is not None:
            self._constant_inverse  # noqa: B018 - validates SPD once
            return np.broadcast_to(self._constant, (B, self.n, self.n)).copy()
        G = np.empty((B, self.n, self.n))
        for i, j, e in self._upper:
            v = evaluate(e, X, order=1)[0]
            G[:, i, j] = v
            G[:, j, i] = v
        self._check_spd(G, X)
        return G

    def raise_index(self, X, dF):
        """Solve G(x) v = dF for each row; this is the Riemannian gradient."""
        if self.is_identity:
            return dF
        if self._constant is not None:
            return dF @ self._constant_inverse.T
        G = self.matrices(X)
        return np.linalg.solve(G, dF[..., None])[..., 0]


@dataclass(frozen=True)
class ToleranceSet:
    grad_tol: float = 1e-9
    dedup_radius: float = 1e-5
    gap_rel_tol: float = 1e-6
    capture_radius: float = 1e-3
    ode_rel_tol: float = 1e-9
    ode_abs_tol: float = 1e-12
    t_max: float = 1e4

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be strictly positive, got {value}")

    def tightened(self, factor: float = 10.0) -> "ToleranceSet":
        """Integrator tolerances divided by ``factor``; geometry tolerances kept."""
        return ToleranceSet(
            grad_tol=self.grad_tol,
            dedup_radius=self.dedup_radius,
            gap_rel_tol=self.gap_rel_tol,
            capture_radius=self.capture_radius,
            ode_rel_tol=self.ode_rel_tol / factor,
            ode_abs_tol=self.ode_abs_tol / factor,
            t_max=self.t_max,
        )


@dataclass(frozen=True, eq=False)
class Landscape:
    """The pair (F, g) on a chart, with density and tolerances."""

    manifold: Manifold
    F: Expr
    metric: MetricField = None
    density: Optional[Expr] = None  # None means the Riemannian volume density
    tolerances: ToleranceSet = dc_field(default_factory=ToleranceSet)
    name: str = ""

    def __post_init__(self):
        if self.F.n != self.manifold.n:
            raise ValueError(f"F has {self.F.n} variables but the manifold has dimension {self.manifold.n}")
        if self.metric is None:
            object.__setattr__(self, "metric", MetricField.identity(self.manifold.n))
        if self.metric.n != self.manifold.n:
            raise ValueError("metric dimension does not match the manifold")

    @property
    def n(self) -> int:
        return self.manifold.n

    def with_tolerances(self, tolerances: ToleranceSet) -> "Landscape":
        return Landscape(self.manifold, self.F, self.metric, self.density, tolerances, self.name)

    def value_and_gradient(self, X):
        """F and the Riemannian gradient G^-1 dF on a batch of points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F, dF, _ = evaluate(self.F, X, order=1)
        return F, self.metric.raise_index(X, dF)

    @property
    def uniform_density(self) -> bool:
        if self.density is None:
            return self.metric.is_constant
        return _const(self.density.root) is not None

    def density_at(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.density is None:
            if self.metric.is_identity:
                return np.ones(X.shape[0])
            return np.sqrt(np.linalg.det(self.metric.matrices(X)))
        mu = evaluate(self.density, X, order=1)[0]
        if np.any(mu <= 0):
            row = int(np.argmax(mu <= 0))
            raise ValueError(f"density is not positive at {list(X[row])}")
        return mu


def riemannian_gradient(L: Landscape, x) -> np.ndarray:
    """G(x)^-1 dF(x): the vector satisfying g(grad F, X) = dF . X."""
    return L.value_and_gradient(np.asarray(x, dtype=float)[None, :])[1][0]


class BallSampler:
    """Draw points of B_delta(p) with law proportional to the landscape density.

    Candidates are uniform in the cube [p - delta, p + delta]^n; a candidate
    is kept if it lies in the ball and, for non-uniform densities, passes a
    second rejection against a bound on the density over the ball.
    """

    BLOCK = 64
    MAX_CANDIDATES = 100_000

    def __init__(self, L: Landscape, p, delta: float):
        if not delta > 0:
            raise ValueError("radius must be positive")
        self.L = L
        self.p = np.asarray(p, dtype=float)
        self.delta = float(delta)
        self.candidates = 0
        self.accepted = 0
        self._mu_max = None
        if not L.uniform_density:
            probe = self._probe_points()
            self._mu_max = 1.25 * float(L.density_at(probe).max())

    def _probe_points(self):
        n = self.L.n
        ticks = np.linspace(-1.0, 1.0, 9 if n <= 3 else 5)
        mesh = np.stack([m.reshape(-1) for m in np.meshgrid(*([ticks] * n))], axis=1)
        mesh = mesh[np.linalg.norm(mesh, axis=1) <= 1.0]
        return self.L.manifold.wrap(self.p + self.delta * mesh)

    @property
    def acceptance(self) -> float:
        return self.accepted / self.candidates if self.candidates else float("nan")

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        n = self.L.n
        tried = 0
        while tried < self.MAX_CANDIDATES:
            U = rng.uniform(-1.0, 1.0, size=(self.BLOCK, n))
            tried += self.BLOCK
            inside = np.einsum("ij,ij->i", U, U) <= 1.0
            if self._mu_max is not None:
                X = self.L.manifold.wrap(self.p + self.delta * U)
                coin = rng.random(self.BLOCK)
                mu = self.L.density_at(X)
                if np.any(mu > self._mu_max):
                    self._mu_max = 1.25 * float(mu.max())
                inside &= coin * self._mu_max <= mu
            hits = np.flatnonzero(inside)
            if hits.size:
                used = int(hits[0]) + 1
                self.candidates += used + (tried - self.BLOCK)
                self.accepted += 1
                return self.L.manifold.wrap(self.p + self.delta * U[hits[0]])
        self.candidates += tried
        raise RejectionOverflow(
            f"no acceptance after {tried} candidates around {list(self.p)} (rate < 1e-4)"
        )


def sample_ball(L: Landscape, p, delta: float, rng: np.random.Generator) -> np.ndarray:
    """One density-weighted point of the chart ball B_delta(p)."""
    return BallSampler(L, p, delta).draw(rng)


@dataclass
class InvarianceReport:
    min_margin: float
    worst_point: np.ndarray
    checked: int


def check_invariance(L: Landscape, samples: int = 256, seed: int = 0) -> InvarianceReport:
    """Verify that -grad F points strictly into the box on its boundary.

    The margin at a boundary point is ``<grad F, outward normal>``; it must be
    positive everywhere. Corners are checked against every adjacent face.
    """
    M = L.manifold
    if M.kind != BOX:
        raise WrongManifold(f"invariance check needs a box manifold, got {M.kind}")
    lo, hi = M.bounds()
    n = M.n
    rng = substream(seed, 0)
    worst_margin, worst_point, checked = np.inf, None, 0
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(n, -1).T
    for axis in range(n):
        for side, value in ((-1.0, lo[axis]), (1.0, hi[axis])):
            P = lo + (hi - lo) * rng.random((samples, n))
            P = np.vstack([P, corners])
            P[:, axis] = value
            _, grad = L.value_and_gradient(P)
            margin = side * grad[:, axis]
            checked += len(P)
            k = int(np.argmin(margin))
            if margin[k] < worst_margin:
                worst_margin, worst_point = float(margin[k]), P[k].copy()
            if margin[k] <= 0:
                raise NotInwardFlowing(P[k], -margin[k])
    return InvarianceReport(worst_margin, worst_point, checked)
