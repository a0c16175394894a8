"""Gradient descent/ascent trajectories, principal flow lines and basins.

Trajectories are integrated with the Dormand-Prince 5(4) pair under
mixed relative/absolute error control. Many initial conditions advance
together as one batch, but each row keeps its own step size and accept
decisions, so a trajectory's result does not depend on its batch-mates.
A trajectory terminates when it is both within ``capture_radius`` of a
critical point and the gradient norm has dropped below ``10 * grad_tol``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .critical import (MAXIMUM, MINIMUM, SADDLE, CriticalPoint, CriticalSet, NonSimpleTie,
                       simplicity_gap)
from .errors import LeftDomain, NonSimpleInput, SeedTooLarge, StepUnderflow, Unresolved
from .geometry import Landscape
from .io import atomic_write

DESCENT, ASCENT = "descent", "ascent"
CONVERGED, TIMED_OUT = "converged", "timed_out"

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

MIN_STEP = 1e-14
CHUNK = 512


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    values: np.ndarray
    status: str                      # CONVERGED or TIMED_OUT
    critical_id: Optional[int]       # set when converged
    total_time: float
    monotonicity_margin: float       # largest per-step increase of F along descent

    @property
    def terminal(self):
        return (self.status, self.critical_id)

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


@dataclass
class BatchResult:
    status: np.ndarray          # 1 converged, 0 timed out
    critical_id: np.ndarray     # -1 when unresolved
    final: np.ndarray
    time: np.ndarray
    monotonicity: np.ndarray
    steps: np.ndarray

    @property
    def converged(self):
        return self.status == 1


def _flow_field(L: Landscape, sign: float):
    def f(X):
        F, g = L.value_and_gradient(X)
        return F, sign * g
    return f


def _integrate_batch(L: Landscape, X0, critset: CriticalSet, direction: str, record: bool = False):
    if direction not in (DESCENT, ASCENT):
        raise ValueError(f"direction must be {DESCENT!r} or {ASCENT!r}")
    tol = L.tolerances
    M = L.manifold
    sign = -1.0 if direction == DESCENT else 1.0
    f = _flow_field(L, sign)
    rtol, atol, t_max = tol.ode_rel_tol, tol.ode_abs_tol, tol.t_max
    grad_cap = 10.0 * tol.grad_tol

    X0 = M.wrap(np.atleast_2d(np.asarray(X0, dtype=float)))
    B, n = X0.shape
    out_status = np.zeros(B, dtype=np.int8)
    out_id = np.full(B, -1, dtype=np.int64)
    out_x = X0.copy()
    out_t = np.zeros(B)
    out_mono = np.full(B, -np.inf)
    out_steps = np.zeros(B, dtype=np.int64)

    idx = np.arange(B)
    X = X0.copy()
    F, K1 = f(X)
    t = np.zeros(B)
    h = np.full(B, 1e-2)
    mono = np.full(B, -np.inf)
    steps = np.zeros(B, dtype=np.int64)
    path = [(0.0, X0[0].copy(), float(F[0]))] if record else None

    def captured(Xc, Kc):
        ids, dist = critset.nearest(Xc)
        hit = (dist <= tol.capture_radius) & (np.linalg.norm(Kc, axis=1) <= grad_cap)
        return hit, ids

    def retire(rows, status):
        nonlocal idx, X, F, K1, t, h, mono, steps
        if not rows.any():
            return
        r = idx[rows]
        out_status[r] = status
        out_x[r] = X[rows]
        out_t[r] = t[rows]
        out_mono[r] = mono[rows]
        out_steps[r] = steps[rows]
        keep = ~rows
        idx, X, F, K1, t, h, mono, steps = (a[keep] for a in (idx, X, F, K1, t, h, mono, steps))

    hit, ids = captured(X, K1)
    out_id[idx[hit]] = ids[hit]
    retire(hit, 1)

    while idx.size:
        h = np.minimum(h, t_max - t)
        hc = h[:, None]
        K = [K1]
        for s in range(1, 7):
            Xs = X + hc * sum(a * K[j] for j, a in enumerate(_A[s]) if a != 0.0)
            Fs, Ks = f(Xs)
            K.append(Ks)
        Xn = Xs  # stage 7 is evaluated at the 5th-order solution (FSAL)
        Fn, Kn = Fs, Ks
        err_vec = hc * sum(e * K[j] for j, e in enumerate(_E) if e != 0.0)
        scale = atol + rtol * np.maximum(np.abs(X), np.abs(Xn))
        with np.errstate(over="ignore"):  # an infinite error just rejects the step
            err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        accept = err <= 1.0
        with np.errstate(divide="ignore"):
            factor = np.where(err == 0.0, 5.0, 0.9 * err ** -0.2)
        factor = np.clip(factor, 0.2, 5.0)
        factor = np.where(accept, factor, np.minimum(factor, 1.0))

        if accept.any():
            a = accept
            rise = (Fn[a] - F[a]) if direction == DESCENT else (F[a] - Fn[a])
            mono[a] = np.maximum(mono[a], rise)
            X[a] = M.wrap(Xn[a])
            F[a] = Fn[a]
            K1[a] = Kn[a]
            t[a] = t[a] + h[a]
            steps[a] += 1
            if M.kind == "box":
                outside = ~M.contains(X[a], slack=1e-12)
                if outside.any():
                    raise LeftDomain(X[a][outside][0])
            if record and a[0]:
                path.append((float(t[0]), X[0].copy(), float(F[0])))
        h = h * factor
        tiny = h < MIN_STEP
        if tiny.any():
            k = int(np.argmax(tiny))
            raise StepUnderflow(X[k], float(t[k]))

        hit, ids = captured(X, K1)
        hit &= accept
        out_id[idx[hit]] = ids[hit]
        retire(hit, 1)
        retire(t >= t_max, 0)

    result = BatchResult(out_status, out_id, out_x, out_t, out_mono, out_steps)
    return result, path


def integrate(L: Landscape, x0, direction: str, critset: CriticalSet) -> Trajectory:
    """Integrate one gradient trajectory until capture or ``t_max``."""
    res, path = _integrate_batch(L, np.asarray(x0, dtype=float)[None, :], critset, direction, record=True)
    times = np.array([p[0] for p in path])
    points = np.array([p[1] for p in path])
    values = np.array([p[2] for p in path])
    status = CONVERGED if res.status[0] == 1 else TIMED_OUT
    cid = int(res.critical_id[0]) if status == CONVERGED else None
    mono = float(res.monotonicity[0]) if np.isfinite(res.monotonicity[0]) else 0.0
    return Trajectory(times, points, values, status, cid, float(res.time[0]), mono)


def integrate_many(L: Landscape, X0, critset: CriticalSet, direction: str = DESCENT,
                   threads: int = 1, chunk: int = CHUNK) -> BatchResult:
    """Batch integration in fixed-size chunks.

    Chunk boundaries do not depend on ``threads``, so results are identical
    for any worker count.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    starts = range(0, len(X0), chunk)
    work = lambda s: _integrate_batch(L, X0[s:s + chunk], critset, direction)[0]
    if threads > 1 and len(X0) > chunk:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    if not parts:
        empty = np.empty(0)
        return BatchResult(empty.astype(np.int8), empty.astype(np.int64), X0.copy(),
                           empty, empty, empty.astype(np.int64))
    return BatchResult(*(np.concatenate([getattr(p, k) for p in parts])
                         for k in ("status", "critical_id", "final", "time", "monotonicity", "steps")))


def classify_point(L: Landscape, x, critset: CriticalSet) -> int:
    """Id of the critical point that the descent trajectory from ``x`` reaches."""
    res, _ = _integrate_batch(L, np.asarray(x, dtype=float)[None, :], critset, DESCENT)
    if res.status[0] != 1:
        raise Unresolved(np.asarray(x, dtype=float), TIMED_OUT)
    return int(res.critical_id[0])


def classify_points(L: Landscape, X, critset: CriticalSet, threads: int = 1) -> np.ndarray:
    """Batch version of :func:`classify_point`; unresolved rows get -1."""
    res = integrate_many(L, X, critset, DESCENT, threads=threads)
    return np.where(res.converged, res.critical_id, -1)


# ---------------------------------------------------------------------------
# Principal flow lines
# ---------------------------------------------------------------------------

MINIMUM_REACHED, SADDLE_HIT, MAXIMUM_HIT, UNRESOLVED = "minimum", "saddle_hit", "maximum_hit", "unresolved"


@dataclass
class PrincipalFlowLine:
    maximum_id: int
    sign: str                     # "+" or "-"
    eps_seed: float
    seed: np.ndarray
    trajectory: Trajectory
    outcome: str                  # MINIMUM_REACHED, SADDLE_HIT, MAXIMUM_HIT or UNRESOLVED
    terminal_id: Optional[int]

    @property
    def terminal_minimum(self) -> Optional[int]:
        return self.terminal_id if self.outcome == MINIMUM_REACHED else None

    @property
    def saddle_hit(self) -> bool:
        return self.outcome == SADDLE_HIT

    def to_record(self) -> dict:
        return {"maximum": self.maximum_id, "sign": self.sign, "eps_seed": self.eps_seed,
                "outcome": self.outcome, "terminal": self.terminal_id,
                "time": self.trajectory.total_time}


def default_seed_offset(critset: CriticalSet, p: CriticalPoint) -> float:
    return 1e-4 * critset.separation(p.id) if len(critset) > 1 else 1e-4


def trace_principal(L: Landscape, p: CriticalPoint, critset: CriticalSet,
                    eps_seed: Optional[float] = None):
    """Trace the two principal flow lines of a simple maximum.

    Each line is followed in reverse, as a descent trajectory from
    ``p +- eps_seed * v1``. Returns ``(plus, minus)``.
    """
    verdict = simplicity_gap(p, L.tolerances.gap_rel_tol)
    if isinstance(verdict, NonSimpleTie):
        raise NonSimpleInput(f"maximum {p.id} has a tied smallest eigenvalue "
                             f"(gap_rel={verdict.gap_rel:.3g})", [p.id])
    v1 = verdict.v1
    sep = critset.separation(p.id)
    if eps_seed is None:
        eps_seed = default_seed_offset(critset, p)
    if eps_seed > 0.5 * sep:
        raise SeedTooLarge(f"seed offset {eps_seed:g} exceeds half the distance {sep:g} "
                           f"to the nearest other critical point")
    lines = []
    for sign, s in (("+", 1.0), ("-", -1.0)):
        seed = L.manifold.wrap(p.location + s * eps_seed * v1)
        traj = integrate(L, seed, DESCENT, critset)
        if traj.status != CONVERGED:
            outcome, tid = UNRESOLVED, None
        else:
            tid = traj.critical_id
            outcome = {MINIMUM: MINIMUM_REACHED, SADDLE: SADDLE_HIT,
                       MAXIMUM: MAXIMUM_HIT}[critset[tid].kind]
        lines.append(PrincipalFlowLine(p.id, sign, float(eps_seed), seed, traj, outcome, tid))
    return tuple(lines)


def trace_all(L: Landscape, critset: CriticalSet, eps_seed: Optional[float] = None):
    """Principal flow lines of every maximum, ordered by maximum id then sign."""
    lines = []
    for p in critset.maxima:
        lines.extend(trace_principal(L, p, critset, eps_seed))
    return lines


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Dump accepted steps as ``t,x1..xn,F``."""
    n = traj.points.shape[1]
    header = "t," + ",".join(f"x{i + 1}" for i in range(n)) + ",F"
    data = np.column_stack([traj.times, traj.points, traj.values])
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in data]
    atomic_write(path, "\n".join(lines) + "\n")
