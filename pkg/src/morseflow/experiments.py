"""Monte Carlo concentration of basins around a simple maximum.

For each radius ``delta`` a fixed number of density-weighted points of the
ball around the maximum are classified by descent. The concentration
fraction is the share of resolved points whose terminal is one of the two
minima reached by the maximum's principal flow lines.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .critical import MAXIMUM, CriticalSet, find_critical_points
from .errors import NonSimpleInput, TooManyUnresolved
from .flow import MINIMUM_REACHED, classify_points, trace_principal
from .geometry import BallSampler, Landscape
from .rng import check_seed, substream

UNRESOLVED_CAP = 1e-3
SLOW_EXPONENT = 0.25


def wilson_interval(successes: int, trials: int, level: float = 0.95):
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def default_deltas(largest: float, count: int = 4) -> List[float]:
    """Geometric list with ratio 1/2."""
    return [largest * 0.5 ** k for k in range(count)]


@dataclass
class DeltaRow:
    delta: float
    n: int
    counts: Dict[int, int]       # terminal id -> count (resolved samples only)
    unresolved: int
    f: float
    wilson_lo: float
    wilson_hi: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.wilson_hi - self.wilson_lo)


@dataclass
class ConcentrationReport:
    maximum: int
    m_plus: int
    m_minus: int
    seed: int
    rows: List[DeltaRow] = field(default_factory=list)

    @property
    def deltas(self) -> List[float]:
        return [r.delta for r in self.rows]

    @property
    def fractions(self) -> np.ndarray:
        return np.array([r.f for r in self.rows])

    def monotone_within_noise(self) -> bool:
        """f never drops by more than twice the Wilson half-width as delta shrinks."""
        for a, b in zip(self.rows, self.rows[1:]):
            if b.f < a.f - 2.0 * max(a.half_width, b.half_width):
                return False
        return True

    def to_csv(self) -> str:
        out = ["delta,N,f,wilson_lo,wilson_hi,unresolved"]
        for r in self.rows:
            out.append(f"{r.delta!r},{r.n},{r.f!r},{r.wilson_lo!r},{r.wilson_hi!r},{r.unresolved}")
        return "\n".join(out) + "\n"

    def to_record(self) -> dict:
        return {
            "maximum": self.maximum,
            "m_plus": self.m_plus,
            "m_minus": self.m_minus,
            "seed": self.seed,
            "rows": [
                {"delta": r.delta, "N": r.n, "counts": {str(k): v for k, v in sorted(r.counts.items())},
                 "unresolved": r.unresolved, "f": r.f, "wilson": [r.wilson_lo, r.wilson_hi]}
                for r in self.rows
            ],
        }


def _principal_terminals(L: Landscape, critset: CriticalSet, pid: int, eps_seed=None):
    p = critset[pid]
    if p.kind != MAXIMUM:
        raise ValueError(f"critical point {pid} is a {p.kind}, not a maximum")
    plus, minus = trace_principal(L, p, critset, eps_seed)
    bad = [line for line in (plus, minus) if line.outcome != MINIMUM_REACHED]
    if bad:
        raise NonSimpleInput(f"maximum {pid}: principal line {bad[0].sign} ends with "
                             f"{bad[0].outcome}", [pid])
    return p, plus.terminal_id, minus.terminal_id


def draw_ball(L: Landscape, center, delta: float, count: int, seed: int, stream: int) -> np.ndarray:
    """``count`` density-weighted ball points, one substream per sample index."""
    sampler = BallSampler(L, center, delta)
    return np.array([sampler.draw(substream(seed, stream, j)) for j in range(count)])


def run_concentration(L: Landscape, pid: int, deltas: Sequence[float], samples: int, seed: int = 0,
                      critset: Optional[CriticalSet] = None, threads: int = 1,
                      eps_seed: Optional[float] = None) -> ConcentrationReport:
    seed = check_seed(seed)
    critset = critset if critset is not None else find_critical_points(L)
    p, m_plus, m_minus = _principal_terminals(L, critset, pid, eps_seed)
    deltas = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    sep = critset.separation(pid)
    if deltas and deltas[0] >= 0.5 * sep:
        raise ValueError(f"largest delta {deltas[0]:g} is not below half the distance {sep:g} "
                         f"to the nearest other critical point")
    targets = {m_plus, m_minus}
    report = ConcentrationReport(pid, m_plus, m_minus, seed)
    for i, delta in enumerate(deltas):
        X = draw_ball(L, p.location, delta, samples, seed, i)
        ids = classify_points(L, X, critset, threads=threads)
        unresolved = int(np.sum(ids < 0))
        if unresolved > UNRESOLVED_CAP * samples:
            raise TooManyUnresolved(f"delta={delta:g}: {unresolved} of {samples} trajectories unresolved")
        counts = Counter(int(k) for k in ids[ids >= 0])
        resolved = samples - unresolved
        hits = sum(counts[m] for m in targets)
        lo, hi = wilson_interval(hits, resolved)
        f = hits / resolved if resolved else float("nan")
        report.rows.append(DeltaRow(delta, samples, dict(sorted(counts.items())), unresolved, f, lo, hi))
    return report


@dataclass
class ScalingComparison:
    report: ConcentrationReport
    eigenvalue_ratio: float
    predicted: float
    fitted: Optional[float]          # slope of log(1 - f) against log(delta)
    constant: Optional[float]        # c in c * delta^predicted, fitted on log scale
    slow_convergence: bool

    @property
    def deviation(self) -> Optional[float]:
        return None if self.fitted is None else self.fitted - self.predicted

    def table(self):
        rows = []
        for r in self.report.rows:
            model = None if self.constant is None else self.constant * r.delta ** self.predicted
            rows.append((r.delta, 1.0 - r.f, model))
        return rows

    def to_csv(self) -> str:
        out = ["delta,complement,model"]
        for d, comp, model in self.table():
            out.append(f"{d!r},{comp!r},{'' if model is None else repr(model)}")
        return "\n".join(out) + "\n"

    def to_record(self) -> dict:
        return {
            "eigenvalue_ratio": self.eigenvalue_ratio,
            "predicted_exponent": self.predicted,
            "fitted_exponent": self.fitted,
            "constant": self.constant,
            "slow_convergence": self.slow_convergence,
            "table": [{"delta": d, "complement": c, "model": m} for d, c, m in self.table()],
            "concentration": self.report.to_record(),
        }


def run_scaling_comparison(L: Landscape, pid: int, deltas: Sequence[float], samples: int,
                           seed: int = 0, critset: Optional[CriticalSet] = None,
                           threads: int = 1) -> ScalingComparison:
    """Compare the decay of ``1 - f(delta)`` with the linear-model power law."""
    critset = critset if critset is not None else find_critical_points(L)
    report = run_concentration(L, pid, deltas, samples, seed, critset, threads)
    lam = critset[pid].eigenvalues
    ratio = float(lam[0] / lam[1])
    predicted = ratio - 1.0
    d = np.array(report.deltas)
    comp = 1.0 - report.fractions
    keep = comp > 0
    fitted = constant = None
    if keep.sum() >= 2:
        fitted = float(np.polyfit(np.log(d[keep]), np.log(comp[keep]), 1)[0])
        constant = float(np.exp(np.mean(np.log(comp[keep]) - predicted * np.log(d[keep]))))
    return ScalingComparison(report, ratio, predicted, fitted, constant, predicted < SLOW_EXPONENT)
