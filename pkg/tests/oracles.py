"""Independent reference computations used as test oracles.

Nothing here calls the integrator, the Newton search or the AD engine under
test; each routine works from plain function values.
"""

import math

import numpy as np


def central_gradient(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def central_jacobian(grad, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    n = len(x)
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return J


def rk4_descent(grad, x0, dt, stop, max_steps=2_000_000):
    """Fixed-step classical RK4 on x' = -grad(x) until ``stop(x)`` is true."""
    x = np.array(x0, dtype=float)
    for step in range(max_steps):
        if stop(x):
            return x, step * dt
        k1 = grad(x)
        k2 = grad(x - 0.5 * dt * k1)
        k3 = grad(x - 0.5 * dt * k2)
        k4 = grad(x - dt * k3)
        x = x - dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    raise RuntimeError("oracle did not stop")


def bisect_zeros_2d(grad, lower, upper, cells=48, width=1e-11, offset=0.0137):
    """Zeros of a planar vector field by recursive quartering of grid cells.

    A cell survives when both components take both signs (or zero) over a
    3x3 probe of the cell; survivors are split in four until they are
    narrower than ``width``. Returns the centres, merged within 1e-7.
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    step = (upper - lower) / cells
    live = []
    for i in range(cells):
        for j in range(cells):
            lo = lower + offset * step + np.array([i, j]) * step
            live.append((lo, step.copy()))

    def keeps(lo, size):
        ts = np.linspace(0.0, 1.0, 3)
        vals = np.array([grad(lo + size * np.array([a, b])) for a in ts for b in ts])
        return all(vals[:, k].min() <= 0.0 <= vals[:, k].max() for k in range(2))

    live = [(lo, s) for lo, s in live if keeps(lo, s)]
    while live and live[0][1].max() > width:
        nxt = []
        for lo, s in live:
            half = s / 2
            for a in (0, 1):
                for b in (0, 1):
                    sub = lo + half * np.array([a, b])
                    if keeps(sub, half):
                        nxt.append((sub, half))
        # the probe is inclusive, so neighbouring cells of one zero survive; cap the fan-out
        live = _dedupe_cells(nxt)
    centres = []
    for lo, s in live:
        c = lo + s / 2
        if all(np.linalg.norm(c - d) > 1e-7 for d in centres):
            centres.append(c)
    return centres


def _dedupe_cells(cells):
    seen, out = set(), []
    for lo, s in cells:
        key = tuple(np.round(lo / s).astype(np.int64))
        if key not in seen:
            seen.add(key)
            out.append((lo, s))
    return out


def torus_wrap(x, period=2 * math.pi):
    return np.mod(x, period)
