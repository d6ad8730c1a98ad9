"""Box-constrained Nelder-Mead with restarts and a deterministic multistart."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    nfev: int
    converged: bool
    history: list[float] = field(default_factory=list)  # best cost after each iteration
    seed_index: int = 0


def _project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def nelder_mead_box(
    fun: Callable[[np.ndarray], float],
    x0: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    *,
    xatol: float = 1e-8,
    fatol: float = 1e-10,
    maxfev: int = 50_000,
    initial_step: float = 0.05,
    max_restarts: int = 20,
) -> OptimizeResult:
    """Minimize ``fun`` over a box with a projected Nelder-Mead simplex.

    Every trial vertex is projected onto the box before evaluation. After
    the simplex collapses the search restarts from the best vertex with a
    fresh simplex; it stops once a restart no longer improves the cost by
    more than ``fatol``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = _project(np.asarray(x0, dtype=float), lower, upper)
    n = x0.size
    span = np.where(np.isfinite(upper - lower), upper - lower, np.maximum(1.0, np.abs(x0)))

    nfev = 0
    history: list[float] = []

    def f(x):
        nonlocal nfev
        nfev += 1
        val = float(fun(x))
        return val if np.isfinite(val) else np.inf

    def run_simplex(start, fstart, step):
        sim = np.empty((n + 1, n))
        fs = np.empty(n + 1)
        sim[0], fs[0] = start, fstart
        for i in range(n):
            v = start.copy()
            d = step * span[i]
            v[i] = v[i] + d if v[i] + d <= upper[i] else v[i] - d
            sim[i + 1] = _project(v, lower, upper)
            fs[i + 1] = f(sim[i + 1])
        while nfev < maxfev:
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            history.append(min(fs[0], history[-1]) if history else fs[0])
            size = np.max(np.abs(sim[1:] - sim[0]))
            if size <= xatol or (fs[-1] - fs[0]) <= fatol * max(1.0, abs(fs[0])) and size <= 1e3 * xatol:
                return sim[0], fs[0], True
            centroid = sim[:-1].mean(axis=0)
            xr = _project(2 * centroid - sim[-1], lower, upper)
            fr = f(xr)
            if fr < fs[0]:
                xe = _project(3 * centroid - 2 * sim[-1], lower, upper)
                fe = f(xe)
                sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            elif fr < fs[-2]:
                sim[-1], fs[-1] = xr, fr
            else:
                if fr < fs[-1]:
                    xc = _project(centroid + 0.5 * (xr - centroid), lower, upper)
                else:
                    xc = _project(centroid + 0.5 * (sim[-1] - centroid), lower, upper)
                fc = f(xc)
                if fc < min(fr, fs[-1]):
                    sim[-1], fs[-1] = xc, fc
                else:
                    for i in range(1, n + 1):
                        sim[i] = _project(sim[0] + 0.5 * (sim[i] - sim[0]), lower, upper)
                        fs[i] = f(sim[i])
        order = np.argsort(fs, kind="stable")
        return sim[order[0]], fs[order[0]], False

    best_x, best_f = x0, f(x0)
    converged = False
    step = initial_step
    for _ in range(max_restarts + 1):
        x, fx, ok = run_simplex(best_x, best_f, step)
        improved = best_f - fx
        if fx <= best_f:
            best_x, best_f = x, fx
        converged = ok
        if not ok or improved <= fatol * max(1.0, abs(best_f)):
            break
        step = max(step * 0.5, 1e-4)
    return OptimizeResult(best_x, best_f, nfev, converged, history)


def multistart(
    fun: Callable[[np.ndarray], float],
    seeds: Sequence[Sequence[float]],
    lower: Sequence[float],
    upper: Sequence[float],
    **kwargs,
) -> OptimizeResult:
    """Run :func:`nelder_mead_box` from each seed; lowest cost wins, ties to the first seed."""
    best: OptimizeResult | None = None
    total = 0
    for i, seed in enumerate(seeds):
        res = nelder_mead_box(fun, seed, lower, upper, **kwargs)
        res.seed_index = i
        total += res.nfev
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None
    best.nfev = total
    return best


def scattered_seeds(
    anchor: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
    count: int,
    seed: int = 0,
    spread: float = 0.25,
) -> list[np.ndarray]:
    """``anchor`` followed by ``count - 1`` deterministic jittered copies inside the box."""
    rng = np.random.default_rng(seed)
    anchor = np.asarray(anchor, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    span = np.where(np.isfinite(upper - lower), upper - lower, 1.0)
    out = [_project(anchor, lower, upper)]
    for _ in range(count - 1):
        out.append(_project(anchor + spread * span * rng.uniform(-1, 1, anchor.size), lower, upper))
    return out
