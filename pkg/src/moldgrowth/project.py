"""Projection of integer mold observations onto continuous curve families.

Two families are supported: the piecewise-linear ``g`` (ramp to 1, ramp
to the maximum, plateau) used for the VTT fits, and the logistic ``h``
used for the logistic model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .integrate import TimeGrid, Trajectory


@dataclass
class ObservedSeries:
    times: np.ndarray
    indices: np.ndarray
    humidity: float
    temperature: float
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        idx = np.asarray(self.indices)
        if idx.size and not np.all(np.equal(np.mod(idx, 1), 0)):
            raise ValueError("mold indices must be integers")
        self.indices = idx.astype(int)
        if self.times.shape != self.indices.shape:
            raise ValueError("times and indices differ in length")
        if self.times.size == 0:
            raise ValueError("empty observation series")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if np.any((self.indices < 0) | (self.indices > 6)):
            raise ValueError("mold indices must lie in 0..6")


@dataclass(frozen=True)
class PiecewiseLinearParams:
    a: float  # day M reaches 1
    b: float  # maximum index
    c: float  # day M reaches b

    def __post_init__(self):
        if not self.a < self.c:
            raise ValueError(f"need a < c, got a={self.a}, c={self.c}")
        if not 1 <= self.b <= 6:
            raise ValueError(f"need 1 <= b <= 6, got {self.b}")


@dataclass(frozen=True)
class LogisticProjectionParams:
    a: float  # plateau
    b: float  # steepness, 1/day
    c: float  # midpoint day

    def __post_init__(self):
        if not 0 < self.a <= 6:
            raise ValueError(f"need 0 < a <= 6, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"need b > 0, got {self.b}")


def extract_g_params(odd: ObservedSeries) -> PiecewiseLinearParams:
    """Landmarks of the series: first day at index >= 1, maximum, first day at the maximum."""
    reached = np.nonzero(odd.indices >= 1)[0]
    if reached.size == 0:
        raise ValueError(f"series {odd.label!r} never reaches mold index 1")
    b = int(odd.indices.max())
    a = float(odd.times[reached[0]])
    c = float(odd.times[np.nonzero(odd.indices == b)[0][0]])
    if b == 1:
        # index 1 is the plateau itself; keep the family well defined
        c = a + 1e-9 if c <= a else c
    return PiecewiseLinearParams(a, float(b), c)


def eval_g(t, p: PiecewiseLinearParams):
    t = np.asarray(t, dtype=float)
    ramp = t / p.a
    rise = (p.b - 1.0) / (p.c - p.a) * (t - p.c) + p.b
    out = np.where(t < p.a, ramp, np.where(t <= p.c, rise, p.b))
    return out if out.ndim else float(out)


def eval_h(t, p: LogisticProjectionParams):
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore"):
        out = p.a / (1.0 + np.exp(-p.b * (t - p.c)))
    return out if out.ndim else float(out)


_FAMILIES = {"g": eval_g, "h": eval_h}


def evaluate(family: str, t, params):
    try:
        return _FAMILIES[family](t, params)
    except KeyError:
        raise ValueError(f"unknown projection family {family!r}") from None


def projection_residual(odd: ObservedSeries, family: str, params) -> float:
    """Root-sum-square difference between observations and projection at the observation times."""
    diff = np.asarray(evaluate(family, odd.times, params)) - odd.indices
    return float(np.sqrt(np.sum(diff * diff)))


def resample(family: str, params, grid: TimeGrid, label: str = "") -> Trajectory:
    times = grid.times
    return Trajectory(times, np.asarray(evaluate(family, times, params), dtype=float), label)


def _first_time_at_least(odd: ObservedSeries, level: float) -> float:
    hit = np.nonzero(odd.indices >= level)[0]
    return float(odd.times[hit[0]]) if hit.size else float(odd.times[-1])


def h_initial_guess(odd: ObservedSeries) -> LogisticProjectionParams:
    top = float(odd.indices.max())
    if top <= 0:
        raise ValueError("cannot seed a logistic fit on an all-zero series")
    c = _first_time_at_least(odd, top / 2)
    width = _first_time_at_least(odd, 0.9 * top) - _first_time_at_least(odd, 0.1 * top)
    return LogisticProjectionParams(top, 4.0 / max(width, 1.0), c)


@dataclass
class HFit:
    params: LogisticProjectionParams
    residual: float
    converged: bool
    message: str = ""


def fit_h_params(
    odd: ObservedSeries, seeds: Sequence[LogisticProjectionParams] = ()
) -> HFit:
    """Least-squares logistic projection of an observation series.

    The default seed comes from :func:`h_initial_guess`; extra ``seeds``
    are tried as well and the lowest residual is returned, so the result
    is never worse than any seed supplied.
    """
    if odd.times.size < 4:
        raise ValueError("need at least 4 observations for a 3-parameter fit")
    t, y = odd.times, odd.indices.astype(float)

    def resid(x):
        with np.errstate(over="ignore"):
            return x[0] / (1.0 + np.exp(-x[1] * (t - x[2]))) - y

    lower = [1e-9, 1e-9, -np.inf]
    upper = [6.0, np.inf, np.inf]
    candidates = [h_initial_guess(odd), *seeds]
    best: HFit | None = None
    for seed in candidates:
        x0 = np.clip([seed.a, seed.b, seed.c], [1e-6, 1e-6, -1e12], [6.0, 1e12, 1e12])
        r = least_squares(resid, x0, bounds=(lower, upper), xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=20_000)
        fit = HFit(LogisticProjectionParams(*map(float, r.x)), float(np.sqrt(np.sum(r.fun**2))), r.status > 0, r.message)
        seed_res = float(np.sqrt(np.sum(resid([seed.a, seed.b, seed.c]) ** 2)))
        if seed_res < fit.residual:
            fit = HFit(seed, seed_res, fit.converged, "seed retained")
        if best is None or fit.residual < best.residual:
            best = fit
    assert best is not None
    return best
