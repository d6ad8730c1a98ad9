"""Fixed-step RK4 integration of both mold models and their sensitivities.

The VTT right-hand side jumps at M = 1 (k11 -> k12). A step that crosses
M = 1 is split at the crossing instant, found by bisection on the RK4
step length, so the discrete solution depends smoothly on the parameters.
The forward sensitivities receive the matching jump
``theta+ = theta- * rhs+ / rhs-`` at the crossing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .models import (
    HOURS_PER_DAY,
    K2_SLOPE,
    M_MAX,
    M_MIN,
    EnvPoint,
    LogisticParams,
    ResponseCoeffs,
    VttClassParams,
    m_max,
    response_time_f,
)

DEFAULT_DT = 1.0 / 240.0  # 6 min in days


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    dt: float = DEFAULT_DT

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"empty horizon: t_start={self.t_start}, t_end={self.t_end}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        n = (self.t_end - self.t_start) / self.dt
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ValueError("horizon must be an integer number of steps")

    @classmethod
    def days(cls, horizon: float, dt_minutes: float = 6.0) -> "TimeGrid":
        return cls(0.0, float(horizon), dt_minutes / 1440.0)

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class EnvSchedule:
    """Piecewise-constant environment; segment i holds from ``starts[i]``."""

    starts: tuple[float, ...]
    envs: tuple[EnvPoint, ...]

    def __post_init__(self):
        if len(self.starts) == 0 or len(self.starts) != len(self.envs):
            raise ValueError("schedule needs matching, non-empty starts and envs")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("schedule start times must be strictly increasing")

    @classmethod
    def constant(cls, env: EnvPoint, t_start: float = 0.0) -> "EnvSchedule":
        return cls((float(t_start),), (env,))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, EnvPoint]]) -> "EnvSchedule":
        return cls(tuple(float(t) for t, _ in pairs), tuple(e for _, e in pairs))

    def check_covers(self, grid: TimeGrid) -> None:
        if self.starts[0] > grid.t_start + 1e-12:
            raise ValueError(
                f"schedule starts at {self.starts[0]} but the grid starts at {grid.t_start}"
            )


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same length")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> float:
        return float(self.values[-1])


@dataclass
class SensitivityTrajectory:
    times: np.ndarray
    theta: np.ndarray  # (n_params, n_times)
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        if self.theta.shape[1] != len(self.times):
            raise ValueError("theta must have shape (n_params, len(times))")


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _segment(t, seg_t):
    j = np.searchsorted(seg_t, t + 1e-12, side="right") - 1
    return max(j, 0)


@numba.njit(cache=True)
def _rhs(m, rate, kb, mmax):
    k2 = 1.0 - math.exp(K2_SLOPE * (m - mmax))
    if k2 < 0.0:
        k2 = 0.0
    return rate * kb * k2


@numba.njit(cache=True)
def _rk4(m, t, h, kb, seg_t, seg_rate, seg_mmax):
    j = _segment(t, seg_t)
    a1 = _rhs(m, seg_rate[j], kb, seg_mmax[j])
    j = _segment(t + 0.5 * h, seg_t)
    a2 = _rhs(m + 0.5 * h * a1, seg_rate[j], kb, seg_mmax[j])
    a3 = _rhs(m + 0.5 * h * a2, seg_rate[j], kb, seg_mmax[j])
    j = _segment(t + h, seg_t)
    a4 = _rhs(m + h * a3, seg_rate[j], kb, seg_mmax[j])
    return m + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)


@numba.njit(cache=True)
def _crossing_time(m, t, h, k11, seg_t, seg_rate, seg_mmax):
    lo = 0.0
    hi = h
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _rk4(m, t, mid, k11, seg_t, seg_rate, seg_mmax) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * h:
            break
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def _vtt_kernel(n, t0, dt, m_init, k11, k12, seg_t, seg_rate, seg_mmax):
    out = np.empty(n + 1)
    m = m_init
    out[0] = m
    for i in range(n):
        t = t0 + i * dt
        if m < 1.0:
            m_new = _rk4(m, t, dt, k11, seg_t, seg_rate, seg_mmax)
            if m_new >= 1.0:
                s = _crossing_time(m, t, dt, k11, seg_t, seg_rate, seg_mmax)
                m_new = _rk4(1.0, t + s, dt - s, k12, seg_t, seg_rate, seg_mmax)
        else:
            m_new = _rk4(m, t, dt, k12, seg_t, seg_rate, seg_mmax)
        m = min(max(m_new, M_MIN), M_MAX)
        out[i + 1] = m
    return out


@numba.njit(cache=True)
def _sens_rhs(y, rate, k11, k12, branch, mmax, out):
    m = y[0]
    kb = k11 if branch == 0 else k12
    if m < mmax:
        e = math.exp(K2_SLOPE * (m - mmax))
        k2 = 1.0 - e
        dk2_dm = -K2_SLOPE * e
        dk2_dmmax = K2_SLOPE * e
    else:
        k2 = 0.0
        dk2_dm = 0.0
        dk2_dmmax = 0.0
    out[0] = rate * kb * k2
    drdm = rate * kb * dk2_dm
    out[1] = drdm * y[1] + (rate * k2 if branch == 0 else 0.0)
    out[2] = drdm * y[2] + (rate * k2 if branch == 1 else 0.0)
    out[3] = drdm * y[3] + rate * kb * dk2_dmmax


@numba.njit(cache=True)
def _sens_rk4(y, h, rate, k11, k12, branch, mmax):
    a1 = np.empty(4)
    a2 = np.empty(4)
    a3 = np.empty(4)
    a4 = np.empty(4)
    _sens_rhs(y, rate, k11, k12, branch, mmax, a1)
    _sens_rhs(y + 0.5 * h * a1, rate, k11, k12, branch, mmax, a2)
    _sens_rhs(y + 0.5 * h * a2, rate, k11, k12, branch, mmax, a3)
    _sens_rhs(y + h * a3, rate, k11, k12, branch, mmax, a4)
    return y + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)


@numba.njit(cache=True)
def _vtt_sens_kernel(n, dt, m_init, k11, k12, mmax, rate):
    seg_t = np.zeros(1)
    seg_rate = np.array([rate])
    seg_mmax = np.array([mmax])
    out = np.empty((4, n + 1))
    y = np.zeros(4)
    y[0] = m_init
    out[:, 0] = y
    for i in range(n):
        if y[0] < 1.0:
            m_new = _rk4(y[0], 0.0, dt, k11, seg_t, seg_rate, seg_mmax)
            if m_new >= 1.0:
                s = _crossing_time(y[0], 0.0, dt, k11, seg_t, seg_rate, seg_mmax)
                y = _sens_rk4(y, s, rate, k11, k12, 0, mmax)
                y[0] = 1.0
                k2 = max(1.0 - math.exp(K2_SLOPE * (1.0 - mmax)), 0.0)
                if k2 > 0.0:
                    ratio = k12 / k11
                    y[1] *= ratio
                    y[2] *= ratio
                    y[3] *= ratio
                y = _sens_rk4(y, dt - s, rate, k11, k12, 1, mmax)
            else:
                y = _sens_rk4(y, dt, rate, k11, k12, 0, mmax)
        else:
            y = _sens_rk4(y, dt, rate, k11, k12, 1, mmax)
        y[0] = min(max(y[0], M_MIN), M_MAX)
        out[:, i + 1] = y
    return out


@numba.njit(cache=True)
def _logistic_kernel(n, dt, m0, k, m_inf):
    out = np.empty(n + 1)
    m = m0
    out[0] = m
    for i in range(n):
        a1 = k * m * (m_inf - m)
        y = m + 0.5 * dt * a1
        a2 = k * y * (m_inf - y)
        y = m + 0.5 * dt * a2
        a3 = k * y * (m_inf - y)
        y = m + dt * a3
        a4 = k * y * (m_inf - y)
        m = m + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        out[i + 1] = m
    return out


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def _schedule_arrays(schedule, params, coeffs, m_max_override):
    seg_t = np.array(schedule.starts, dtype=float)
    rate = np.array(
        [HOURS_PER_DAY / response_time_f(env, coeffs) for env in schedule.envs]
    )
    if m_max_override is None:
        mmax = np.array([m_max(env.humidity, params) for env in schedule.envs])
    else:
        mmax = np.full(len(seg_t), float(m_max_override))
    return seg_t, rate, mmax


def integrate_vtt(
    params: VttClassParams,
    coeffs: ResponseCoeffs,
    schedule: EnvSchedule,
    grid: TimeGrid,
    m_init: float = 0.0,
    m_max_override: float | None = None,
) -> Trajectory:
    """Integrate the VTT model on ``grid``; values are clamped to [0, 6]."""
    schedule.check_covers(grid)
    seg_t, rate, mmax = _schedule_arrays(schedule, params, coeffs, m_max_override)
    values = _vtt_kernel(
        grid.n_steps, grid.t_start, grid.dt, float(m_init),
        params.k11, params.k12, seg_t, rate, mmax,
    )
    return Trajectory(grid.times, values, "vtt")


def integrate_vtt_rates(
    k11: float,
    k12: float,
    m_max_value: float,
    env: EnvPoint,
    grid: TimeGrid,
    coeffs: ResponseCoeffs = ResponseCoeffs(),
    m_init: float = 0.0,
) -> np.ndarray:
    """Fast path used by the fitters: constant env, Mmax given directly."""
    rate = HOURS_PER_DAY / response_time_f(env, coeffs)
    return _vtt_kernel(
        grid.n_steps, grid.t_start, grid.dt, float(m_init), float(k11), float(k12),
        np.array([grid.t_start]), np.array([rate]), np.array([float(m_max_value)]),
    )


VTT_SENS_NAMES = ("k11", "k12", "m_max")
LOGISTIC_SENS_NAMES = ("m0", "k", "m_inf")


def integrate_vtt_sensitivities(
    params: tuple[float, float, float],
    env: EnvPoint,
    coeffs: ResponseCoeffs,
    grid: TimeGrid,
    m_init: float = 0.0,
) -> tuple[Trajectory, SensitivityTrajectory]:
    """Trajectory and dM/d(k11, k12, Mmax) for a constant environment."""
    k11, k12, mmax = (float(v) for v in params)
    rate = HOURS_PER_DAY / response_time_f(env, coeffs)
    y = _vtt_sens_kernel(grid.n_steps, grid.dt, float(m_init), k11, k12, mmax, rate)
    times = grid.times
    return Trajectory(times, y[0], "vtt"), SensitivityTrajectory(times, y[1:], VTT_SENS_NAMES)


def integrate_logistic(p: LogisticParams, grid: TimeGrid) -> Trajectory:
    values = _logistic_kernel(grid.n_steps, grid.dt, p.m0, p.k, p.m_inf)
    return Trajectory(grid.times, values, "logistic")


def logistic_solution(t, m0, k, m_inf) -> np.ndarray:
    """Vectorized closed-form logistic solution (t measured from 0)."""
    e = np.exp(-k * m_inf * np.asarray(t, dtype=float))
    return m_inf * m0 / ((m_inf - m0) * e + m0)


def logistic_partials(t, m0, k, m_inf) -> np.ndarray:
    """Analytic dM/d(m0, k, m_inf) of the closed-form logistic solution."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-k * m_inf * t)
    d = (m_inf - m0) * e + m0
    d2 = d * d
    dm0 = m_inf**2 * e / d2
    dk = m_inf**2 * m0 * (m_inf - m0) * t * e / d2
    dminf = m0 * (m0 * (1.0 - e) + m_inf * k * t * (m_inf - m0) * e) / d2
    return np.vstack([dm0, dk, dminf])


def integrate_logistic_sensitivities(
    p: LogisticParams, grid: TimeGrid
) -> tuple[Trajectory, SensitivityTrajectory]:
    t = grid.times - grid.t_start
    traj = Trajectory(grid.times, logistic_solution(t, p.m0, p.k, p.m_inf), "logistic")
    theta = logistic_partials(t, p.m0, p.k, p.m_inf)
    return traj, SensitivityTrajectory(grid.times, theta, LOGISTIC_SENS_NAMES)
