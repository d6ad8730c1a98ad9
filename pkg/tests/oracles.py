"""Independent reference computations shared by the test modules."""

from __future__ import annotations

import math
from decimal import Decimal, getcontext

import numpy as np

from moldgrowth.integrate import integrate_vtt_rates, logistic_solution
from moldgrowth.models import K2_SLOPE

getcontext().prec = 50


def f_decimal(T, phi, b0=168.0, b1=-0.68, b2=-13.9, b3=66.02) -> Decimal:
    """Response time evaluated in 50-digit decimal arithmetic."""
    D = Decimal
    expo = D(repr(b1)) * D(repr(T)).ln() + D(repr(b2)) * (D(100) * D(repr(phi))).ln() + D(repr(b3))
    return D(repr(b0)) * expo.exp()


def m_max_decimal(phi, A, B, C, phi_c) -> Decimal:
    D = Decimal
    x = (D(repr(phi_c)) - D(repr(phi))) / (D(repr(phi_c)) - D(1))
    v = D(repr(A)) + D(repr(B)) * x + D(repr(C)) * x * x
    return min(max(v, D(0)), D(6))


def vtt_branch_exact(t, m0, c, mmax):
    """Exact solution of dM/dt = c (1 - exp(a (M - Mmax))) on a single k1 branch."""
    a = K2_SLOPE
    K = math.exp(-a * m0) - math.exp(-a * mmax)
    return -np.log(math.exp(-a * mmax) + K * np.exp(-a * c * np.asarray(t))) / a


def vtt_time_to(m, m0, c, mmax):
    """Time for the single-branch solution started at m0 to reach m."""
    a = K2_SLOPE

    def T(v):
        return (v - math.log(1.0 - math.exp(a * (v - mmax))) / a) / c

    return T(m) - T(m0)


def vtt_exact(t, k11, k12, mmax, rate):
    """Two-branch exact VTT solution from M(0) = 0 with the switch at M = 1."""
    t = np.asarray(t, dtype=float)
    c1, c2 = rate * k11, rate * k12
    if mmax <= 1.0:
        return vtt_branch_exact(t, 0.0, c1, mmax)
    t1 = vtt_time_to(1.0, 0.0, c1, mmax)
    out = vtt_branch_exact(t, 0.0, c1, mmax)
    late = t > t1
    out[late] = vtt_branch_exact(t[late] - t1, 1.0, c2, mmax)
    return out


def vtt_fd(params, env, grid, rel=1e-4, m_max_cap=6.0):
    """Finite differences of the VTT solution with kink points masked.

    Grid points where the perturbed runs sit on different k1 branches are
    excluded: there the true derivative jumps and a difference quotient is
    meaningless. An Mmax sitting on the clamp uses a second-order backward
    difference, since a central one would straddle the clamp.
    """
    base = integrate_vtt_rates(*params, env, grid)
    cols, masks = [], []
    for i in range(3):
        h = rel * abs(params[i])
        if i == 2 and params[i] + h > m_max_cap:
            runs = []
            for s in (1, 2):
                q = list(params)
                q[i] -= s * h
                runs.append(integrate_vtt_rates(*q, env, grid))
            cols.append((3 * base - 4 * runs[0] + runs[1]) / (2 * h))
        else:
            up, dn = list(params), list(params)
            up[i] += h
            dn[i] -= h
            runs = [integrate_vtt_rates(*up, env, grid), integrate_vtt_rates(*dn, env, grid)]
            cols.append((runs[0] - runs[1]) / (2 * h))
        same = np.ones_like(base, dtype=bool)
        for r in runs:
            same &= (r >= 1) == (base >= 1)
        masks.append(same)
    return np.vstack(cols), np.vstack(masks)


def logistic_fd(t, m0, k, m_inf, rel=1e-4):
    p = [m0, k, m_inf]
    rows = []
    for i in range(3):
        h = rel * abs(p[i])
        up, dn = list(p), list(p)
        up[i] += h
        dn[i] -= h
        rows.append((logistic_solution(t, *up) - logistic_solution(t, *dn)) / (2 * h))
    return np.vstack(rows)


def rel_max_error(approx, exact, mask=None):
    """max |approx - exact| / max |exact| per row, optionally on a mask."""
    out = []
    for i in range(exact.shape[0]):
        m = slice(None) if mask is None else mask[i]
        scale = np.max(np.abs(exact[i][m]))
        out.append(float(np.max(np.abs(approx[i][m] - exact[i][m])) / scale))
    return out
