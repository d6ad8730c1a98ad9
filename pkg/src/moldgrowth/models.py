"""Closed-form pieces of the VTT and logistic mold growth models.

Humidity is a fraction in (0, 1] everywhere in this package. The VTT
response time ``f`` is in hours; right-hand sides are returned per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

M_MIN = 0.0
M_MAX = 6.0
K2_SLOPE = 2.3
HOURS_PER_DAY = 24.0


class DomainError(ValueError):
    """Raised when a formula is evaluated outside its domain."""


@dataclass(frozen=True)
class EnvPoint:
    temperature: float  # degrees Celsius
    humidity: float  # fraction

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be > 0 degC, got {self.temperature}")
        if not 0 < self.humidity <= 1:
            raise DomainError(f"humidity must be in (0, 1], got {self.humidity}")


@dataclass(frozen=True)
class ResponseCoeffs:
    """Coefficients of the sawn-surface response time function."""

    b0: float = 168.0
    b1: float = -0.68
    b2: float = -13.9
    b3: float = 66.02

    def __post_init__(self):
        if not self.b0 > 0:
            raise DomainError("b0 must be positive")

    def scaled(self, name: str, factor: float) -> "ResponseCoeffs":
        if name not in ("b0", "b1", "b2", "b3"):
            raise KeyError(name)
        values = {k: getattr(self, k) for k in ("b0", "b1", "b2", "b3")}
        values[name] *= factor
        return ResponseCoeffs(**values)


@dataclass(frozen=True)
class VttClassParams:
    k11: float
    k12: float
    A: float
    B: float
    C: float
    phi_c: float

    def __post_init__(self):
        if not (self.k11 > 0 and self.k12 > 0):
            raise DomainError("k11 and k12 must be positive")
        if not 0 < self.phi_c < 1:
            raise DomainError(f"phi_c must be in (0, 1), got {self.phi_c}")


@dataclass(frozen=True)
class LogisticParams:
    m0: float
    k: float
    m_inf: float

    def __post_init__(self):
        if not self.m0 > 0:
            raise DomainError("m0 must be positive")
        if not 0 < self.m_inf <= M_MAX:
            raise DomainError(f"m_inf must be in (0, 6], got {self.m_inf}")
        if not self.m0 <= self.m_inf:
            raise DomainError("m0 must not exceed m_inf")


@dataclass(frozen=True)
class HygroProps:
    vapor_permeability: float
    sorption_capacity: float
    length: float  # m
    char_time: float  # h

    def __post_init__(self):
        for name in ("vapor_permeability", "sorption_capacity", "length", "char_time"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")


# Vulnerability classes, critical humidity converted to a fraction.
VTT_CLASSES: dict[str, VttClassParams] = {
    "very-vulnerable": VttClassParams(1.0, 2.0, 1.0, 7.0, -2.0, 0.80),
    "vulnerable": VttClassParams(0.578, 0.386, 0.3, 6.0, -1.0, 0.80),
    "medium-resistant": VttClassParams(0.072, 0.097, 0.0, 5.0, -1.5, 0.85),
    "resistant": VttClassParams(0.033, 0.014, 0.0, 3.0, -1.0, 0.85),
}

# (k, m_inf) per class for the logistic model, used with m0 = 1e-3.
LOGISTIC_CLASSES: dict[str, tuple[float, float]] = {
    "very-vulnerable": (0.2, 5.51),
    "vulnerable": (0.1, 4.67),
    "resistant": (0.03, 3.04),
    "very-resistant": (0.02, 1.54),
}
LOGISTIC_CLASS_M0 = 1e-3


def vtt_class(name: str) -> VttClassParams:
    try:
        return VTT_CLASSES[name]
    except KeyError:
        raise KeyError(f"unknown VTT class {name!r}; choose from {sorted(VTT_CLASSES)}") from None


def logistic_class(name: str) -> LogisticParams:
    try:
        k, m_inf = LOGISTIC_CLASSES[name]
    except KeyError:
        raise KeyError(
            f"unknown logistic class {name!r}; choose from {sorted(LOGISTIC_CLASSES)}"
        ) from None
    return LogisticParams(LOGISTIC_CLASS_M0, k, m_inf)


def response_time_f(env: EnvPoint, coeffs: ResponseCoeffs = ResponseCoeffs()) -> float:
    """Response time of the sawn-surface VTT model, in hours.

    The humidity enters the logarithm in percent.
    """
    T, phi = env.temperature, env.humidity
    if T <= 0 or phi <= 0:
        raise DomainError("f requires T > 0 and phi > 0")
    exponent = coeffs.b1 * math.log(T) + coeffs.b2 * math.log(100.0 * phi) + coeffs.b3
    return coeffs.b0 * math.exp(exponent)


def humidity_ratio(phi: float, phi_c: float) -> float:
    """Normalized humidity ``(phi_c - phi) / (phi_c - 1)`` used by Mmax."""
    if phi_c == 1:
        raise DomainError("phi_c = 1 makes the Mmax polynomial undefined")
    return (phi_c - phi) / (phi_c - 1.0)


def m_max_raw(phi: float, params: VttClassParams) -> float:
    """Unclamped Mmax polynomial ``A + B x + C x^2``."""
    x = humidity_ratio(phi, params.phi_c)
    return params.A + params.B * x + params.C * x * x


def m_max(phi: float, params: VttClassParams) -> float:
    """Maximum mold index at humidity ``phi``, clamped to the index scale."""
    if not 0 < phi <= 1:
        raise DomainError(f"humidity must be in (0, 1], got {phi}")
    return min(max(m_max_raw(phi, params), M_MIN), M_MAX)


def k1(m: float, params: VttClassParams) -> float:
    return params.k11 if m < 1.0 else params.k12


def k2(m: float, m_max_value: float) -> float:
    return max(1.0 - math.exp(K2_SLOPE * (m - m_max_value)), 0.0)


def vtt_rhs(
    m: float,
    env: EnvPoint,
    params: VttClassParams,
    coeffs: ResponseCoeffs = ResponseCoeffs(),
    m_max_override: float | None = None,
) -> float:
    """Growth rate dM/dt of the VTT model, per day."""
    mmax = m_max(env.humidity, params) if m_max_override is None else m_max_override
    return HOURS_PER_DAY * k1(m, params) * k2(m, mmax) / response_time_f(env, coeffs)


def logistic_rhs(m: float, p: LogisticParams) -> float:
    return p.k * m * (p.m_inf - m)


def _logistic_parts(t, p: LogisticParams):
    e = math.exp(-p.k * p.m_inf * t)
    return e, (p.m_inf - p.m0) * e + p.m0


def logistic_closed_form(t: float, p: LogisticParams) -> float:
    e, d = _logistic_parts(t, p)
    return p.m_inf * p.m0 / d


def logistic_sensitivity_m0(t: float, p: LogisticParams) -> float:
    """dM/dM0 of the logistic solution; decays to zero for k > 0."""
    e, d = _logistic_parts(t, p)
    return p.m_inf**2 * e / (d * d)


def time_to_index_one(p: LogisticParams) -> float:
    """Time (days) at which the logistic solution reaches M = 1."""
    if not p.m_inf > 1:
        raise DomainError("m_inf <= 1: the index never reaches 1")
    if not p.m0 < 1:
        raise DomainError("m0 >= 1: the index already exceeds 1")
    return math.log((p.m_inf - p.m0) / (p.m0 * (p.m_inf - 1.0))) / (p.k * p.m_inf)


def dt1_dm0(p: LogisticParams) -> float:
    time_to_index_one(p)  # domain checks
    return 1.0 / (p.k * p.m0 * (p.m0 - p.m_inf))


def diffusion_time_and_fourier(props: HygroProps) -> tuple[float, float]:
    """Moisture diffusion time ``xi L^2 / delta_v`` and Fourier number ``t0 / t_d``."""
    t_d = props.sorption_capacity * props.length**2 / props.vapor_permeability
    return t_d, props.char_time / t_d
