"""VTT and logistic mold-growth models: simulation, projection, estimation."""

__version__ = "0.1.0"

from .models import (  # noqa: E402
    DomainError,
    EnvPoint,
    LogisticParams,
    ResponseCoeffs,
    VttClassParams,
    logistic_class,
    m_max,
    response_time_f,
    vtt_class,
)
from .integrate import (  # noqa: E402
    EnvSchedule,
    TimeGrid,
    Trajectory,
    integrate_logistic,
    integrate_vtt,
)

__all__ = [
    "DomainError",
    "EnvPoint",
    "EnvSchedule",
    "LogisticParams",
    "ResponseCoeffs",
    "TimeGrid",
    "Trajectory",
    "VttClassParams",
    "integrate_logistic",
    "integrate_vtt",
    "logistic_class",
    "m_max",
    "response_time_f",
    "vtt_class",
]
