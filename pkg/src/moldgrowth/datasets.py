"""Bundled observation files and published reference values.

The bamboo fiberboard observation files are daily series consistent with
the published projection landmarks (first day at index 1, maximum index,
first day at the maximum). The literature pine-sapwood experiments are
only available through their published logistic projection parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .integrate import TimeGrid, Trajectory
from .models import EnvPoint
from .project import (
    LogisticProjectionParams,
    ObservedSeries,
    PiecewiseLinearParams,
    resample,
)

BAMBOO_TEMPERATURE = 25.0
BAMBOO_HUMIDITIES = {"phi1": 0.75, "phi2": 0.84, "phi3": 0.97}
BAMBOO_HORIZON = 112.0  # 16 weeks of daily assessment
LITERATURE_HORIZON = 56.0


@dataclass(frozen=True)
class LiteratureExperiment:
    label: str
    env: EnvPoint
    h_params: LogisticProjectionParams


LITERATURE = {
    "johansson": LiteratureExperiment("johansson", EnvPoint(22.0, 0.90), LogisticProjectionParams(5.24, 0.48, 17.26)),
    "nielsen": LiteratureExperiment("nielsen", EnvPoint(25.0, 0.86), LogisticProjectionParams(2.58, 0.53, 14.84)),
}

# piecewise-linear projection landmarks (a, b, c) and residuals
G_TABLE = {
    "phi1": (PiecewiseLinearParams(88, 3, 90), 0.002),
    "phi2": (PiecewiseLinearParams(13, 5, 21), 0.47),
    "phi3": (PiecewiseLinearParams(5, 6, 14), 0.65),
}

# logistic projection (a, b, c) and residuals
H_TABLE = {
    "phi1": (LogisticProjectionParams(3.02, 1.21, 89.27), 0.52),
    "phi2": (LogisticProjectionParams(5.01, 0.83, 17.50), 0.60),
    "phi3": (LogisticProjectionParams(6.00, 0.81, 7.98), 0.56),
    "johansson": (LITERATURE["johansson"].h_params, 0.2),
    "nielsen": (LITERATURE["nielsen"].h_params, 0.4),
}

# VTT single fits: (k11, k12, Mmax), eta, a-priori Mmax
VTT_SINGLE_TABLE = {
    "phi1": {"params": (4.25, 199.0, 3.05), "eta": (1.54, 0.5, 0.018), "prior_m_max": 1.0},
    "phi2": {"params": (5.89, 39.3, 5.09), "eta": (3.92, 0.47, 0.096), "prior_m_max": 3.26},
    "phi3": {"params": (2.19, 6.99, 5.99), "eta": (6.00, 0.38, 0.071), "prior_m_max": 5.61},
}
VTT_SINGLE_RESIDUALS = {"phi1": 0.09, "phi2": 0.05, "phi3": 0.05}
VTT_JOINT_TABLE = {"params": (4.56, 198.0), "eta": (3.05, 1.9), "residuals": (0.45, 0.53, 2.15)}
ABC_TABLE = (3.05, 7.39, -4.5)

PERTURBATION_TABLE = {
    "baseline": 3.03,
    "finals": {0.99: 5.88, 0.999: 3.24},
    "relative_errors": {0.99: 0.94, 0.999: 0.07},
    "l2": {0.99: 3.3e4, 0.999: 175.0},
}

# logistic fits: (m0, k, m_inf), eta
LOGISTIC_TABLE = {
    "phi1": {"params": (4e-7, 0.39, 3.02), "eta": (1.4e-12, 3.2e-3, 1.2e-2)},
    "phi2": {"params": (2e-6, 0.16, 5.00), "eta": (1.6e-7, 7.5e-3, 3.5e-3)},
    "phi3": {"params": (9e-3, 0.13, 6.00), "eta": (2.1e-3, 4.6e-3, 2.5e-3)},
    "johansson": {"params": (1.3e-3, 0.10, 5.24), "eta": (1.2e-3, 3.4e-3, 2.7e-3)},
    "nielsen": {"params": (1.0e-3, 0.19, 2.58), "eta": (1.2e-3, 3.4e-3, 2.7e-3)},
}
LOGISTIC_RESIDUALS = {"phi1": 8e-4, "phi2": 1.4e-3, "phi3": 2.1e-3}


def bamboo_csv_text(name: str) -> str:
    if name not in BAMBOO_HUMIDITIES:
        raise KeyError(f"unknown bamboo experiment {name!r}; choose from {sorted(BAMBOO_HUMIDITIES)}")
    return resources.files(__package__).joinpath(f"data/exp_{name}.csv").read_text("utf-8")


def bamboo_series(name: str) -> ObservedSeries:
    from .io import parse_experiment_csv

    odd = parse_experiment_csv(bamboo_csv_text(name))
    odd.label = name
    return odd


def bamboo_env(name: str) -> EnvPoint:
    return EnvPoint(BAMBOO_TEMPERATURE, BAMBOO_HUMIDITIES[name])


def experiment_env(name: str) -> EnvPoint:
    return LITERATURE[name].env if name in LITERATURE else bamboo_env(name)


def experiment_horizon(name: str) -> float:
    return LITERATURE_HORIZON if name in LITERATURE else BAMBOO_HORIZON


def published_pod(name: str, family: str, dt: float = 1.0 / 240.0) -> Trajectory:
    """POD built from the published projection parameters of an experiment."""
    grid = TimeGrid(0.0, experiment_horizon(name), dt)
    params = (G_TABLE if family == "g" else H_TABLE)[name][0]
    return resample(family, params, grid, name)
