"""Parameter estimation for the VTT and logistic models.

Costs are unnormalized sums of squared differences between a projected
observation trajectory (POD) and the simulated trajectory on the same
uniform grid. Fits use the box-projected Nelder-Mead of
:mod:`moldgrowth.optimize` with a deterministic multistart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .integrate import (
    EnvSchedule,
    SensitivityTrajectory,
    TimeGrid,
    Trajectory,
    integrate_logistic_sensitivities,
    integrate_vtt,
    integrate_vtt_rates,
    integrate_vtt_sensitivities,
    logistic_solution,
)
from .models import (
    EnvPoint,
    LogisticParams,
    ResponseCoeffs,
    VttClassParams,
    humidity_ratio,
    m_max,
    vtt_class,
)
from .optimize import OptimizeResult, multistart, scattered_seeds


class EstimationError(RuntimeError):
    pass


@dataclass
class PodSeries:
    """A projected observation trajectory with the conditions it was observed under."""

    trajectory: Trajectory
    env: EnvPoint
    label: str = ""

    @property
    def grid(self) -> TimeGrid:
        t = self.trajectory.times
        return TimeGrid(float(t[0]), float(t[-1]), float(t[1] - t[0]))


@dataclass
class OptimizerSettings:
    xatol: float = 1e-8
    fatol: float = 1e-10
    maxfev: int = 50_000
    n_starts: int = 8
    seed: int = 0


@dataclass
class FitProblem:
    kind: str  # "vtt-single" | "vtt-joint" | "logistic"
    pods: list[PodSeries]
    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    x0: np.ndarray
    settings: OptimizerSettings = field(default_factory=OptimizerSettings)
    coeffs: ResponseCoeffs = field(default_factory=ResponseCoeffs)
    fixed_m_max: tuple[float, ...] = ()

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        if np.any(self.lower >= self.upper):
            raise ValueError("every lower bound must be below its upper bound")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise ValueError("initial guess lies outside the bounds")
        if self.kind == "vtt-joint" and len(self.fixed_m_max) != len(self.pods):
            raise ValueError("joint VTT fit needs one fixed Mmax per experiment")


@dataclass
class FitResult:
    kind: str
    params: dict[str, float]
    cost: float
    residuals: list[float]  # sqrt of each experiment's cost
    residuals_rms: list[float]  # residuals / sqrt(N_t)
    n_eval: int
    converged: bool
    history: list[float] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)


# --------------------------------------------------------------------------
# simulation and cost
# --------------------------------------------------------------------------


def simulate(problem: FitProblem, params: Sequence[float], index: int) -> np.ndarray:
    pod = problem.pods[index]
    grid = pod.grid
    if problem.kind == "logistic":
        m0, k, m_inf = params
        return logistic_solution(grid.times - grid.t_start, m0, k, m_inf)
    if problem.kind == "vtt-single":
        k11, k12, mmax = params
    elif problem.kind == "vtt-joint":
        (k11, k12), mmax = params, problem.fixed_m_max[index]
    else:
        raise ValueError(f"unknown problem kind {problem.kind!r}")
    return integrate_vtt_rates(k11, k12, mmax, pod.env, grid, problem.coeffs)


def experiment_costs(params: Sequence[float], problem: FitProblem) -> list[float]:
    out = []
    for i, pod in enumerate(problem.pods):
        d = pod.trajectory.values - simulate(problem, params, i)
        out.append(float(np.dot(d, d)))
    return out


def cost_J(params: Sequence[float], problem: FitProblem) -> float:
    """Summed squared grid distance between every POD and its simulation."""
    p = np.asarray(params, dtype=float)
    if np.any(p < problem.lower) or np.any(p > problem.upper):
        raise ValueError("parameters outside the problem bounds")
    return float(sum(experiment_costs(p, problem)))


# --------------------------------------------------------------------------
# search-space transforms: rate constants and m0 are searched in log space
# --------------------------------------------------------------------------

_LOG_PARAMS = {"k11", "k12", "m0"}


def _to_search(problem: FitProblem, x):
    return np.array([math.log(v) if n in _LOG_PARAMS else v for n, v in zip(problem.names, x)])


def _from_search(problem: FitProblem, z):
    return np.array([math.exp(v) if n in _LOG_PARAMS else v for n, v in zip(problem.names, z)])


def solve(problem: FitProblem, extra_seeds: Sequence[Sequence[float]] = ()) -> FitResult:
    s = problem.settings
    lo, hi = _to_search(problem, problem.lower), _to_search(problem, problem.upper)

    def objective(z):
        return sum(experiment_costs(_from_search(problem, z), problem))

    anchor = _to_search(problem, problem.x0)
    seeds = scattered_seeds(anchor, lo, hi, max(s.n_starts - len(extra_seeds), 1), s.seed)
    seeds += [_to_search(problem, np.clip(e, problem.lower, problem.upper)) for e in extra_seeds]
    res: OptimizeResult = multistart(
        objective, seeds, lo, hi, xatol=s.xatol, fatol=s.fatol, maxfev=s.maxfev
    )
    x = np.clip(_from_search(problem, res.x), problem.lower, problem.upper)
    costs = experiment_costs(x, problem)
    return FitResult(
        kind=problem.kind,
        params=dict(zip(problem.names, map(float, x))),
        cost=float(sum(costs)),
        residuals=[math.sqrt(c) for c in costs],
        residuals_rms=[math.sqrt(c / len(p.trajectory)) for c, p in zip(costs, problem.pods)],
        n_eval=res.nfev,
        converged=res.converged,
        history=res.history,
        labels=[p.label for p in problem.pods],
    )


# --------------------------------------------------------------------------
# VTT fits
# --------------------------------------------------------------------------

VTT_RATE_BOUNDS = (1e-2, 1e3)
# a-priori material: very vulnerable with the critical humidity lowered to 0.75
BAMBOO_PRIOR = VttClassParams(1.0, 2.0, 1.0, 7.0, -2.0, 0.75)


def fit_vtt_single(
    pod: PodSeries,
    bounds: tuple[Sequence[float], Sequence[float]] | None = None,
    prior: VttClassParams = BAMBOO_PRIOR,
    settings: OptimizerSettings | None = None,
    coeffs: ResponseCoeffs | None = None,
) -> FitResult:
    """Fit (k11, k12, Mmax) to one experiment; Mmax is a free parameter in [0, 6]."""
    lower, upper = bounds or ((VTT_RATE_BOUNDS[0],) * 2 + (0.0,), (VTT_RATE_BOUNDS[1],) * 2 + (6.0,))
    x0 = np.clip([prior.k11, prior.k12, m_max(pod.env.humidity, prior)], lower, upper)
    problem = FitProblem(
        "vtt-single", [pod], ("k11", "k12", "m_max"), lower, upper, x0,
        settings or OptimizerSettings(), coeffs or ResponseCoeffs(),
    )
    plateau = float(np.clip(pod.trajectory.values.max(), lower[2], upper[2]))
    return solve(problem, extra_seeds=[(prior.k11, prior.k12, plateau)])


def fit_vtt_joint(
    pods: Sequence[PodSeries],
    m_max_values: Sequence[float],
    bounds: tuple[Sequence[float], Sequence[float]] | None = None,
    prior: VttClassParams = BAMBOO_PRIOR,
    settings: OptimizerSettings | None = None,
    coeffs: ResponseCoeffs | None = None,
) -> FitResult:
    """Fit shared (k11, k12) to several experiments with per-experiment Mmax fixed."""
    if len(pods) < 2:
        raise ValueError("a joint fit needs at least two experiments")
    lower, upper = bounds or ((VTT_RATE_BOUNDS[0],) * 2, (VTT_RATE_BOUNDS[1],) * 2)
    problem = FitProblem(
        "vtt-joint", list(pods), ("k11", "k12"), lower, upper,
        np.clip([prior.k11, prior.k12], lower, upper),
        settings or OptimizerSettings(), coeffs or ResponseCoeffs(),
        fixed_m_max=tuple(float(v) for v in m_max_values),
    )
    return solve(problem)


def solve_ABC(
    m_max_values: Sequence[float], phis: Sequence[float], phi_c: float
) -> tuple[float, float, float]:
    """Exact solve of the 3x3 system Mmax(phi_n) = A + B x_n + C x_n^2."""
    if len(m_max_values) != 3 or len(phis) != 3:
        raise ValueError("exactly three (phi, Mmax) pairs are required")
    if len(set(np.round(phis, 12))) < 3:
        raise np.linalg.LinAlgError("singular system: humidity levels must be distinct")
    x = np.array([humidity_ratio(p, phi_c) for p in phis])
    S = np.column_stack([np.ones(3), x, x * x])
    Y = np.asarray(m_max_values, dtype=float)
    X = np.linalg.solve(S, Y)
    return float(X[0]), float(X[1]), float(X[2])


# --------------------------------------------------------------------------
# logistic fit
# --------------------------------------------------------------------------

LOGISTIC_BOUNDS = ((1e-100, 1e-6, 1e-6), (1.0 - 1e-12, 10.0, 6.0))


def logistic_initial_guess(pod: PodSeries) -> tuple[float, float, float]:
    t = pod.trajectory.times - pod.trajectory.times[0]
    v = pod.trajectory.values
    top = float(max(v.max(), 1e-3))

    def first(level):
        hit = np.nonzero(v >= level)[0]
        return float(t[hit[0]]) if hit.size else float(t[-1])

    mid = first(top / 2)
    width = max(first(0.9 * top) - first(0.1 * top), 1e-2)
    rate = 4.0 / width  # k * m_inf
    m0 = top / (1.0 + math.exp(min(rate * mid, 700.0)))
    return max(m0, 1e-99), rate / top, min(top, 6.0)


def fit_logistic(
    pod: PodSeries,
    bounds: tuple[Sequence[float], Sequence[float]] | None = None,
    settings: OptimizerSettings | None = None,
) -> FitResult:
    """Fit (m0, k, m_inf) of the closed-form logistic solution to one POD."""
    lower, upper = bounds or LOGISTIC_BOUNDS
    x0 = np.clip(logistic_initial_guess(pod), lower, upper)
    problem = FitProblem(
        "logistic", [pod], ("m0", "k", "m_inf"), lower, upper, x0,
        settings or OptimizerSettings(),
    )
    return solve(problem)


# --------------------------------------------------------------------------
# Fisher matrix and error estimators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FisherConfig:
    sigma_m: float = 1.0
    sigma_p: float = 1.0
    # The VTT equation is written with time in hours, so the time integral
    # is taken in hours: 24 per simulation day.
    time_scale: float = 24.0
    cond_limit: float = 1e12


@dataclass
class FisherReport:
    matrix: np.ndarray
    names: tuple[str, ...]
    eta: list[float | None]
    condition: float  # of F itself
    scaled_condition: float  # of the unit-diagonal rescaling of F
    n_experiments: int
    horizon: float
    config: FisherConfig = field(default_factory=FisherConfig)

    @property
    def eta_available(self) -> bool:
        return all(e is not None for e in self.eta)


def _trapezoid(y, t):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def fisher_matrix(
    sensitivities: Sequence[SensitivityTrajectory], config: FisherConfig = FisherConfig()
) -> FisherReport:
    """``F_ij = sum_n int theta_in theta_jn dt`` by the trapezoid rule."""
    if not sensitivities:
        raise ValueError("no sensitivities given")
    n_p = sensitivities[0].theta.shape[0]
    scale = (config.sigma_p / config.sigma_m) ** 2 * config.time_scale
    F = np.zeros((n_p, n_p))
    horizon = 0.0
    for s in sensitivities:
        if s.theta.shape[0] != n_p:
            raise ValueError("all experiments must share the parameter set")
        th = s.theta
        for i in range(n_p):
            for j in range(i, n_p):
                F[i, j] += scale * _trapezoid(th[i] * th[j], s.times)
        horizon = max(horizon, float(s.times[-1] - s.times[0]))
    F = np.triu(F) + np.triu(F, 1).T
    report = FisherReport(
        matrix=F,
        names=tuple(sensitivities[0].names),
        eta=[],
        condition=float(np.linalg.cond(F)) if np.all(np.isfinite(F)) else math.inf,
        scaled_condition=math.inf,
        n_experiments=len(sensitivities),
        horizon=horizon,
        config=config,
    )
    report.eta = error_estimators(report)
    return report


def error_estimators(report: FisherReport) -> list[float | None]:
    """``eta_i = sqrt((F^-1)_ii)``; ``None`` where F is numerically singular.

    F is first rescaled to unit diagonal so that widely different parameter
    magnitudes do not count as singularity; the condition limit applies to
    the rescaled matrix.
    """
    F = report.matrix
    d = np.sqrt(np.clip(np.diag(F), 0.0, None))
    n = F.shape[0]
    if np.any(d == 0) or not np.all(np.isfinite(F)):
        report.scaled_condition = math.inf
        return [None] * n
    G = F / np.outer(d, d)
    cond = float(np.linalg.cond(G))
    report.scaled_condition = cond
    if cond > report.config.cond_limit:
        return [None] * n
    inv_diag = np.diag(np.linalg.inv(G))
    return [float(math.sqrt(v) / di) if v > 0 else None for v, di in zip(inv_diag, d)]


def vtt_fisher(
    fit: FitResult, pods: Sequence[PodSeries], coeffs: ResponseCoeffs = ResponseCoeffs(),
    config: FisherConfig = FisherConfig(),
) -> FisherReport:
    """Fisher report for a single-experiment (k11, k12, Mmax) fit, or a joint (k11, k12) fit."""
    sens = []
    for i, pod in enumerate(pods):
        mmax = fit.params["m_max"] if "m_max" in fit.params else None
        if mmax is None:
            raise ValueError("joint fits need vtt_fisher_joint")
        _, s = integrate_vtt_sensitivities(
            (fit.params["k11"], fit.params["k12"], mmax), pod.env, coeffs, pod.grid
        )
        sens.append(s)
    return fisher_matrix(sens, config)


def vtt_fisher_joint(
    fit: FitResult, pods: Sequence[PodSeries], m_max_values: Sequence[float],
    coeffs: ResponseCoeffs = ResponseCoeffs(), config: FisherConfig = FisherConfig(),
) -> FisherReport:
    sens = []
    for pod, mmax in zip(pods, m_max_values):
        _, s = integrate_vtt_sensitivities(
            (fit.params["k11"], fit.params["k12"], mmax), pod.env, coeffs, pod.grid
        )
        sens.append(SensitivityTrajectory(s.times, s.theta[:2], s.names[:2]))
    return fisher_matrix(sens, config)


def logistic_fisher(
    fit: FitResult, pods: Sequence[PodSeries], config: FisherConfig = FisherConfig()
) -> FisherReport:
    p = LogisticParams(fit.params["m0"], fit.params["k"], fit.params["m_inf"])
    return fisher_matrix([integrate_logistic_sensitivities(p, pod.grid)[1] for pod in pods], config)


# --------------------------------------------------------------------------
# perturbation studies
# --------------------------------------------------------------------------


@dataclass
class PerturbationReport:
    parameter: str
    scales: list[float]
    finals: list[float]
    relative_errors: list[float]
    l2_differences: list[float]
    baseline_norm: float
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    def row(self, scale: float) -> dict[str, float]:
        i = self.scales.index(scale)
        return {
            "scale": scale,
            "final": self.finals[i],
            "relative_error": self.relative_errors[i],
            "l2_difference": self.l2_differences[i],
        }


@dataclass(frozen=True)
class VttScenario:
    params: VttClassParams
    env: EnvPoint
    horizon: float
    dt: float = 1.0 / 240.0

    @classmethod
    def table6(cls) -> "VttScenario":
        return cls(vtt_class("medium-resistant"), EnvPoint(22.0, 0.97), 700.0)


def _compare(name, scales, trajectories) -> PerturbationReport:
    base = trajectories[scales.index(1.0)]
    finals, rel, l2 = [], [], []
    for tr in trajectories:
        d = tr.values - base.values
        finals.append(tr.final)
        rel.append(abs(tr.final - base.final) / abs(base.final))
        l2.append(float(np.sqrt(np.dot(d, d))))
    return PerturbationReport(
        name, list(scales), finals, rel, l2,
        float(np.sqrt(np.dot(base.values, base.values))), list(trajectories),
    )


def _check_scales(scales):
    scales = [float(s) for s in scales]
    if 1.0 not in scales:
        raise ValueError("the scale list must include the baseline 1")
    return scales


def perturbation_study(
    coeffs: ResponseCoeffs,
    coefficient: str,
    scales: Sequence[float],
    scenario: VttScenario = VttScenario.table6(),
) -> PerturbationReport:
    """Rerun a VTT scenario with one response-time coefficient scaled."""
    scales = _check_scales(scales)
    grid = TimeGrid(0.0, scenario.horizon, scenario.dt)
    sched = EnvSchedule.constant(scenario.env)
    runs = [integrate_vtt(scenario.params, coeffs.scaled(coefficient, s), sched, grid) for s in scales]
    return _compare(coefficient, scales, runs)


def initial_condition_sweep(
    p: LogisticParams, alphas: Sequence[float], grid: TimeGrid
) -> PerturbationReport:
    """Logistic trajectories with m0 replaced by alpha * m0."""
    alphas = _check_scales(alphas)
    t = grid.times - grid.t_start
    runs = [
        Trajectory(grid.times, logistic_solution(t, a * p.m0, p.k, p.m_inf), f"alpha={a:g}")
        for a in alphas
    ]
    return _compare("m0", alphas, runs)


# --------------------------------------------------------------------------
# synthetic recovery
# --------------------------------------------------------------------------


@dataclass
class RecoveryReport:
    kind: str
    truth: dict[str, float]
    recovered: dict[str, float]
    relative_errors: dict[str, float]
    cost: float
    passed: bool
    failures: list[str] = field(default_factory=list)
    abc_truth: tuple[float, float, float] | None = None
    abc_recovered: tuple[float, float, float] | None = None
    underdetermined: bool = False


def _noisy(values, noise, rng):
    if noise <= 0:
        return values
    return values + noise * float(np.max(np.abs(values))) * rng.standard_normal(values.size)


def recovery_test(
    kind: str,
    truth,
    grid: TimeGrid,
    noise: float = 0.0,
    *,
    phis: Sequence[float] = (0.75, 0.84, 0.97),
    temperature: float = 25.0,
    tolerances: dict[str, float] | None = None,
    seed: int = 0,
    settings: OptimizerSettings | None = None,
) -> RecoveryReport:
    """Generate a POD from known parameters, refit, and compare.

    ``kind`` is ``"logistic"`` (truth: LogisticParams) or ``"vtt"`` (truth:
    VttClassParams, one experiment per humidity in ``phis``). ``noise`` is
    additive Gaussian noise as a fraction of the trajectory maximum.
    """
    rng = np.random.default_rng(seed)
    failures: list[str] = []
    if kind == "logistic":
        tol = tolerances or {"k": 1e-3, "m_inf": 1e-3}
        t = grid.times - grid.t_start
        values = _noisy(logistic_solution(t, truth.m0, truth.k, truth.m_inf), noise, rng)
        pod = PodSeries(Trajectory(grid.times, values), EnvPoint(temperature, phis[0]), "synthetic")
        fit = fit_logistic(pod, settings=settings)
        true = {"m0": truth.m0, "k": truth.k, "m_inf": truth.m_inf}
        rel = {n: abs(fit.params[n] - v) / abs(v) for n, v in true.items()}
        for n, lim in tol.items():
            if rel[n] > lim:
                failures.append(f"{n}: relative error {rel[n]:.3g} > {lim:g}")
        return RecoveryReport(kind, true, fit.params, rel, fit.cost, not failures, failures)

    if kind != "vtt":
        raise ValueError(f"unknown model kind {kind!r}")
    tol = tolerances or {"m_max": 1e-2}
    true, rec, rel = {}, {}, {}
    cost = 0.0
    mmax_fit, mmax_true = [], []
    for phi in phis:
        env = EnvPoint(temperature, phi)
        mm = m_max(phi, truth)
        clean = integrate_vtt_rates(truth.k11, truth.k12, mm, env, grid)
        pod = PodSeries(Trajectory(grid.times, _noisy(clean, noise, rng)), env, f"phi={phi:g}")
        fit = fit_vtt_single(pod, settings=settings)
        cost += fit.cost
        key = f"m_max@{phi:g}"
        true[key], rec[key] = mm, fit.params["m_max"]
        rel[key] = abs(rec[key] - mm) / abs(mm)
        for name in ("k11", "k12"):
            k = f"{name}@{phi:g}"
            true[k], rec[k] = getattr(truth, name), fit.params[name]
            rel[k] = abs(rec[k] - true[k]) / true[k]
        mmax_fit.append(rec[key])
        mmax_true.append(mm)
        for n, lim in tol.items():
            key_n = f"{n}@{phi:g}"
            if key_n in rel and rel[key_n] > lim:
                failures.append(f"{key_n}: relative error {rel[key_n]:.3g} > {lim:g}")
    report = RecoveryReport(kind, true, rec, rel, cost, not failures, failures)
    if len(phis) < 3:
        report.underdetermined = True
    else:
        report.abc_truth = solve_ABC(mmax_true, phis[:3], truth.phi_c)
        report.abc_recovered = solve_ABC(mmax_fit, phis[:3], truth.phi_c)
    return report
