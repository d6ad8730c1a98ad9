"""Command-line interface: project, fit, simulate, perturb, repro.

Every subcommand writes its outputs into ``--out`` (atomically) and exits
non-zero on invalid input or when a fit fails to converge. A JSON
``--config`` file may set any option by its long name (dashes or
underscores); config values override command-line flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import datasets as ds
from . import repro
from .estimate import (
    FisherReport,
    FitResult,
    OptimizerSettings,
    PodSeries,
    VttScenario,
    fit_logistic,
    fit_vtt_joint,
    fit_vtt_single,
    initial_condition_sweep,
    logistic_fisher,
    perturbation_study,
    vtt_fisher,
    vtt_fisher_joint,
    LOGISTIC_BOUNDS,
    VTT_RATE_BOUNDS,
)
from .integrate import EnvSchedule, TimeGrid, Trajectory, integrate_logistic, integrate_vtt
from .io import (
    ResultDocument,
    atomic_write_text,
    emit_plot_series,
    input_digest,
    parse_experiment_csv,
    parse_plot_series,
    write_result,
)
from .models import (
    LOGISTIC_CLASS_M0,
    EnvPoint,
    LogisticParams,
    ResponseCoeffs,
    VttClassParams,
    logistic_class,
    vtt_class,
)
from .project import extract_g_params, fit_h_params, projection_residual, resample

log = logging.getLogger("moldgrowth")


class UsageError(ValueError):
    """Invalid configuration detected before any computation."""


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _grid(horizon: float, args) -> TimeGrid:
    if horizon <= 0:
        raise UsageError(f"horizon must be positive, got {horizon}")
    dt = args.dt / 1440.0
    n = round(horizon / dt)
    if abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise UsageError(f"horizon {horizon} d is not a whole number of {args.dt} min steps")
    return TimeGrid(0.0, float(horizon), dt)


def _settings(args) -> OptimizerSettings:
    return OptimizerSettings(maxfev=args.maxfev, n_starts=args.n_starts, seed=args.seed)


def _fisher_dict(rep: FisherReport) -> dict:
    return {
        "names": list(rep.names),
        "matrix": rep.matrix,
        "eta": {n: e for n, e in zip(rep.names, rep.eta)},
        "condition": rep.condition,
        "scaled_condition": rep.scaled_condition,
        "n_experiments": rep.n_experiments,
        "horizon": rep.horizon,
        "config": {
            "sigma_m": rep.config.sigma_m,
            "sigma_p": rep.config.sigma_p,
            "time_scale": rep.config.time_scale,
            "cond_limit": rep.config.cond_limit,
        },
    }


def _fit_residuals(fit: FitResult) -> dict:
    return {
        "cost": fit.cost,
        "l2": dict(zip(fit.labels, fit.residuals)),
        "rms": dict(zip(fit.labels, fit.residuals_rms)),
        "n_eval": fit.n_eval,
        "converged": fit.converged,
    }


def _write(out: Path, name: str, text: str) -> Path:
    path = atomic_write_text(out / name, text)
    log.info("wrote %s", path)
    return path


def _write_series(out: Path, stem: str, trajectories, labels=None, metadata=None):
    csv_text, svg_text = emit_plot_series(trajectories, labels, metadata)
    _write(out, f"{stem}.csv", csv_text)
    _write(out, f"{stem}.svg", svg_text)


def _parse_bounds(specs: Sequence[str], names: Sequence[str], allowed: dict) -> tuple[list, list] | None:
    if not specs:
        return None
    lower = [allowed[n][0] for n in names]
    upper = [allowed[n][1] for n in names]
    for spec in specs:
        try:
            name, rng = spec.split("=", 1)
            lo, hi = (float(v) for v in rng.split(":", 1))
        except ValueError:
            raise UsageError(f"bounds must look like name=lower:upper, got {spec!r}") from None
        if name not in names:
            raise UsageError(f"unknown parameter {name!r} in bounds; expected one of {list(names)}")
        if not lo < hi:
            raise UsageError(f"bounds for {name}: lower {lo} must be below upper {hi}")
        a_lo, a_hi = allowed[name]
        if lo < a_lo or hi > a_hi:
            raise UsageError(f"bounds for {name} must lie within [{a_lo:g}, {a_hi:g}]")
        i = list(names).index(name)
        lower[i], upper[i] = lo, hi
    return lower, upper


VTT_ALLOWED = {"k11": VTT_RATE_BOUNDS, "k12": VTT_RATE_BOUNDS, "m_max": (0.0, 6.0)}
LOGISTIC_ALLOWED = dict(zip(("m0", "k", "m_inf"), zip(*LOGISTIC_BOUNDS)))


def _load_pod(path: str) -> tuple[PodSeries, str]:
    text = _read(path)
    trajs, meta = parse_plot_series(text)
    if len(trajs) != 1:
        raise UsageError(f"{path}: a POD file holds exactly one series, found {len(trajs)}")
    try:
        env = EnvPoint(float(meta["T"]), float(meta["RH"]))
    except KeyError as exc:
        raise UsageError(f"{path}: missing '# {exc.args[0]}=' header") from None
    t = trajs[0].times
    if t[0] != 0.0 or not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=1e-12):
        raise UsageError(f"{path}: POD must start at day 0 on a uniform grid")
    label = Path(path).stem
    traj = Trajectory(TimeGrid(0.0, float(t[-1]), float(t[1] - t[0])).times, trajs[0].values, label)
    return PodSeries(traj, env, label), text


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_project(args) -> int:
    out = Path(args.out)
    for path in args.inputs:
        text = _read(path)
        odd = parse_experiment_csv(text)
        stem = Path(path).stem
        horizon = args.horizon if args.horizon is not None else float(odd.times[-1])
        grid = _grid(horizon, args)
        if args.family == "g":
            params = extract_g_params(odd)
            residual, converged = projection_residual(odd, "g", params), True
        else:
            fit = fit_h_params(odd)
            params, residual, converged = fit.params, fit.residual, fit.converged
        values = {"a": params.a, "b": params.b, "c": params.c}
        doc = ResultDocument(
            kind=f"projection-{args.family}",
            input_digest=input_digest(text),
            params=values,
            residuals={"l2": residual, "converged": converged},
            tool_version=__version__,
            extra={"input": stem, "temperature": odd.temperature, "humidity": odd.humidity},
        )
        _write(out, f"{stem}_{args.family}.json", write_result(doc))
        pod = resample(args.family, params, grid, stem)
        meta = {"T": f"{odd.temperature:.17g}", "RH": f"{odd.humidity:.17g}", "family": args.family}
        _write_series(out, f"pod_{stem}", [pod], ["pod"], meta)
        print(f"{stem}: family={args.family} a={params.a:.6g} b={params.b:.6g} c={params.c:.6g} residual={residual:.4g}")
        if not converged:
            log.error("%s: projection fit did not converge", stem)
            return 1
    return 0


def cmd_fit(args) -> int:
    out = Path(args.out)
    loaded = [_load_pod(p) for p in args.inputs]
    pods = [p for p, _ in loaded]
    digest = input_digest(*(t for _, t in loaded))
    settings = _settings(args)
    if args.model == "logistic":
        if args.joint:
            raise UsageError("--joint applies to the vtt model only")
        bounds = _parse_bounds(args.bounds, ("m0", "k", "m_inf"), LOGISTIC_ALLOWED)
        ok = True
        for pod in pods:
            fit = fit_logistic(pod, bounds, settings)
            fisher = logistic_fisher(fit, [pod])
            ok &= _emit_fit(out, f"fit_logistic_{pod.label}", "logistic", digest, fit, fisher)
        return 0 if ok else 1

    if args.joint:
        if len(pods) < 2:
            raise UsageError("--joint needs at least two POD files")
        bounds = _parse_bounds(args.bounds, ("k11", "k12"), VTT_ALLOWED)
        singles = []
        if args.m_max:
            if len(args.m_max) != len(pods):
                raise UsageError("--m-max needs one value per POD file")
            m_max_values = args.m_max
        else:
            singles = [fit_vtt_single(p, settings=settings) for p in pods]
            m_max_values = [s.params["m_max"] for s in singles]
        fit = fit_vtt_joint(pods, m_max_values, bounds, settings=settings)
        fisher = vtt_fisher_joint(fit, pods, m_max_values)
        extra = {"m_max": dict(zip(fit.labels, m_max_values))}
        ok = all(s.converged for s in singles)
        return 0 if _emit_fit(out, "fit_vtt_joint", "vtt-joint", digest, fit, fisher, extra) and ok else 1

    bounds = _parse_bounds(args.bounds, ("k11", "k12", "m_max"), VTT_ALLOWED)
    ok = True
    for pod in pods:
        fit = fit_vtt_single(pod, bounds, settings=settings)
        fisher = vtt_fisher(fit, [pod])
        ok &= _emit_fit(out, f"fit_vtt_{pod.label}", "vtt-single", digest, fit, fisher)
    return 0 if ok else 1


def _emit_fit(out, stem, kind, digest, fit: FitResult, fisher: FisherReport, extra=None) -> bool:
    doc = ResultDocument(
        kind=kind,
        input_digest=digest,
        params=fit.params,
        residuals=_fit_residuals(fit),
        fisher=_fisher_dict(fisher),
        tool_version=__version__,
        extra=extra or {},
    )
    _write(out, f"{stem}.json", write_result(doc))
    params = " ".join(f"{k}={v:.6g}" for k, v in fit.params.items())
    eta = " ".join(f"{n}={'n/a' if e is None else f'{e:.3g}'}" for n, e in zip(fisher.names, fisher.eta))
    print(f"{stem}: {params} cost={fit.cost:.4g} converged={fit.converged} eta[{eta}]")
    if not fit.converged:
        log.error("%s: optimizer did not converge", stem)
    return fit.converged


def _vtt_params(args) -> VttClassParams:
    explicit = [args.k11, args.k12, args.A, args.B, args.C, args.phi_c]
    if args.cls and any(v is not None for v in explicit):
        raise UsageError("give either --class or explicit parameters, not both")
    if args.cls:
        return vtt_class(args.cls)
    if any(v is None for v in explicit):
        raise UsageError("vtt model needs --class or all of --k11 --k12 --A --B --C --phi-c")
    return VttClassParams(*explicit)


def _logistic_params(args) -> LogisticParams:
    explicit = [args.k, args.m_inf]
    if args.cls:
        if any(v is not None for v in explicit):
            raise UsageError("give either --class or explicit parameters, not both")
        p = logistic_class(args.cls)
        return LogisticParams(args.m0 if args.m0 is not None else p.m0, p.k, p.m_inf)
    if any(v is None for v in explicit):
        raise UsageError("logistic model needs --class or both --k and --m-inf")
    return LogisticParams(args.m0 if args.m0 is not None else LOGISTIC_CLASS_M0, args.k, args.m_inf)


def cmd_simulate(args) -> int:
    out = Path(args.out)
    grid = _grid(args.days, args)
    if args.model == "vtt":
        params = _vtt_params(args)
        env = EnvPoint(args.T, args.rh)
        traj = integrate_vtt(params, ResponseCoeffs(), EnvSchedule.constant(env), grid, args.m_init)
        pdict = {f: getattr(params, f) for f in ("k11", "k12", "A", "B", "C", "phi_c")}
        extra = {"temperature": args.T, "humidity": args.rh}
    else:
        params = _logistic_params(args)
        traj = integrate_logistic(params, grid)
        pdict = {"m0": params.m0, "k": params.k, "m_inf": params.m_inf}
        extra = {}
    hit = np.nonzero(traj.values >= 1.0)[0]
    onset = float(traj.times[hit[0]]) if hit.size else None
    extra.update({"days": args.days, "dt_minutes": args.dt, "class": args.cls or ""})
    doc = ResultDocument(
        kind=f"simulate-{args.model}",
        input_digest=input_digest(json.dumps(pdict, sort_keys=True), json.dumps(extra, sort_keys=True)),
        params=pdict,
        residuals={},
        tool_version=__version__,
        extra={**extra, "final": traj.final, "first_day_at_index_1": onset},
    )
    stem = f"simulate_{args.model}"
    _write(out, f"{stem}.json", write_result(doc))
    _write_series(out, stem, [traj], ["M"])
    onset_text = "never" if onset is None else f"{onset:.4g}"
    print(f"{stem}: final M={traj.final:.6g} first day with M>=1: {onset_text}")
    return 0


def cmd_perturb(args) -> int:
    out = Path(args.out)
    scales = args.scales
    if 1.0 not in scales:
        raise UsageError("the scale list must include the baseline 1")
    if args.model == "vtt":
        if args.coefficient not in ("b0", "b1", "b2", "b3"):
            raise UsageError("vtt perturbations act on one of b0, b1, b2, b3")
        _grid(args.days, args)
        params = vtt_class(args.cls or "medium-resistant")
        scenario = VttScenario(params, EnvPoint(args.T, args.rh), float(args.days), args.dt / 1440.0)
        rep = perturbation_study(ResponseCoeffs(), args.coefficient, scales, scenario)
    else:
        if args.coefficient != "m0":
            raise UsageError("logistic perturbations act on m0")
        p = ds.LOGISTIC_TABLE["johansson"]["params"]
        base = LogisticParams(
            args.m0 if args.m0 is not None else p[0],
            args.k if args.k is not None else p[1],
            args.m_inf if args.m_inf is not None else p[2],
        )
        rep = initial_condition_sweep(base, scales, _grid(args.days, args))
    rows = [rep.row(s) for s in scales]
    doc = ResultDocument(
        kind=f"perturb-{args.model}",
        input_digest=input_digest(json.dumps(vars_for_digest(args), sort_keys=True)),
        params={"coefficient": args.coefficient, "scales": scales},
        residuals={"rows": rows, "baseline_norm": rep.baseline_norm},
        tool_version=__version__,
    )
    stem = f"perturb_{args.model}_{args.coefficient}"
    _write(out, f"{stem}.json", write_result(doc))
    _write_series(out, stem, rep.trajectories, [f"scale={s:g}" for s in scales])
    for r in rows:
        print(f"scale={r['scale']:g} final={r['final']:.6g} rel_error={r['relative_error']:.4g} l2={r['l2_difference']:.4g}")
    return 0


def vars_for_digest(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "out", "config", "verbose")}


def cmd_repro(args) -> int:
    out = Path(args.out)
    tables = args.tables.split(",") if args.tables else list(repro.TABLES)
    for t in tables:
        if t not in repro.TABLES:
            raise UsageError(f"unknown table {t!r}; choose from {sorted(repro.TABLES)}")
    ctx = repro.ReproContext(dt=args.dt / 1440.0, settings=_settings(args))
    cells, ctx = repro.run(tables, ctx)
    summary = repro.summarize(cells)
    doc = ResultDocument(
        kind="repro",
        input_digest=input_digest(",".join(tables)),
        params={"tables": tables},
        residuals=summary,
        tool_version=__version__,
        extra={"cells": [c.as_dict() for c in cells], "converged": ctx.converged},
    )
    _write(out, "repro_report.json", write_result(doc))
    _write(out, "repro_report.txt", repro.format_cells(cells) + "\n")
    print(repro.format_cells(cells))
    print(f"cells={summary['cells']} ok={summary['passed']} mismatch={summary['failed']} info={summary['informational']}")
    if not ctx.converged:
        log.error("at least one fit did not converge")
        return 1
    return 1 if args.strict and summary["failed"] else 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--dt", type=float, default=6.0, help="time step in minutes (default 6)")
    common.add_argument("--seed", type=int, default=0, help="multistart seed (default 0)")
    common.add_argument("--config", help="JSON file whose keys override flags")
    common.add_argument("-v", "--verbose", action="store_true")

    opt = argparse.ArgumentParser(add_help=False)
    opt.add_argument("--n-starts", type=int, default=8)
    opt.add_argument("--maxfev", type=int, default=50_000)

    parser = argparse.ArgumentParser(prog="moldgrowth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", parents=[common], help="project observation files onto g or h")
    p.add_argument("--family", choices=("g", "h"), required=True)
    p.add_argument("--horizon", type=float, help="POD horizon in days (default: last observation)")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fit", parents=[common, opt], help="fit a model to POD files")
    p.add_argument("--model", choices=("vtt", "logistic"), required=True)
    p.add_argument("--joint", action="store_true", help="shared (k11, k12) across experiments")
    p.add_argument("--m-max", type=_floats, help="fixed Mmax per POD for --joint")
    p.add_argument("--bounds", action="append", default=[], help="name=lower:upper (repeatable)")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_fit)

    def model_params(p):
        p.add_argument("--class", dest="cls", help="vulnerability class name")
        for name in ("k11", "k12", "A", "B", "C"):
            p.add_argument(f"--{name}", type=float)
        p.add_argument("--phi-c", type=float)
        p.add_argument("--m0", type=float)
        p.add_argument("--k", type=float)
        p.add_argument("--m-inf", type=float)

    p = sub.add_parser("simulate", parents=[common], help="integrate a model")
    p.add_argument("--model", choices=("vtt", "logistic"), required=True)
    model_params(p)
    p.add_argument("--T", type=float, default=25.0, help="temperature, Celsius")
    p.add_argument("--rh", type=float, default=0.97, help="relative humidity, fraction")
    p.add_argument("--days", type=float, default=200.0)
    p.add_argument("--m-init", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("perturb", parents=[common], help="scale one coefficient and compare")
    p.add_argument("--model", choices=("vtt", "logistic"), default="vtt")
    p.add_argument("--coefficient", default="b3")
    p.add_argument("--scales", type=_floats, default=[1.0, 0.99, 0.999])
    model_params(p)
    p.add_argument("--T", type=float, default=22.0)
    p.add_argument("--rh", type=float, default=0.97)
    p.add_argument("--days", type=float, default=700.0)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("repro", parents=[common, opt], help="reproduce the reference tables")
    p.add_argument("--tables", help="comma-separated subset of 3,5,6,7,8,9")
    p.add_argument("--strict", action="store_true", help="exit 1 when any cell mismatches")
    p.set_defaults(func=cmd_repro)
    return parser


def apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not args.config:
        return args
    cfg = json.loads(_read(args.config))
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in cfg.items():
        dest = "cls" if key == "class" else key.replace("-", "_")
        if dest in ("func", "command", "config") or not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} for '{args.command}'")
        setattr(args, dest, value)
    return args


def validate(args) -> None:
    if not args.dt > 0:
        raise UsageError("--dt must be positive")
    if getattr(args, "n_starts", 1) < 1 or getattr(args, "maxfev", 1) < 1:
        raise UsageError("--n-starts and --maxfev must be positive")
    if hasattr(args, "scales") and (not args.scales or any(s <= 0 for s in args.scales)):
        raise UsageError("scales must be positive numbers")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        args = apply_config(args)
        validate(args)
        return args.func(args)
    except (UsageError, FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
