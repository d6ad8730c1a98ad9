"""Acceptance criteria 1-12, one test (and one PASS/FAIL line) each.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are
repeated in the terminal summary. ``python tests/test_acceptance.py``
runs every criterion and prints only the status lines.
"""

from __future__ import annotations

import math
import random
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import record  # noqa: E402
from oracles import f_decimal, logistic_fd, m_max_decimal, rel_max_error, vtt_fd  # noqa: E402

from moldgrowth import datasets as ds  # noqa: E402
from moldgrowth.estimate import (  # noqa: E402
    OptimizerSettings,
    PodSeries,
    fisher_matrix,
    fit_logistic,
    fit_vtt_joint,
    fit_vtt_single,
    initial_condition_sweep,
    logistic_fisher,
    perturbation_study,
    recovery_test,
    solve_ABC,
    vtt_fisher,
    vtt_fisher_joint,
)
from moldgrowth.integrate import (  # noqa: E402
    EnvSchedule,
    TimeGrid,
    integrate_logistic,
    integrate_logistic_sensitivities,
    integrate_vtt,
    integrate_vtt_sensitivities,
    logistic_solution,
)
from moldgrowth.models import (  # noqa: E402
    VTT_CLASSES,
    EnvPoint,
    LogisticParams,
    ResponseCoeffs,
    VttClassParams,
    m_max,
    response_time_f,
    vtt_class,
)
from moldgrowth.project import extract_g_params, fit_h_params  # noqa: E402

BAMBOO = ("phi1", "phi2", "phi3")
LITERATURE = ("johansson", "nielsen")
BAMBOO_PRIOR = VttClassParams(1.0, 2.0, 1.0, 7.0, -2.0, 0.75)


def check(number, title, ok, detail):
    record(number, title, bool(ok), detail)
    assert ok, detail


# ------------------------------------------------------------ shared fits


def g_pod(name):
    g = extract_g_params(ds.bamboo_series(name))
    from moldgrowth.project import resample

    return PodSeries(resample("g", g, TimeGrid.days(ds.BAMBOO_HORIZON), name), ds.bamboo_env(name), name)


def h_pod(name):
    return PodSeries(ds.published_pod(name, "h"), ds.experiment_env(name), name)


@lru_cache(maxsize=None)
def vtt_single(name):
    return fit_vtt_single(g_pod(name))


@lru_cache(maxsize=None)
def vtt_joint():
    m_ref = [ds.VTT_SINGLE_TABLE[n]["params"][2] for n in BAMBOO]
    return fit_vtt_joint([g_pod(n) for n in BAMBOO], m_ref), m_ref


@lru_cache(maxsize=None)
def logistic(name):
    return fit_logistic(h_pod(name))


# ------------------------------------------------------------ criteria


def test_criterion_01_response_time_and_m_max_oracles():
    rng = random.Random(0)
    worst_f = worst_m = 0.0
    classes = list(VTT_CLASSES.values())
    for _ in range(1000):
        T, phi = rng.uniform(0.1, 50.0), rng.uniform(0.01, 1.0)
        ref = float(f_decimal(T, phi))
        worst_f = max(worst_f, abs(response_time_f(EnvPoint(T, phi)) - ref) / ref)
        p = rng.choice(classes + [BAMBOO_PRIOR])
        ref_m = float(m_max_decimal(phi, p.A, p.B, p.C, p.phi_c))
        got = m_max(phi, p)
        worst_m = max(worst_m, abs(got - ref_m) / ref_m if ref_m else abs(got))
    prior = (m_max(0.84, BAMBOO_PRIOR), m_max(0.97, BAMBOO_PRIOR))
    ok = worst_f < 1e-12 and worst_m < 1e-12 and abs(prior[0] - 3.26) <= 0.005 and abs(prior[1] - 5.61) <= 0.005
    check(1, "f/Mmax oracles", ok,
          f"max rel err f={worst_f:.2e}, Mmax={worst_m:.2e}; prior Mmax=({prior[0]:.4f}, {prior[1]:.4f}) vs (3.26, 5.61)")


def test_criterion_02_logistic_closed_form_equivalence():
    grid = TimeGrid.days(200)
    errs = []
    for name in BAMBOO:
        p = LogisticParams(*ds.LOGISTIC_TABLE[name]["params"])
        num = integrate_logistic(p, grid).values
        errs.append(float(np.max(np.abs(num - logistic_solution(grid.times, p.m0, p.k, p.m_inf)))))
    check(2, "logistic RK4 vs closed form", max(errs) < 1e-6, "max abs diff per experiment " + ", ".join(f"{e:.1e}" for e in errs))


def test_criterion_03_baseline_vtt_run():
    params, env = vtt_class("medium-resistant"), EnvPoint(22.0, 0.97)
    sched = EnvSchedule.constant(env)
    a = integrate_vtt(params, ResponseCoeffs(), sched, TimeGrid.days(700, 6.0)).final
    b = integrate_vtt(params, ResponseCoeffs(), sched, TimeGrid.days(700, 3.0)).final
    ok = abs(a - 3.03) <= 0.05 and abs(a - b) < 1e-6
    check(3, "baseline VTT M(700 d)", ok, f"M(700)={a:.5f} (3.03 +/- 0.05), step-halving change {abs(a - b):.1e}")


def test_criterion_04_perturbation_sensitivity():
    rep = perturbation_study(ResponseCoeffs(), "b3", [1.0, 0.99, 0.999])
    l2_ratio = rep.l2_differences[1] / rep.l2_differences[2]
    e99, e999 = rep.relative_errors[1], rep.relative_errors[2]
    ok = l2_ratio > 10 and e999 <= 0.10 and e99 >= 3 * e999
    check(4, "b3 perturbation ratios", ok,
          f"L2(0.99)/L2(0.999)={l2_ratio:.2f} (need >10); rel err 0.99={e99:.2e}, 0.999={e999:.2e} "
          f"(need <=0.10 and ratio >=3, got {e99 / e999:.2f}); finals {[round(v, 5) for v in rep.finals]}")


def test_criterion_05_projection_tables():
    parts, ok = [], True
    for name in BAMBOO:
        g = extract_g_params(ds.bamboo_series(name))
        ref = ds.G_TABLE[name][0]
        g_ok = (g.a, g.b, g.c) == (ref.a, ref.b, ref.c)
        fit = fit_h_params(ds.bamboo_series(name))
        href, hres = ds.H_TABLE[name]
        dev = {
            "a": abs(fit.params.a / href.a - 1), "b": abs(fit.params.b / href.b - 1),
            "c": abs(fit.params.c / href.c - 1), "res": abs(fit.residual / hres - 1),
        }
        h_ok = dev["a"] <= 0.02 and dev["b"] <= 0.10 and dev["c"] <= 0.05 and dev["res"] <= 0.30
        ok &= g_ok and h_ok
        parts.append(
            f"{name}: g={'ok' if g_ok else 'MISMATCH'} h=({fit.params.a:.3f}, {fit.params.b:.3f}, {fit.params.c:.2f}; "
            f"res {fit.residual:.3f}) {'ok' if h_ok else 'MISMATCH'}"
        )
    parts.append("literature h-fits not evaluable (no observation series bundled)")
    check(5, "projection tables", ok, "; ".join(parts))


def test_criterion_06_logistic_fits():
    parts, ok = [], True
    for name in BAMBOO + LITERATURE:
        fit = logistic(name)
        ref = ds.LOGISTIC_TABLE[name]["params"]
        k_tol = 0.05 if name in BAMBOO else 0.10
        dk, dm = fit.params["k"] / ref[1] - 1, fit.params["m_inf"] / ref[2] - 1
        n_t = len(h_pod(name).trajectory)
        r_ref = ds.LOGISTIC_RESIDUALS.get(name, 5e-3 * math.sqrt(n_t))
        cost_ok = fit.cost <= 10 * r_ref**2
        row_ok = abs(dk) <= k_tol and abs(dm) <= 0.02 and cost_ok and fit.converged
        ok &= row_ok
        parts.append(f"{name}: k {dk:+.1%} m_inf {dm:+.2%} J={fit.cost:.1e}{'' if row_ok else ' MISMATCH'}")
    check(6, "logistic fits", ok, "; ".join(parts))


def test_criterion_07_vtt_fits():
    parts, ok = [], True
    for name in BAMBOO:
        fit = vtt_single(name)
        ref_m = ds.VTT_SINGLE_TABLE[name]["params"][2]
        ref_r = ds.VTT_SINGLE_RESIDUALS[name]
        r = fit.residuals_rms[0]
        row_ok = abs(fit.params["m_max"] - ref_m) <= 0.1 and r <= 1.3 * ref_r and fit.converged
        ok &= row_ok
        parts.append(f"{name}: Mmax {fit.params['m_max']:.3f} (ref {ref_m}) res {r:.4f} (<= {1.3 * ref_r:.3f}){'' if row_ok else ' MISMATCH'}")
    joint, _ = vtt_joint()
    ref = ds.VTT_JOINT_TABLE["residuals"]
    dev = [r / e - 1 for r, e in zip(joint.residuals_rms, ref)]
    j_ok = all(abs(d) <= 0.30 for d in dev) and joint.converged
    ok &= j_ok
    parts.append(
        f"joint k11={joint.params['k11']:.3g} k12={joint.params['k12']:.3g} residuals "
        + ", ".join(f"{r:.3f}" for r in joint.residuals_rms)
        + f" vs {ref} +/-30%{'' if j_ok else ' MISMATCH'}"
    )
    check(7, "VTT fits", ok, "; ".join(parts))


def test_criterion_08_abc_solve():
    rng = np.random.default_rng(1)
    phis, worst = (0.75, 0.84, 0.97), 0.0
    for _ in range(200):
        A, B, C = rng.uniform(-5, 5, 3)
        xs = [(0.75 - p) / (0.75 - 1) for p in phis]
        got = solve_ABC([A + B * x + C * x * x for x in xs], phis, 0.75)
        worst = max(worst, max(abs(g - v) for g, v in zip(got, (A, B, C))))
    abc = solve_ABC([ds.VTT_SINGLE_TABLE[n]["params"][2] for n in BAMBOO], phis, 0.75)
    ok = worst < 1e-12 and all(abs(a - e) <= 0.15 for a, e in zip(abc, ds.ABC_TABLE))
    check(8, "Mmax polynomial solve", ok,
          f"synthetic max err {worst:.1e}; bamboo (A,B,C)=({abc[0]:.3f}, {abc[1]:.3f}, {abc[2]:.3f}) vs {ds.ABC_TABLE} +/-0.15")


def _sym_psd(F):
    d = np.sqrt(np.diag(F))
    G = F / np.outer(d, d)
    return np.allclose(F, F.T, rtol=0, atol=1e-10 * np.abs(F).max()) and np.linalg.eigvalsh(G).min() >= -1e-10


def test_criterion_09_fisher_and_eta():
    reports, parts, ok = [], [], True
    max_log_eta = 0.0
    for name in BAMBOO + LITERATURE:
        rep = logistic_fisher(logistic(name), [h_pod(name)])
        reports.append(rep)
        etas_ok = rep.eta_available and all(e <= 0.1 for e in rep.eta)
        ok &= etas_ok
        max_log_eta = max(max_log_eta, max(e for e in rep.eta if e is not None))
    parts.append(f"logistic max eta {max_log_eta:.3f} (<= 0.1)")
    for name in BAMBOO:
        rep = vtt_fisher(vtt_single(name), [g_pod(name)])
        reports.append(rep)
        e = rep.eta
        order_ok = e[0] is not None and e[2] is not None and e[0] > 10 * e[2]
        ok &= order_ok
        ratio = "n/a" if None in (e[0], e[2]) else f"{e[0] / e[2]:.2f}"
        parts.append(f"VTT {name} eta(k11)/eta(Mmax)={ratio} (need >10)")
    joint, m_ref = vtt_joint()
    reports.append(vtt_fisher_joint(joint, [g_pod(n) for n in BAMBOO], m_ref))
    sym = all(_sym_psd(r.matrix) for r in reports)
    ok &= sym
    parts.insert(0, f"F symmetric PSD on {len(reports)} fits: {sym}")
    check(9, "Fisher matrix and eta", ok, "; ".join(parts))


def test_criterion_10_sensitivity_correctness():
    vtt_err, log_err = [], []
    for name in BAMBOO:
        fit, pod = vtt_single(name), g_pod(name)
        p = (fit.params["k11"], fit.params["k12"], fit.params["m_max"])
        _, sens = integrate_vtt_sensitivities(p, pod.env, ResponseCoeffs(), pod.grid)
        fd, mask = vtt_fd(p, pod.env, pod.grid)
        vtt_err.append(max(rel_max_error(sens.theta, fd, mask)))
    for name in BAMBOO + LITERATURE:
        fit, pod = logistic(name), h_pod(name)
        p = LogisticParams(fit.params["m0"], fit.params["k"], fit.params["m_inf"])
        _, sens = integrate_logistic_sensitivities(p, pod.grid)
        fd = logistic_fd(pod.grid.times, p.m0, p.k, p.m_inf)
        log_err.append(max(rel_max_error(sens.theta, fd)))
    ok = max(vtt_err) < 1e-3 and max(log_err) < 1e-4
    check(10, "sensitivities vs finite differences", ok,
          f"VTT max rel err {max(vtt_err):.1e} (< 1e-3, branch-switch points masked); logistic {max(log_err):.1e} (< 1e-4)")


def test_criterion_11_identifiability_recovery():
    fast = OptimizerSettings(n_starts=3)
    truth_l = LogisticParams(1.3e-3, 0.10, 5.24)
    truth_v = VttClassParams(4.0, 40.0, 3.0, 7.0, -5.0, 0.75)
    parts, ok = [], True
    for noise, tol_l, tol_v in ((0.0, 1e-3, 1e-2), (0.01, 0.05, 0.05)):
        rl = recovery_test("logistic", truth_l, TimeGrid.days(56), noise, tolerances={"k": tol_l, "m_inf": tol_l}, seed=1)
        rv = recovery_test("vtt", truth_v, TimeGrid.days(150), noise, tolerances={"m_max": tol_v}, seed=1, settings=fast)
        worst_v = max(v for k, v in rv.relative_errors.items() if k.startswith("m_max"))
        ok &= rl.passed and rv.passed
        parts.append(
            f"noise {noise:.0%}: logistic k {rl.relative_errors['k']:.1e} m_inf {rl.relative_errors['m_inf']:.1e}"
            f" (<= {tol_l:g}); VTT Mmax {worst_v:.1e} (<= {tol_v:g})"
        )
        if noise == 0.0:
            abc_err = max(abs(a - b) for a, b in zip(rv.abc_recovered, rv.abc_truth))
            parts.append(f"noiseless (A,B,C) error {abc_err:.1e}")
    check(11, "identifiability recovery", ok, "; ".join(parts))


def test_criterion_12_initial_condition_sweep():
    fit = logistic("johansson")
    p = LogisticParams(fit.params["m0"], fit.params["k"], fit.params["m_inf"])
    rep = initial_condition_sweep(p, [0.5, 1.0, 1.5], TimeGrid.days(ds.LITERATURE_HORIZON))
    l2 = [rep.l2_differences[i] / rep.baseline_norm for i in (0, 2)]
    fin = [rep.relative_errors[i] for i in (0, 2)]
    ok = max(l2) <= 0.20 and max(fin) < 0.01
    check(12, "initial-condition sweep", ok,
          f"relative L2 change {l2[0]:.3f}/{l2[1]:.3f} (<= 0.20), final change {max(fin):.1e} (< 1%)")


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted((n, f) for n, f in globals().items() if n.startswith("test_criterion_")):
        start = time.perf_counter()
        try:
            fn()
        except AssertionError:
            failures += 1
        print(f"    ({time.perf_counter() - start:.1f} s)")
    sys.exit(1 if failures else 0)
