"""Acceptance criteria 1-11, one pass/fail line each in the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

from demontape import cycle, markov, performance as perf, ssa, sweep
from demontape.cycle import Mode
from demontape.params import Params

from .conftest import ACCEPTANCE_LINES, random_physical


def record(n, ok, detail):
    line = f"[ACCEPT {n:>2}] {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_1_sandwich_bound():
    t0 = time.perf_counter()
    violations, worst_lo, worst_hi, n = 0, math.inf, math.inf, 0
    for params, tau in sweep.random_draws(10_000, seed=2026):
        obs = cycle.observables(params, tau)
        lo = obs.sigma_tau - obs.dkl_inst
        hi = obs.dkl_asymp - obs.sigma_tau
        worst_lo, worst_hi = min(worst_lo, lo), min(worst_hi, hi)
        violations += (lo <= -1e-10) + (hi < -1e-10)
        n += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60 and n == 10_000
    record(1, ok, f"{n} draws, {violations} violations, worst margins "
                  f"{worst_lo:.2e}/{worst_hi:.2e}, {elapsed:.1f}s")
    assert ok


def test_2_quasistatic_saturation(ref_machine):
    eps = ref_machine.epsilon
    closed = 0.5 * math.log(0.5 / ((1 + eps) / 2)) + 0.5 * math.log(0.5 / ((1 - eps) / 2))
    sig = cycle.observables(ref_machine, 1e3).sigma_tau
    rel = abs(sig - closed) / closed
    ok = rel < 1e-6 and abs(eps - 0.235294) < 1e-6
    record(2, ok, f"sigma(1e3)={sig:.12f} closed form={closed:.12f} rel={rel:.1e}")
    assert ok


def test_3_exponential_relaxation():
    parts, ok = [], True
    for preset in sweep.RELAX_PRESETS:
        p = Params.resolve(**preset)
        fit = cycle.relaxation_decay(p)
        lam = markov.eigen_spectrum(markov.build_rate_matrix(p)).values[fit.eigen_index]
        rel = abs(fit.slope - 2 * lam) / abs(2 * lam)
        ok &= rel < 0.01 and lam < 0
        parts.append(f"slope={fit.slope:.5f} 2lam={2 * lam:.5f} rel={rel:.1e}")
    record(3, ok, "; ".join(parts))
    assert ok


def test_4_mode_geometry():
    rows = sweep.phase_rows(0.5, 101, 101, tau_ref=100.0, optimize=False)
    deltas, eps = sweep.phase_axes(101, 101, 0.5)
    h = max(deltas[1] - deltas[0], eps[1] - eps[0])
    off, sign_bad = [], 0
    for r in rows:
        d, e = r["delta"], r["epsilon"]
        expect = (Mode.REFRIGERATOR if d > e else
                  Mode.DISSIPATIVE if d < -e else Mode.ERASER).value
        if r["mode"] != expect and not (abs(abs(d) - e) <= h + 1e-12):
            off.append((d, e, r["mode"]))
        gap = d - e
        if abs(gap) > 1e-12 and np.sign(r["dQ"]) != np.sign(gap):
            sign_bad += 1
    ok = not off and sign_bad == 0 and len(rows) == 101 * 101
    record(4, ok, f"{len(rows)} cells, {len(off)} mode cells beyond one cell of eps=|delta|, "
                  f"{sign_bad} sign(dQ) mismatches")
    assert ok


def test_5_onset_threshold():
    rng = np.random.default_rng(55)
    worst_theta = worst_dp = 0.0
    flips = 0
    for _ in range(100):
        omega = rng.uniform(0.2, 0.9)
        eps = rng.uniform(0.05, 1.0) * omega
        delta = -eps * rng.uniform(0.05, 0.95)
        p = Params.from_epsilon(eps, omega, gamma=rng.uniform(0.5, 2.0), delta=delta)
        t = perf.onset_time(p)
        worst_theta = max(worst_theta, abs(cycle.relaxation_degree(p, [t])[0]
                                           - 2 * delta / (delta - eps)))
        worst_dp = max(worst_dp, abs(cycle.outgoing_bias(p, [t])[0] + delta))
        before = cycle.observables(p, t * (1 - 1e-4)).mode
        after = cycle.observables(p, t * (1 + 1e-4)).mode
        flips += before is Mode.DISSIPATIVE and after is Mode.ERASER
    ok = worst_theta < 1e-8 and worst_dp < 1e-8 and flips == 100
    record(5, ok, f"max|Theta-target|={worst_theta:.1e} max|d'+d|={worst_dp:.1e} "
                  f"mode flips {flips}/100")
    assert ok


def test_6_peak_criterion_audit():
    audit = sweep.peak_audit(omega=0.5, n=50)
    frac = audit["mismatch_fraction"]
    ok = frac < 0.01
    listed = ", ".join(f"({m['delta']:.3f},{m['epsilon']:.3f})" for m in audit["mismatches"][:10])
    record(6, ok, f"{len(audit['mismatches'])}/{audit['cells']} mismatches ({frac:.2%}) "
                  f"[{listed}]; literal inequality disagrees in "
                  f"{audit['literal_formula_disagreements']} cells")
    assert ok


def test_7_emp_structure():
    omega = 0.5
    grid = omega * np.arange(1, 201) / 200
    h = grid[1] - grid[0]
    curves = {d: perf.emp_curve(d, omega, grid) for d in (-0.2, 0.0, 0.2)}
    start_ok = True
    for d, pts in curves.items():
        lo = perf.eta_carnot_min(d, omega)
        hi = math.atanh(abs(d) + h) / math.atanh(omega) + 1e-12
        start_ok &= lo <= pts[0].eta_C <= hi
    eta_neg = np.array([pt.eta_MP for pt in curves[-0.2]])
    decreasing = bool(np.all(np.diff(eta_neg) < 0))
    first_pos = curves[0.2][0].eta_MP
    ok = start_ok and decreasing and first_pos > 0.9
    record(7, ok, f"cutoff start {'ok' if start_ok else 'BAD'}; delta=-0.2 eta_MP "
                  f"{'decreasing' if decreasing else 'NOT decreasing'} "
                  f"({eta_neg[0]:.3f} -> {eta_neg[-1]:.3f}); delta=+0.2 first "
                  f"eta_MP={first_pos:.3f}")
    assert ok


def _tradeoff_sweep():
    base = dict(delta=0.0, sigma=0.1, omega=0.8, tau=1.0)
    axes = dict(tau=np.geomspace(0.1, 10, 200),
                delta=np.linspace(-0.75, 0.75, 200),
                sigma=np.linspace(0.0, 0.79, 200),
                omega=np.linspace(0.11, 0.99, 200))
    for name, values in axes.items():
        for v in values:
            kw = dict(base, **{name: float(v)})
            yield Params(kw["sigma"], kw["omega"], 1.0, kw["delta"]), kw["tau"]


def test_8_tradeoff_bound():
    checked = violations = 0
    worst_id = 0.0
    for p, tau in _tradeoff_sweep():
        obs = cycle.observables(p, tau)
        if obs.mode is not Mode.ERASER:
            continue
        lhs, rhs, holds = perf.tradeoff_bound(obs, perf.perf_metrics(obs, p))
        violations += not holds
        worst_id = max(worst_id, abs(lhs - obs.sigma_tau / tau) / max(1.0, abs(lhs)))
        checked += 1
    ok = violations == 0 and worst_id < 1e-12 and checked > 500
    record(8, ok, f"{checked} eraser points, {violations} violations, "
                  f"max|lhs - sigma/tau|={worst_id:.1e}")
    assert ok


def test_9_synergy_window():
    p = Params(0.1, 0.8, 1.0, 0.0)
    taus = np.linspace(0.1, 2.0, 100)
    P = perf.eraser_power(p, taus)
    eta = np.array([perf.efficiency_at(p, t) for t in taus])
    ok = bool(np.all(np.diff(P) > 0) and np.all(np.diff(eta) > 0))
    record(9, ok, f"P {P[0]:.4f} -> {P[-1]:.4f}, eta {eta[0]:.4f} -> {eta[-1]:.4f} "
                  f"on {taus.size} points in [0.1, 2]")
    assert ok


def test_10_monte_carlo(ref_machine):
    t0 = time.perf_counter()
    reports = [ssa.compare_with_analytic(ssa.McConfig(ref_machine, tau, 10 ** 6, seed=2026))
               for tau in (0.5, 1.0, 5.0)]
    again = ssa.compare_with_analytic(ssa.McConfig(ref_machine, 1.0, 10 ** 6, seed=2026))
    elapsed = time.perf_counter() - t0
    same = json.dumps(again, sort_keys=True) == json.dumps(reports[1], sort_keys=True)
    zmax = max(abs(c["z"]) for r in reports for c in r["checks"].values())
    ok = all(r["passed"] for r in reports) and same and elapsed < 120
    record(10, ok, f"max|z|={zmax:.2f} over 3 taus x 3 observables, "
                   f"rerun identical={same}, {elapsed:.1f}s")
    assert ok


def test_11_propagator_cross_check():
    rng = np.random.default_rng(11)
    worst = worst_semi = 0.0
    fallback = 0
    for p in random_physical(rng, 1000):
        R = markov.build_rate_matrix(p)
        tau = 10 ** rng.uniform(-2, 2)
        spec = markov.expm_spectral(R, tau)
        if spec is None:
            fallback += 1
            spec = markov.transition_matrix(R, tau)
        worst = max(worst, float(np.max(np.abs(spec - markov.expm_dense(R, tau)))))
        t1, t2 = tau * rng.uniform(0.1, 0.9), tau
        lhs = markov.transition_matrix(R, t1 + t2)
        rhs = markov.transition_matrix(R, t1) @ markov.transition_matrix(R, t2)
        worst_semi = max(worst_semi, float(np.max(np.abs(lhs - rhs))))
    ok = worst < 1e-10 and worst_semi < 1e-10
    record(11, ok, f"1000 draws, max|spectral-dense|={worst:.1e}, semigroup {worst_semi:.1e}, "
                   f"{fallback} ill-conditioned fallbacks")
    assert ok
