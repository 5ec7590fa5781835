"""Grid evaluation, plot datasets, validation reports and serialization."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, cycle, markov, performance
from .cycle import Mode
from .params import Params

AXIS_NAMES = ("sigma", "omega", "gamma", "delta", "epsilon", "tau", "p0")
CELL_BUDGET = 10 ** 6

CURVE_COLUMNS = ("tau", "delta_prime", "theta", "dQ", "dSB", "sigma_tau", "dkl_inst",
                 "dkl_asymp", "mode", "power", "efficiency", "tradeoff_lhs",
                 "tradeoff_rhs")
PHASE_COLUMNS = ("delta", "epsilon", "tau_ref", "mode", "dQ", "dSB", "peak_exists",
                 "tau_m", "p_max", "tau_star")
PARETO_COLUMNS = ("tau", "power", "efficiency", "is_max_power")
EMP_COLUMNS = ("epsilon", "eta_C", "eta_MP", "tau_m", "peak_exists", "p_max",
               "eta_lower", "eta_upper")
RELAX_COLUMNS = ("sigma", "omega", "gamma", "delta", "fitted_rate", "eigen_index",
                 "eigenvalue", "rel_error", "tau_lo", "tau_hi")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}")
        if self.count < 1:
            raise ValueError("axis count must be at least 1")
        if self.scale not in ("linear", "log"):
            raise ValueError("axis scale must be 'linear' or 'log'")
        if self.scale == "log" and not (self.lo > 0 and self.hi > 0):
            raise ValueError("log axis needs positive bounds")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.lo)])
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple
    fixed: dict = field(default_factory=dict)
    out: str | None = None
    fmt: str = "csv"
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    @property
    def n_cells(self) -> int:
        return math.prod(a.count for a in self.axes)


def parallel_map(fn, items, jobs: int = 1) -> list:
    """Ordered map; results never depend on ``jobs``."""
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# -- records ------------------------------------------------------------------

def params_record(params: Params) -> dict:
    return dict(sigma=params.sigma, omega=params.omega, gamma=params.gamma,
                delta=params.delta, epsilon=params.epsilon, p0=params.p0_bit,
                eta_carnot=params.eta_carnot if params.physical else None,
                physical=params.physical)


def point_record(params: Params, tau: float) -> dict:
    obs = cycle.observables(params, tau)
    perf = performance.perf_metrics(obs, params)
    rec = {"params": params_record(params), "observables": obs.as_dict()}
    rec["performance"] = None if perf is None else dict(
        theta_sign=perf.theta_sign, power=perf.power, efficiency=perf.efficiency)
    margins = {"sandwich_lower": obs.sigma_tau - obs.dkl_inst,
               "sandwich_upper": obs.dkl_asymp - obs.sigma_tau}
    if obs.mode is Mode.ERASER:
        lo, hi = performance.efficiency_bounds(obs)
        ratio = (1.0 - perf.efficiency) / perf.efficiency
        lhs, rhs, ok = performance.tradeoff_bound(obs, perf)
        margins.update(efficiency_lower=ratio - lo, efficiency_upper=hi - ratio,
                       tradeoff_lhs=lhs, tradeoff_rhs=rhs, tradeoff_ok=ok)
    rec["margins"] = margins
    return rec


def curve_rows(params: Params, taus) -> list[dict]:
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise ValueError("empty tau grid")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    rows = []
    for obs in cycle.observables_curve(params, taus):
        row = {k: getattr(obs, k) for k in CURVE_COLUMNS[:8]}
        row["mode"] = obs.mode.value
        perf = performance.perf_metrics(obs, params)
        row["power"] = None if perf is None else perf.power
        row["efficiency"] = None if perf is None else perf.efficiency
        if obs.mode is Mode.ERASER:
            lhs, rhs, _ = performance.tradeoff_bound(obs, perf)
        else:
            lhs = rhs = None
        row["tradeoff_lhs"], row["tradeoff_rhs"] = lhs, rhs
        rows.append(row)
    return rows


def _phase_cell(args) -> dict:
    delta, eps, omega, gamma, tau_ref, optimize = args
    params = Params.from_epsilon(eps, omega, gamma=gamma, delta=delta)
    obs = cycle.observables(params, tau_ref)
    row = dict(delta=delta, epsilon=eps, tau_ref=tau_ref, mode=obs.mode.value,
               dQ=obs.dQ, dSB=obs.dSB, peak_exists=None, tau_m=None, p_max=None,
               tau_star=None)
    in_region = abs(eps) > abs(delta) + performance.REGION_TOL
    if optimize and in_region:
        opt = performance.optimal_time(params)
        row["peak_exists"] = opt.peak
        row["p_max"] = opt.p_max
        row["tau_m"] = opt.tau_m if opt.peak else None
    if in_region and delta < 0:
        row["tau_star"] = performance.onset_time(params)
    return row


def phase_axes(n_delta: int, n_eps: int, omega: float):
    """delta over [-1, 1]; epsilon over (0, omega] since sigma >= 0 caps it at omega."""
    deltas = np.linspace(-1.0, 1.0, n_delta)
    eps = omega * np.arange(1, n_eps + 1) / n_eps
    return deltas, eps


def phase_rows(omega: float, n_delta: int, n_eps: int, gamma: float = 1.0,
               tau_ref: float = 100.0, optimize: bool = True, jobs: int = 1,
               budget: int = CELL_BUDGET) -> list[dict]:
    if n_delta * n_eps > budget:
        raise ValueError(f"{n_delta * n_eps} cells exceed the budget of {budget}")
    deltas, eps = phase_axes(n_delta, n_eps, omega)
    cells = [(float(d), float(e), omega, gamma, tau_ref, optimize)
             for e in eps for d in deltas]
    return parallel_map(_phase_cell, cells, jobs)


def pareto_rows(params: Params, taus) -> list[dict]:
    taus = np.asarray(taus, dtype=float)
    opt = performance.optimal_time(params)
    rows = []
    for obs in cycle.observables_curve(params, taus):
        perf = performance.perf_metrics(obs, params)
        if perf is None or perf.theta_sign != -1:
            continue
        rows.append(dict(tau=obs.tau, power=perf.power, efficiency=perf.efficiency,
                         is_max_power=False))
    if opt.peak:
        obs = cycle.observables(params, opt.tau_m)
        perf = performance.perf_metrics(obs, params)
        rows.append(dict(tau=opt.tau_m, power=perf.power, efficiency=perf.efficiency,
                         is_max_power=True))
        rows.sort(key=lambda r: r["tau"])
    return rows


def emp_rows(delta: float, omega: float, eps_grid, gamma: float = 1.0) -> list[dict]:
    pts = performance.emp_curve(delta, omega, eps_grid, gamma=gamma)
    return [{k: getattr(p, k) for k in EMP_COLUMNS} for p in pts]


RELAX_PRESETS = (
    dict(sigma=0.1, omega=0.9, gamma=0.5, p0=0.2),
    dict(sigma=0.2, omega=0.5, gamma=1.0, p0=0.95),
    dict(sigma=0.2, omega=0.5, gamma=2.0, p0=0.5),
)


def relax_rows(param_sets) -> list[dict]:
    rows = []
    for params in param_sets:
        fit = cycle.relaxation_decay(params)
        rows.append(dict(sigma=params.sigma, omega=params.omega, gamma=params.gamma,
                         delta=params.delta, fitted_rate=fit.rate,
                         eigen_index=fit.eigen_index, eigenvalue=fit.eigenvalue,
                         rel_error=fit.rel_error, tau_lo=float(fit.taus[0]),
                         tau_hi=float(fit.taus[-1])))
    return rows


# -- validation -----------------------------------------------------------------

SLACK = 1e-10


def random_draws(count: int, seed: int):
    """Parameter sets over p0 in [0,1], omega in [0.2,0.8], sigma < omega, with
    tau log-uniform on [0.01, 100]."""
    rng = np.random.Generator(np.random.Philox(seed))
    p0 = rng.uniform(0.0, 1.0, count)
    omega = rng.uniform(0.2, 0.8, count)
    sigma = rng.uniform(0.0, 1.0, count) * omega
    tau = 10.0 ** rng.uniform(-2.0, 2.0, count)
    for i in range(count):
        yield Params.resolve(sigma=sigma[i], omega=omega[i], gamma=1.0, p0=p0[i]), tau[i]


def check_point(params: Params, tau: float) -> dict:
    """Raw margins of every inequality at one point.

    A check fails when its margin drops below ``-SLACK``; sign agreement is
    reported as +1 / -1.
    """
    obs = cycle.observables(params, tau)
    eps, delta = params.epsilon, params.delta
    m = {
        "sandwich_lower": obs.sigma_tau - obs.dkl_inst,
        "sandwich_upper": obs.dkl_asymp - obs.sigma_tau,
        "theta_range": min(obs.theta, 1.0 - obs.theta),
    }
    gap = delta - eps
    expect = 0 if abs(gap) < 1e-12 else int(np.sign(gap))
    got = 0 if abs(obs.dQ) <= cycle.MODE_TOL else int(np.sign(obs.dQ))
    m["heat_sign"] = 1.0 if expect == got or expect == 0 else -1.0
    perf = performance.perf_metrics(obs, params)
    if perf is not None:
        m["efficiency_range"] = min(perf.efficiency, 1.0 - perf.efficiency)
    if obs.mode is Mode.ERASER and abs(obs.dSB) > 1e-13:
        lhs, rhs, _ = performance.tradeoff_bound(obs, perf)
        # efficiency bounds compared after multiplying through by |dSB|
        ratio_abs = abs(obs.dSB) * (1.0 - perf.efficiency) / perf.efficiency
        m["efficiency_lower"] = ratio_abs - obs.dkl_inst
        m["efficiency_upper"] = obs.dkl_asymp - ratio_abs
        m["tradeoff"] = rhs - lhs
    return m


def peak_audit(omega: float = 0.5, n: int = 50, gamma: float = 1.0) -> dict:
    """Peak criterion against grid search over an n x n eraser-region grid."""
    eps_axis = np.linspace(0.01, omega - 0.01, n)
    frac_axis = np.linspace(-0.98, 0.98, n)
    rows, mismatches = [], []
    literal_disagree = 0
    for e in eps_axis:
        for f in frac_axis:
            params = Params.from_epsilon(float(e), omega, gamma=gamma, delta=float(e * f))
            crit = performance.peak_criterion(params)
            brute, tau_best = performance.brute_force_peak(params)
            row = dict(epsilon=float(e), delta=float(e * f), criterion=crit.peak,
                       literal=crit.literal, brute_force=brute, tau_best=tau_best)
            rows.append(row)
            if crit.peak != brute:
                mismatches.append(row)
            if crit.literal is not None and crit.literal != brute:
                literal_disagree += 1
    return dict(omega=omega, cells=len(rows), mismatches=mismatches,
                mismatch_fraction=len(mismatches) / len(rows),
                literal_formula_disagreements=literal_disagree)


def validate_report(count: int, seed: int, audit_n: int = 20) -> dict:
    counts: dict[str, list[int]] = {}
    worst: dict[str, float] = {}
    for params, tau in random_draws(count, seed):
        for name, margin in check_point(params, tau).items():
            c = counts.setdefault(name, [0, 0])
            c[0 if margin >= -SLACK else 1] += 1
            worst[name] = min(worst.get(name, math.inf), margin)
    report = {
        "count": count, "seed": seed,
        "checks": {k: {"pass": v[0], "fail": v[1], "worst_margin": worst[k]}
                   for k, v in sorted(counts.items())},
    }
    report["violations"] = sum(v[1] for v in counts.values())
    if audit_n > 0 and count > 0:
        report["peak_audit"] = peak_audit(n=audit_n)
    return report


# -- serialization ------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else format(float(value), ".17g")
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def render(rows, columns, fmt: str) -> str:
    if fmt == "json":
        if isinstance(rows, dict):
            payload = _jsonable(rows)
        else:
            payload = [_jsonable({c: r.get(c) for c in columns}) for r in rows]
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def manifest_path(path: str) -> str:
    return path + ".manifest.json"


def write_output(path: str, text: str, command: str, parameters: dict) -> str:
    """Write ``text`` and its sibling manifest; returns the manifest path."""
    _atomic_write(path, text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    manifest = {
        "tool": "demontape",
        "version": __version__,
        "command": command,
        "parameters": _jsonable(parameters),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": {os.path.basename(path): {"sha256": digest}},
    }
    mpath = manifest_path(path)
    _atomic_write(mpath, json.dumps(manifest, indent=2) + "\n")
    return mpath


def verify_manifest(path: str) -> bool:
    with open(manifest_path(path)) as fh:
        manifest = json.load(fh)
    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return manifest["outputs"][os.path.basename(path)]["sha256"] == digest


PLOT_TEMPLATE = '''"""Plot {command} output produced by demontape."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {path!r}
with open(path) as fh:
    rows = [r for r in csv.DictReader(fh)]
x = [float(r[{x!r}]) for r in rows if r[{y!r}]]
y = [float(r[{y!r}]) for r in rows if r[{y!r}]]
plt.plot(x, y, {style!r})
plt.xlabel({x!r})
plt.ylabel({y!r})
{extra}plt.savefig(path + ".png", dpi=150)
'''

PLOT_AXES = {
    "curve": ("tau", "sigma_tau", "-", "plt.xscale('log')\n"),
    "pareto": ("efficiency", "power", "-", ""),
    "emp": ("eta_C", "eta_MP", "o-", ""),
    "relax": ("eigenvalue", "fitted_rate", "s", ""),
    "phase": ("delta", "epsilon", ".", ""),
}


def plot_script(command: str, path: str) -> str | None:
    if command not in PLOT_AXES:
        return None
    x, y, style, extra = PLOT_AXES[command]
    return PLOT_TEMPLATE.format(command=command, path=path, x=x, y=y, style=style,
                                extra=extra)
