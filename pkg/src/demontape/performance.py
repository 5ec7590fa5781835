"""Power, efficiency and finite-time optimisation of the eraser."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import cycle
from .cycle import Dynamics, Mode, Observables
from .params import Params

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TAU_FLOOR = 1e-4
TAU_CAP = 1e4
# |epsilon| must beat |delta| by this much; the onset time diverges at equality
REGION_TOL = 1e-9


class RegionError(ValueError):
    """Parameters outside the region where an operation is defined."""


class FitError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class PerfMetrics:
    """Mode-resolved power and efficiency.

    For the eraser (``theta_sign = -1``) power is the bit-entropy reduction
    rate in nats per unit time; for the refrigerator (``+1``) it is the heat
    drawn from the cold bath per unit time.
    """

    theta_sign: int
    power: float
    efficiency: float


def perf_metrics(obs: Observables, params: Params) -> PerfMetrics | None:
    """Metrics for a functional mode, or None when the machine only dissipates."""
    if obs.mode is Mode.ERASER:
        return PerfMetrics(-1, -obs.dSB / obs.tau, obs.dSB / (params.beta_delta * obs.dQ))
    if obs.mode is Mode.REFRIGERATOR:
        return PerfMetrics(1, obs.dQ / obs.tau, params.beta_delta * obs.dQ / obs.dSB)
    return None


def efficiency_bounds(obs: Observables) -> tuple[float, float]:
    """Bounds on ``(1 - eta_E) / eta_E`` from the two KL divergences."""
    if obs.mode is not Mode.ERASER:
        raise RegionError(f"efficiency bounds need eraser mode, got {obs.mode}")
    if abs(obs.dSB) <= 1e-13:
        raise RegionError("bit entropy change vanishes; bounds undefined")
    return obs.dkl_inst / abs(obs.dSB), obs.dkl_asymp / abs(obs.dSB)


def tradeoff_bound(obs: Observables, perf: PerfMetrics) -> tuple[float, float, bool]:
    if obs.mode is not Mode.ERASER or perf is None or perf.theta_sign != -1:
        raise RegionError("trade-off bound applies to the eraser only")
    lhs = perf.power * (1.0 - perf.efficiency) / perf.efficiency
    rhs = obs.dkl_asymp / obs.tau
    return lhs, rhs, bool(lhs <= rhs + 1e-12)


# -- short-time expansion ----------------------------------------------------

@dataclass(frozen=True)
class SeriesCoeffs:
    kappa: float
    c2: float
    kappa_rel_err: float
    c2_rel_err: float


def _fit_theta(params: Params, dyn: Dynamics, t_max: float):
    t = np.geomspace(t_max * 1e-2, t_max, 48)
    theta = cycle.relaxation_degree(params, t, dyn=dyn)
    coef = np.polynomial.polynomial.polyfit(t, theta, [1, 2, 3])
    resid = theta - np.polynomial.polynomial.polyval(t, coef)
    return coef[1], coef[2], float(np.max(np.abs(resid)))


def theta_series(params: Params, rel_tol: float = 1e-4) -> SeriesCoeffs:
    """First two Taylor coefficients of the relaxation degree at tau = 0.

    Cubic least-squares fits on ``[1e-4, 1e-2]`` and on the half-width window,
    combined by one Richardson step (the leading fit error in c2 is O(h^2)).
    """
    if not params.physical:
        raise RegionError("series coefficients need sigma < omega")
    dyn = Dynamics(params)
    k1, c1, r1 = _fit_theta(params, dyn, 1e-2)
    k2, c2, r2 = _fit_theta(params, dyn, 5e-3)
    kappa = (8.0 * k2 - k1) / 7.0
    c2x = (4.0 * c2 - c1) / 3.0
    k_err = abs(k2 - k1) / 7.0 / abs(kappa)
    c_err = abs(c2 - c1) / 3.0 / max(abs(c2x), 1e-300)
    diag = dict(kappa=kappa, c2=c2x, kappa_rel_err=k_err, c2_rel_err=c_err,
                residuals=(r1, r2))
    if max(r1, r2) > 1e-9 or k_err > rel_tol or c_err > rel_tol:
        raise FitError("short-time fit of the relaxation degree is not converged", diag)
    return SeriesCoeffs(kappa, c2x, k_err, c_err)


# -- eraser power -------------------------------------------------------------

def eraser_power(params: Params, taus, dyn: Dynamics | None = None) -> np.ndarray:
    """Erasure power over ``taus``; NaN where the machine is not an eraser."""
    c = cycle.curve_arrays(params, taus, dyn=dyn)
    power = -c["dSB"] / c["tau"]
    eraser = (c["dQ"] < -cycle.MODE_TOL) & (c["dSB"] < -cycle.MODE_TOL)
    return np.where(eraser, power, np.nan)


def _power_and_slope(params: Params, tau: float, dyn: Dynamics):
    dprime, ddp = cycle.outgoing_bias_rate(params, [tau], dyn=dyn)
    dprime, ddp = float(dprime[0]), float(ddp[0])
    dSB = float(cycle.bit_entropy_change(params.delta, dprime - params.delta))
    d_dSB = -math.atanh(dprime) * ddp
    return -dSB / tau, -(tau * d_dSB - dSB) / tau ** 2


def _in_eraser_region(params: Params) -> bool:
    return abs(params.epsilon) > abs(params.delta) + REGION_TOL


def _require_eraser_region(params: Params, what: str):
    if not _in_eraser_region(params):
        raise RegionError(f"{what} is defined only for |epsilon| > |delta|")


def peak_threshold(params: Params) -> float:
    """Right-hand side of the small-time peak criterion (singular at delta = 0)."""
    eps, d = params.epsilon, params.delta
    return -(eps - d) / (2.0 * (1.0 - d * d) * math.atanh(d))


@dataclass(frozen=True)
class PeakCriterion:
    peak: bool
    ratio: float
    threshold: float
    literal: bool | None
    reason: str

    def __bool__(self):
        return self.peak


def peak_criterion(params: Params, series: SeriesCoeffs | None = None) -> PeakCriterion:
    """Whether erasure power has an interior maximum in tau.

    For ``delta > 0`` this is the sign of the first-order coefficient of the
    short-time power expansion, ``c2 / kappa**2 > threshold``.  For
    ``delta = 0`` power starts from zero, and for ``delta < 0`` erasure only
    begins at the onset time where power is again zero, so a peak always
    exists.  The literal comparison is kept in ``literal`` for audits.
    """
    _require_eraser_region(params, "peak criterion")
    d = params.delta
    if d == 0.0:
        return PeakCriterion(True, math.nan, math.nan, None, "zero power at tau -> 0")
    series = series or theta_series(params)
    ratio = series.c2 / series.kappa ** 2
    thr = peak_threshold(params)
    literal = bool(ratio > thr)
    if d < 0.0:
        return PeakCriterion(True, ratio, thr, literal, "zero power at onset time")
    return PeakCriterion(literal, ratio, thr, literal, "short-time slope")


def short_time_power(params: Params, series: SeriesCoeffs | None = None) -> float:
    """Limit of erasure power as tau -> 0 (meaningful for delta >= 0)."""
    series = series or theta_series(params)
    return abs(series.kappa * (params.delta - params.epsilon) * math.atanh(params.delta))


def onset_time(params: Params, xtol: float = 1e-12) -> float:
    """Interaction time after which an adversely biased tape starts being erased."""
    d, eps = params.delta, params.epsilon
    if not (d < 0.0 and eps > abs(d) + REGION_TOL):
        raise RegionError("onset time needs delta < 0 and epsilon > |delta|")
    dyn = Dynamics(params)

    def gap(t):
        return float(cycle.outgoing_bias(params, [t], dyn=dyn)[0]) + d

    lo, hi = 1e-9, 1e-3
    while gap(hi) <= 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise RegionError("outgoing bias never reaches -delta")
    tau = optimize.bisect(gap, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                          maxiter=500)
    if abs(gap(tau)) > 1e-8:
        raise RuntimeError(f"onset bisection residual {gap(tau):.3e}")
    return tau


def onset_target(params: Params) -> float:
    d, eps = params.delta, params.epsilon
    return 2.0 * d / (d - eps)


def golden_section_max(f, a: float, b: float, c: float, rtol: float = 1e-8,
                       maxiter: int = 500) -> float:
    """Maximise ``f`` on a bracket ``a < b < c`` with ``f(b) >= f(a), f(c)``."""
    fb = f(b)
    for _ in range(maxiter):
        if c - a <= rtol * abs(b):
            return b
        if c - b > b - a:
            x = b + (1.0 - GOLDEN) * (c - b)
            fx = f(x)
            if fx > fb:
                a, b, fb = b, x, fx
            else:
                c = x
        else:
            x = b - (1.0 - GOLDEN) * (b - a)
            fx = f(x)
            if fx > fb:
                c, b, fb = b, x, fx
            else:
                a = x
    return b


@dataclass(frozen=True)
class OptimalTime:
    tau_m: float
    p_max: float
    peak: bool
    stationarity: float
    residual_atanh_dprime: float = math.nan
    residual_atanh_shift: float = math.nan
    extra: dict = field(default_factory=dict, compare=False)


def _stationarity_residuals(params: Params, tau: float, dyn: Dynamics):
    """Residuals of tau (d - e) dTheta/dtau atanh(x) = dS_B for x = d' and x = d - d'."""
    d, eps = params.delta, params.epsilon
    dprime, ddp = cycle.outgoing_bias_rate(params, [tau], dyn=dyn)
    dprime, ddp = float(dprime[0]), float(ddp[0])
    dtheta = -ddp / (d - eps)
    dSB = float(cycle.bit_entropy_change(d, dprime - d))
    lhs = tau * (d - eps) * dtheta
    return lhs * math.atanh(dprime) - dSB, lhs * math.atanh(d - dprime) - dSB


def optimal_time(params: Params) -> OptimalTime:
    """Interaction time maximising the erasure power.

    Without an interior peak the supremum sits at tau -> 0 and ``tau_m = 0``
    with the limiting power is returned.
    """
    _require_eraser_region(params, "optimal time")
    crit = peak_criterion(params)
    dyn = Dynamics(params)
    if not crit.peak:
        return OptimalTime(0.0, short_time_power(params), False, 0.0)

    def power(t):
        # outside eraser mode there is no erasure power
        val = float(eraser_power(params, [t], dyn=dyn)[0])
        return 0.0 if math.isnan(val) else val

    lo = onset_time(params) if params.delta < 0 else TAU_FLOOR
    ts, ps = [lo], [power(lo)]
    drops = 0
    while drops < 2:
        t = ts[-1] * 2.0
        if t > TAU_CAP:
            raise RuntimeError("no bracket for the power maximum below the tau cap")
        ps.append(power(t))
        ts.append(t)
        drops = drops + 1 if ps[-1] < ps[-2] else 0
    i = int(np.argmax(ps))
    if i == 0:
        raise RuntimeError("criterion predicts a power peak but power only decays")
    a, b, c = ts[i - 1], ts[i], ts[i + 1]
    # golden section on the bracket, then polish on the exact slope
    tau_m = golden_section_max(power, a, b, c)
    slope = lambda t: _power_and_slope(params, t, dyn)[1]
    lo_t, hi_t = tau_m * (1 - 1e-3), tau_m * (1 + 1e-3)
    if slope(lo_t) > 0 > slope(hi_t):
        tau_m = optimize.brentq(slope, lo_t, hi_t, xtol=1e-14, rtol=1e-13)
    p_max = power(tau_m)
    h = 1e-4 * tau_m
    deriv = (power(tau_m + h) - power(tau_m - h)) / (2 * h)
    if abs(deriv) >= 1e-6 * p_max / tau_m:
        raise RuntimeError(f"power is not stationary at tau_m={tau_m}: {deriv:.3e}")
    r1, r2 = _stationarity_residuals(params, tau_m, dyn)
    return OptimalTime(tau_m, p_max, True, deriv, r1, r2)


@dataclass(frozen=True)
class EmpPoint:
    epsilon: float
    eta_C: float
    eta_MP: float
    tau_m: float
    peak_exists: bool
    p_max: float
    eta_lower: float
    eta_upper: float


def efficiency_at(params: Params, tau: float) -> float:
    obs = cycle.observables(params, tau)
    perf = perf_metrics(obs, params)
    if perf is None or perf.theta_sign != -1:
        raise RegionError(f"not an eraser at tau={tau}")
    return perf.efficiency


def emp_point(params: Params) -> EmpPoint:
    opt = optimal_time(params)
    eps, d = params.epsilon, params.delta
    if opt.peak:
        obs = cycle.observables(params, opt.tau_m)
        eta = perf_metrics(obs, params).efficiency
        lower, upper = efficiency_bounds(obs)
        eta_lo, eta_hi = 1.0 / (1.0 + upper), 1.0 / (1.0 + lower)
    else:
        # tau -> 0 limits: dS_B / (beta_delta dQ) -> atanh(delta) / atanh(eps)
        eta = math.atanh(d) / math.atanh(eps)
        eta_lo, eta_hi = 0.0, 1.0
    return EmpPoint(eps, params.eta_carnot, eta, opt.tau_m, opt.peak, opt.p_max,
                    eta_lo, eta_hi)


def emp_curve(delta: float, omega: float, epsilon_grid, gamma: float = 1.0) -> list[EmpPoint]:
    """Efficiency at maximum power along a sweep of the thermal bias."""
    grid = [float(e) for e in np.atleast_1d(epsilon_grid)
            if abs(e) > abs(delta) + REGION_TOL and 0.0 < e <= omega]
    if not grid:
        raise RegionError("no epsilon in the grid lies in the eraser region")
    return [emp_point(Params.from_epsilon(e, omega, gamma=gamma, delta=delta))
            for e in sorted(grid)]


def eta_carnot_min(delta: float, omega: float) -> float:
    return math.atanh(abs(delta)) / math.atanh(omega)


# -- audit --------------------------------------------------------------------

def brute_force_peak(params: Params, taus=None, rel_margin: float = 1e-9):
    """Grid search for an interior maximum of the erasure power.

    A peak is reported when the best grid value lies strictly inside the
    eraser window and beats the power at the start of that window.
    """
    taus = np.geomspace(1e-5, 1e3, 3000) if taus is None else np.asarray(taus)
    power = eraser_power(params, taus)
    ok = np.nonzero(~np.isnan(power))[0]
    if ok.size == 0:
        return False, math.nan
    i = ok[np.nanargmax(power[ok])]
    peak = ok[0] < i < taus.size - 1 and power[i] > power[ok[0]] * (1 + rel_margin)
    return bool(peak), float(taus[i])
