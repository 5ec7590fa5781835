"""Periodic steady state of the demon/tape interaction and its observables."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, rel_entr, xlogy

from . import markov
from .params import Params

MODE_TOL = 1e-12
# below this |delta - epsilon| the relaxation degree is taken as a limit
THETA_LIMIT_GAP = 1e-10


class Mode(str, enum.Enum):
    ERASER = "Eraser"
    REFRIGERATOR = "Refrigerator"
    DISSIPATIVE = "Dissipative"
    NEUTRAL = "Neutral"

    def __str__(self):
        return self.value


class ModelViolation(RuntimeError):
    """The per-interval demon map failed to contract."""


def bit_dist(bias) -> np.ndarray:
    bias = np.asarray(bias, dtype=float)
    return np.stack([0.5 * (1.0 + bias), 0.5 * (1.0 - bias)], axis=-1)


def bit_entropy(bias):
    """Shannon entropy (nats) of a bit with bias ``p0 - p1``."""
    return entr(bit_dist(bias)).sum(axis=-1)


def bit_kl(bias_p, bias_q):
    """KL divergence D(p || q) between two bits given by their biases."""
    return rel_entr(bit_dist(bias_p), bit_dist(bias_q)).sum(axis=-1)


def bit_entropy_change(bias, shift):
    """S(bias + shift) - S(bias), accurate for small shifts."""
    bias = np.asarray(bias, dtype=float)
    shift = np.asarray(shift, dtype=float)

    def grow(a, h):
        # (a + h) ln(a + h) - a ln a
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(a > 0, a, 1.0)
            val = xlogy(h, a + h) + a * np.log1p(h / safe)
        return np.where(a > 0, val, xlogy(h, h))

    return -0.5 * (grow(1.0 + bias, shift) + grow(1.0 - bias, -shift))


class Dynamics:
    """Spectral propagator of one parameter set, vectorised over durations."""

    def __init__(self, params: Params):
        self.params = params
        self.R = markov.build_rate_matrix(params)
        S, root, _ = markov._symmetrizer(self.R)
        self.spectral = root.max() / root.min() <= markov.COND_LIMIT
        if self.spectral:
            self.lam, V = np.linalg.eigh(S)
            self.M = root[:, None] * V
            self.Minv = V.T / root[None, :]

    def increment(self, v: np.ndarray, taus: np.ndarray, derivative: bool = False):
        """Rows ``(exp(R t) - I) v`` for every ``t`` (and ``R exp(R t) v``).

        The increment is formed with ``expm1`` so it keeps full relative
        precision at short times.
        """
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        if self.spectral:
            c = self.Minv @ v
            lt = np.outer(taus, self.lam)
            out = (np.expm1(lt) * c) @ self.M.T
            if derivative:
                return out, (np.exp(lt) * c * self.lam) @ self.M.T
            return out
        E = [markov.expm_dense(self.R, t) for t in taus]
        out = np.array([e @ v - v for e in E])
        if derivative:
            return out, np.array([self.R @ (e @ v) for e in E])
        return out


def _cycle(params: Params, taus, derivative: bool = False, dyn: Dynamics | None = None):
    """Affine demon map, fixed point and bias shift over ``taus``.

    With ``m`` the demon's P(u) at the start of an interval, the map is
    ``m -> A m + B``.  Both ``1 - A`` and ``B`` are read off increments
    because the start vectors have demon marginals exactly 1 and 0.
    """
    dyn = dyn or Dynamics(params)
    p0 = params.p0_bit
    v_d = markov.joint_product(0.0, p0)
    v_diff = markov.joint_product(1.0, p0) - v_d
    up = np.array([1.0, 0.0, 1.0, 0.0])
    sign = np.array([1.0, 1.0, -1.0, -1.0])
    if derivative:
        Id, dEd = dyn.increment(v_d, taus, derivative=True)
        Idiff, dEdiff = dyn.increment(v_diff, taus, derivative=True)
    else:
        Id = dyn.increment(v_d, taus)
        Idiff = dyn.increment(v_diff, taus)
    B = Id @ up
    one_minus_A = -(Idiff @ up)
    if np.any(one_minus_A <= 0.0):
        raise ModelViolation(f"demon map does not contract (1-A={one_minus_A.min()!r})")
    d_star = B / one_minus_A
    incr = Id + d_star[:, None] * Idiff
    P_end = v_d + d_star[:, None] * v_diff + incr
    out = dict(A=1.0 - one_minus_A, B=B, d_star=d_star, P_end=P_end, shift=incr @ sign)
    if derivative:
        dA, dB = dEdiff @ up, dEd @ up
        dd = (dB * one_minus_A + B * dA) / one_minus_A ** 2
        dP = dEd + d_star[:, None] * dEdiff + dd[:, None] * (v_diff + Idiff)
        out["dP_end"] = dP
        out["dshift"] = dP @ sign
    return out


def _positive_tau(tau) -> float:
    tau = float(tau)
    if not tau > 0 or not math.isfinite(tau):
        raise ValueError(f"tau must be positive and finite, got {tau}")
    return tau


def demon_update_map(params: Params, tau: float) -> tuple[float, float]:
    """Gain and offset of the affine map d -> A d + B on the demon's P(u)."""
    tau = _positive_tau(tau)
    c = _cycle(params, [tau])
    return float(c["A"][0]), float(c["B"][0])


@dataclass(frozen=True)
class CycleState:
    d_star: float
    P_start: np.ndarray
    P_end: np.ndarray
    bit_out: np.ndarray
    tau: float


def periodic_steady_state(params: Params, tau: float) -> CycleState:
    tau = _positive_tau(tau)
    c = _cycle(params, [tau])
    d_star = float(c["d_star"][0])
    P_end = markov.clean_distribution(c["P_end"][0])
    return CycleState(
        d_star=d_star,
        P_start=markov.joint_product(d_star, params.p0_bit),
        P_end=P_end,
        bit_out=markov.bit_marginal(P_end),
        tau=tau,
    )


def bias_shift(params: Params, taus, dyn: Dynamics | None = None) -> np.ndarray:
    """delta' - delta over ``taus``."""
    return _cycle(params, taus, dyn=dyn)["shift"]


def outgoing_bias(params: Params, taus, dyn: Dynamics | None = None) -> np.ndarray:
    return params.delta + bias_shift(params, taus, dyn=dyn)


def outgoing_bias_rate(params: Params, taus, dyn: Dynamics | None = None):
    """Outgoing bias and its exact derivative with respect to tau."""
    c = _cycle(params, taus, derivative=True, dyn=dyn)
    return params.delta + c["shift"], c["dshift"]


def relaxation_degree(params: Params, taus, dyn: Dynamics | None = None) -> np.ndarray:
    """Fraction of the way the outgoing bias has moved from delta toward epsilon.

    At ``delta == epsilon`` the ratio is 0/0 and is replaced by its two-sided
    limit in delta (central differences, one Richardson step).
    """
    eps, delta = params.epsilon, params.delta
    if abs(delta - eps) >= THETA_LIMIT_GAP:
        return -bias_shift(params, taus, dyn=dyn) / (delta - eps)

    def sym(h):
        vals = []
        for sign in (1.0, -1.0):
            d = min(max(eps + sign * h, -1.0), 1.0)
            vals.append(-bias_shift(params.replace(delta=d), taus) / (d - eps))
        return 0.5 * (vals[0] + vals[1])

    h = 1e-4
    return (4.0 * sym(h / 2) - sym(h)) / 3.0


@dataclass(frozen=True)
class Observables:
    """Per-interval thermodynamics at one interaction time.

    Heat ``dQ`` is taken from the cold bath in units of the demon gap;
    entropies are in nats.
    """

    tau: float
    delta: float
    epsilon: float
    delta_prime: float
    theta: float
    dQ: float
    dSB: float
    sigma_tau: float
    dkl_inst: float
    dkl_asymp: float
    mode: Mode

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["mode"] = self.mode.value
        return d


def classify_mode(obs) -> Mode:
    dQ, dSB = obs.dQ, obs.dSB
    if abs(dQ) <= MODE_TOL:
        return Mode.NEUTRAL
    if dQ > MODE_TOL and dSB > MODE_TOL:
        return Mode.REFRIGERATOR
    if dQ < -MODE_TOL and dSB < -MODE_TOL:
        return Mode.ERASER
    return Mode.DISSIPATIVE


def _classify(dQ: float, dSB: float) -> Mode:
    return classify_mode(_Flux(dQ, dSB))


@dataclass(frozen=True)
class _Flux:
    dQ: float
    dSB: float


def entropy_production(delta: float, delta_prime, epsilon: float):
    """Total entropy production from the in/out biases and the thermal bias."""
    dQ = 0.5 * (delta - np.asarray(delta_prime))
    return -2.0 * math.atanh(epsilon) * dQ + (bit_entropy(delta_prime) - bit_entropy(delta))


def _check_taus(taus) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size and not np.all((taus > 0) & np.isfinite(taus)):
        raise ValueError("every tau must be positive and finite")
    return taus


def curve_arrays(params: Params, taus, dyn: Dynamics | None = None) -> dict:
    """Column arrays of every observable over ``taus`` (modes excluded)."""
    taus = _check_taus(taus)
    dyn = dyn or Dynamics(params)
    delta, eps = params.delta, params.epsilon
    shift = bias_shift(params, taus, dyn=dyn)
    dprime = delta + shift
    if abs(delta - eps) >= THETA_LIMIT_GAP:
        theta = -shift / (delta - eps)
    else:
        theta = relaxation_degree(params, taus, dyn=dyn)
    dQ = -0.5 * shift
    dSB = bit_entropy_change(delta, shift)
    return dict(
        tau=taus, delta_prime=dprime, theta=theta, dQ=dQ, dSB=dSB,
        sigma_tau=-2.0 * math.atanh(eps) * dQ + dSB,
        dkl_inst=bit_kl(delta, dprime),
        dkl_asymp=np.full(taus.shape, float(bit_kl(delta, eps))),
    )


def observables_curve(params: Params, taus) -> list[Observables]:
    """Observables for each duration in ``taus`` (all must be positive)."""
    taus = _check_taus(taus)
    if taus.size == 0:
        return []
    c = curve_arrays(params, taus)
    delta, eps = params.delta, params.epsilon
    return [
        Observables(
            tau=float(c["tau"][i]), delta=delta, epsilon=eps,
            delta_prime=float(c["delta_prime"][i]), theta=float(c["theta"][i]),
            dQ=float(c["dQ"][i]), dSB=float(c["dSB"][i]),
            sigma_tau=float(c["sigma_tau"][i]), dkl_inst=float(c["dkl_inst"][i]),
            dkl_asymp=float(c["dkl_asymp"][i]),
            mode=_classify(float(c["dQ"][i]), float(c["dSB"][i])),
        )
        for i in range(taus.size)
    ]


def modes(dQ, dSB) -> list[Mode]:
    return [_classify(float(q), float(s)) for q, s in zip(np.atleast_1d(dQ), np.atleast_1d(dSB))]


def observables(params: Params, tau: float) -> Observables:
    return observables_curve(params, [_positive_tau(tau)])[0]


def dissipation_deficit(params: Params, taus, dyn: Dynamics | None = None) -> np.ndarray:
    """Sigma_inf - Sigma_tau, evaluated as D(p_tau || p_inf) to avoid cancellation."""
    dprime = outgoing_bias(params, taus, dyn=dyn)
    return bit_kl(dprime, params.epsilon)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    eigen_index: int
    eigenvalue: float
    rel_error: float
    slope: float
    taus: np.ndarray
    deficit: np.ndarray


class DecayFitError(ValueError):
    pass


def default_decay_grid(params: Params, n: int = 40) -> np.ndarray:
    """Window where the deficit has left the fast transients but sits above roundoff."""
    lam = markov.eigen_spectrum(markov.build_rate_matrix(params)).values
    slow = -lam[1]
    dyn = Dynamics(params)
    probe = np.linspace(0.0, 60.0 / slow, 2401)[1:]
    deficit = dissipation_deficit(params, probe, dyn=dyn)
    ok = np.nonzero(deficit > 1e-11)[0]
    if ok.size == 0:
        raise DecayFitError("deficit is below the numerical floor everywhere")
    t_end = probe[ok[-1]]
    return np.linspace(0.5 * t_end, t_end, n)


def relaxation_decay(params: Params, tau_grid=None) -> DecayFit:
    """Fit ln(Sigma_inf - Sigma_tau) against tau; match slope/2 to an eigenvalue."""
    taus = default_decay_grid(params) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if taus.size < 3:
        raise DecayFitError("need at least three durations to fit")
    taus = np.sort(taus)
    deficit = dissipation_deficit(params, taus)
    if np.any(deficit <= 1e-13):
        raise DecayFitError("deficit falls below the 1e-13 floor on the grid")
    if np.any(np.diff(deficit) >= 0):
        raise DecayFitError("deficit is not monotone on the grid; refusing to fit")
    slope = np.polyfit(taus, np.log(deficit), 1)[0]
    rate = 0.5 * slope
    lam = markov.eigen_spectrum(markov.build_rate_matrix(params)).values
    nonzero = np.arange(1, 4)
    idx = int(nonzero[np.argmin(np.abs(lam[nonzero] - rate))])
    return DecayFit(rate=float(rate), eigen_index=idx, eigenvalue=float(lam[idx]),
                    rel_error=float(abs(rate - lam[idx]) / abs(lam[idx])),
                    slope=float(slope), taus=taus, deficit=deficit)
