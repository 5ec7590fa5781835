"""Kinetic Monte Carlo of the demon reading a tape, one bit at a time.

Used as an independent check of the analytic periodic steady state.  Random
numbers come from per-block Philox streams spawned from one seed, so a run is
reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from . import cycle
from .params import Params

BLOCK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    params: Params
    tau: float
    n_bits: int
    seed: int = 0
    burn_in: int = 1000

    def __post_init__(self):
        if not isinstance(self.params, Params):
            raise TypeError("params must be a Params instance")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not 0 <= self.burn_in < self.n_bits:
            raise ValueError("need n_bits > burn_in >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class McResult:
    n_used: int
    p0_out: float
    p1_out: float
    p_out_se: float
    dQ: float
    dQ_se: float
    d_up: float
    d_up_se: float

    @property
    def delta_prime(self) -> float:
        return self.p0_out - self.p1_out

    @property
    def delta_prime_se(self) -> float:
        return 2.0 * self.p_out_se

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta_prime"] = self.delta_prime
        d["delta_prime_se"] = self.delta_prime_se
        return d


def _jump_table(params: Params):
    """Exit targets and rates per joint state (0u, 0d, 1u, 1d); -1 pads."""
    g, s, w = params.gamma, params.sigma, params.omega
    targets = np.array([[1, -1], [0, 2], [3, 1], [2, -1]], dtype=np.int64)
    rates = np.array([[g * (1 + s), 0.0],
                      [g * (1 - s), 1 - w],
                      [g * (1 + s), 1 + w],
                      [g * (1 - s), 0.0]])
    return targets, rates


@numba.njit(cache=True)
def _run_block(start, stop, demon_d, p1, tau, targets, rates, bit_u, jump_u, pos,
               bits_out, flips, demon_start):
    """Advance intervals ``start..stop``; stops early when ``jump_u`` runs dry.

    Returns ``(next_interval, demon_d, pos)``.  An interval interrupted by the
    buffer is redone from its start, so results do not depend on buffer sizes.
    """
    n_u = jump_u.shape[0]
    i = start
    while i < stop:
        bit = 1 if bit_u[i - start] < p1 else 0
        state = 2 * bit + demon_d
        p = pos
        t = 0.0
        net = 0
        dry = False
        while True:
            if p + 2 > n_u:
                dry = True
                break
            total = rates[state, 0] + rates[state, 1]
            t += -math.log1p(-jump_u[p]) / total
            if t >= tau:
                p += 1
                break
            k = 0
            if rates[state, 1] > 0.0 and jump_u[p + 1] * total >= rates[state, 0]:
                k = 1
            p += 2
            new = targets[state, k]
            if state == 1 and new == 2:
                net += 1
            elif state == 2 and new == 1:
                net -= 1
            state = new
        if dry:
            return i, demon_d, pos
        demon_start[i] = demon_d
        bits_out[i] = state // 2
        flips[i] = net
        demon_d = state % 2
        pos = p
        i += 1
    return i, demon_d, pos


def _trajectory(cfg: McConfig):
    params = cfg.params
    targets, rates = _jump_table(params)
    n = cfg.n_bits
    bits_out = np.zeros(n, dtype=np.int8)
    flips = np.zeros(n, dtype=np.int8)
    demon_start = np.zeros(n, dtype=np.int8)
    p1 = 1.0 - params.p0_bit
    per_interval = 2 * (int(math.ceil(rates.sum(axis=1).max() * cfg.tau)) + 2)
    demon_d = 0
    for b, start in enumerate(range(0, n, BLOCK)):
        stop = min(start + BLOCK, n)
        gen = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(cfg.seed, spawn_key=(b,))))
        bit_u = gen.random(stop - start)
        jump_u = gen.random(per_interval * (stop - start))
        pos, i = 0, start
        while i < stop:
            i, demon_d, pos = _run_block(i, stop, demon_d, p1, cfg.tau, targets, rates,
                                         bit_u, jump_u, pos, bits_out, flips, demon_start)
            if i < stop:
                jump_u = np.concatenate([jump_u[pos:], gen.random(per_interval * 1024)])
                pos = 0
    return bits_out, flips, demon_start


def _mean_se(x: np.ndarray, n_batches: int = 100) -> tuple[float, float]:
    """Mean and batch-means standard error (serial correlation via the demon)."""
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    if x.size >= 10 * n_batches:
        usable = x[: x.size - x.size % n_batches]
        batch = usable.reshape(n_batches, -1).mean(axis=1)
        se = float(batch.std(ddof=1) / math.sqrt(n_batches))
    elif x.size > 1:
        se = float(x.std(ddof=1) / math.sqrt(x.size))
    else:
        se = math.nan
    return mean, se


def simulate_tape(cfg: McConfig) -> McResult:
    bits_out, flips, demon_start = _trajectory(cfg)
    keep = slice(cfg.burn_in, None)
    p1, p_se = _mean_se(bits_out[keep])
    dq, dq_se = _mean_se(flips[keep])
    d_down, d_se = _mean_se(demon_start[keep])
    return McResult(n_used=cfg.n_bits - cfg.burn_in, p0_out=1.0 - p1, p1_out=p1,
                    p_out_se=p_se, dQ=dq, dQ_se=dq_se, d_up=1.0 - d_down, d_up_se=d_se)


def compare_with_analytic(cfg: McConfig, z_max: float = 4.0) -> dict:
    """z-scores of the Monte Carlo estimates against the periodic steady state."""
    mc = simulate_tape(cfg)
    obs = cycle.observables(cfg.params, cfg.tau)
    state = cycle.periodic_steady_state(cfg.params, cfg.tau)
    rows = {
        "delta_prime": (obs.delta_prime, mc.delta_prime, mc.delta_prime_se),
        "dQ": (obs.dQ, mc.dQ, mc.dQ_se),
        "d_star": (state.d_star, mc.d_up, mc.d_up_se),
    }
    report = {"tau": cfg.tau, "n_bits": cfg.n_bits, "burn_in": cfg.burn_in,
              "seed": cfg.seed, "checks": {}}
    ok = True
    for name, (exact, est, se) in rows.items():
        z = (est - exact) / se if se > 0 else (0.0 if est == exact else math.inf)
        ok &= abs(z) < z_max
        report["checks"][name] = {"analytic": exact, "estimate": est, "stderr": se, "z": z}
    report["passed"] = bool(ok)
    return report
