import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demontape import cycle, markov
from demontape.cycle import Mode
from demontape.params import Params

from .conftest import random_physical

physical_st = st.builds(
    lambda s, w, g, d: Params(s * w, w, g, d),
    st.floats(0.0, 0.95), st.floats(0.1, 0.9), st.floats(0.2, 3.0), st.floats(-0.99, 0.99),
).filter(lambda p: abs(p.delta - p.epsilon) > 1e-6)


def iterate_map(params, tau, n=3000):
    """Brute-force periodic steady state: iterate the interaction interval."""
    E = markov.expm_dense(markov.build_rate_matrix(params), tau)
    d = 0.5
    for _ in range(n):
        P = E @ markov.joint_product(d, params.p0_bit)
        d = P[0] + P[2]
    return d, P


def test_update_map_limits():
    p = Params(0.3, 0.5, 1.0, 0.0)
    A, B = cycle.demon_update_map(p, 1e-9)
    assert A == pytest.approx(1.0, abs=1e-8) and B == pytest.approx(0.0, abs=1e-8)
    A, B = cycle.demon_update_map(p, 1e3)
    pi = markov.stationary_distribution(markov.build_rate_matrix(p))
    assert A == pytest.approx(0.0, abs=1e-12)
    assert B == pytest.approx(pi[0] + pi[2], abs=1e-10)


def test_update_map_contracts(rng):
    for p in random_physical(rng, 1000):
        A, B = cycle.demon_update_map(p, 1.0)
        assert 0.0 < A < 1.0
        assert 0.0 <= B / (1 - A) <= 1.0


def test_update_map_rejects_nonpositive_tau():
    with pytest.raises(ValueError):
        cycle.demon_update_map(Params(0.3, 0.5), 0.0)
    with pytest.raises(ValueError):
        cycle.periodic_steady_state(Params(0.3, 0.5), -1.0)


def test_steady_state_matches_iteration(rng):
    for p in random_physical(rng, 20):
        tau = 10 ** rng.uniform(-1, 1)
        d_iter, P_iter = iterate_map(p, tau)
        st_ = cycle.periodic_steady_state(p, tau)
        assert st_.d_star == pytest.approx(d_iter, abs=1e-10)
        assert st_.P_end == pytest.approx(P_iter, abs=1e-10)


def test_steady_state_invariants(rng):
    for p in random_physical(rng, 1000):
        tau = 10 ** rng.uniform(-2, 2)
        s = cycle.periodic_steady_state(p, tau)
        assert s.P_end[0] + s.P_end[2] == pytest.approx(s.d_star, abs=1e-10)
        p0, p1 = p.p0_bit, 1 - p.p0_bit
        d = s.d_star
        assert np.array_equal(s.P_start, np.array([d * p0, (1 - d) * p0, d * p1, (1 - d) * p1]))
        assert s.bit_out.sum() == pytest.approx(1.0, abs=1e-12)


def test_equilibrium_when_biases_match():
    p = Params(0.4, 0.4, 1.0, 0.0)
    for tau in (0.1, 1.0, 10.0):
        s = cycle.periodic_steady_state(p, tau)
        assert s.bit_out[0] - s.bit_out[1] == pytest.approx(0.0, abs=1e-14)
        assert s.d_star == pytest.approx((1 - 0.4) / 2, abs=1e-12)


def test_long_interval_outgoing_bias_is_epsilon(ref_machine):
    s = cycle.periodic_steady_state(ref_machine, 1e3)
    assert s.bit_out[0] - s.bit_out[1] == pytest.approx(0.235294, abs=1e-6)
    assert s.bit_out[0] - s.bit_out[1] == pytest.approx(ref_machine.epsilon, abs=1e-12)


def test_exact_tau_derivative_matches_finite_difference(rng):
    for p in random_physical(rng, 20):
        tau = 10 ** rng.uniform(-1, 1)
        _, exact = cycle.outgoing_bias_rate(p, [tau])
        h = 1e-5 * tau
        fd = (cycle.outgoing_bias(p, [tau + h]) - cycle.outgoing_bias(p, [tau - h])) / (2 * h)
        assert exact[0] == pytest.approx(fd[0], rel=1e-6, abs=1e-10)


def test_shift_keeps_precision_at_short_times():
    p = Params(0.3, 0.5, 1.0, 0.2)
    naive = cycle.outgoing_bias(p, [1e-3])[0] - p.delta
    tiny = cycle.bias_shift(p, [1e-9])[0]
    # the shift is linear in tau at short times
    assert tiny / 1e-9 == pytest.approx(naive / 1e-3, rel=1e-3)


def test_neutral_point():
    p = Params.from_epsilon(0.3, 0.5, delta=0.3)
    obs = cycle.observables(p, 2.0)
    assert abs(obs.dQ) < 1e-12 and abs(obs.dSB) < 1e-12 and abs(obs.sigma_tau) < 1e-12
    assert obs.mode is Mode.NEUTRAL
    assert 0.0 < obs.theta < 1.0


def test_theta_limit_is_continuous():
    p = Params.from_epsilon(0.3, 0.5, delta=0.3)
    at = cycle.relaxation_degree(p, [0.5, 2.0])
    near = 0.5 * (cycle.relaxation_degree(p.replace(delta=0.3 + 1e-3), [0.5, 2.0])
                  + cycle.relaxation_degree(p.replace(delta=0.3 - 1e-3), [0.5, 2.0]))
    assert at == pytest.approx(near, abs=1e-6)


def test_reference_saturation(ref_machine):
    eps = 0.2 / 0.85
    closed = 0.5 * math.log(0.5 / ((1 + eps) / 2)) + 0.5 * math.log(0.5 / ((1 - eps) / 2))
    assert closed == pytest.approx(0.02848, abs=5e-6)
    obs = cycle.observables(ref_machine, 1e3)
    assert obs.dkl_asymp == pytest.approx(closed, rel=1e-13)
    assert obs.sigma_tau == pytest.approx(closed, rel=1e-6)


@settings(max_examples=300)
@given(physical_st, st.floats(-2, 2))
def test_sandwich_and_identities(p, log_tau):
    tau = 10 ** log_tau
    obs = cycle.observables(p, tau)
    assert obs.dkl_inst < obs.sigma_tau + 1e-10
    assert obs.sigma_tau <= obs.dkl_asymp + 1e-10
    assert obs.sigma_tau >= -1e-12
    assert obs.dQ == pytest.approx((p.delta - obs.delta_prime) / 2, abs=1e-15)
    naive = (-2 * math.atanh(p.epsilon) * obs.dQ
             + cycle.bit_entropy(obs.delta_prime) - cycle.bit_entropy(p.delta))
    assert obs.sigma_tau == pytest.approx(float(naive), abs=1e-12)
    assert obs.sigma_tau == pytest.approx(
        float(cycle.entropy_production(p.delta, obs.delta_prime, p.epsilon)), abs=1e-12)
    assert -1e-10 <= obs.theta <= 1 + 1e-10
    gap = p.delta - p.epsilon
    assert np.sign(obs.dQ) == np.sign(gap)


def test_strict_lower_bound_at_finite_tau(rng):
    for p in random_physical(rng, 200):
        if abs(p.delta - p.epsilon) < 1e-3:
            continue
        for tau in (0.05, 0.5, 2.0):
            obs = cycle.observables(p, tau)
            assert obs.sigma_tau - obs.dkl_inst > 0


def test_deficit_identity(rng):
    for p in random_physical(rng, 50):
        taus = np.array([0.3, 3.0])
        c = cycle.curve_arrays(p, taus)
        direct = c["dkl_asymp"] - c["sigma_tau"]
        assert cycle.dissipation_deficit(p, taus) == pytest.approx(direct, abs=1e-13)


def test_quasistatic_limits(rng):
    for p in random_physical(rng, 50):
        tau = 1e3 / min(p.gamma, 1.0)
        obs = cycle.observables(p, tau)
        assert obs.theta == pytest.approx(1.0, abs=1e-8)
        assert obs.delta_prime == pytest.approx(p.epsilon, abs=1e-8)


def test_theta_monotonicity_is_reported(rng):
    taus = np.geomspace(1e-2, 1e2, 200)
    monotone = 0
    params = random_physical(rng, 100)
    for p in params:
        if abs(p.delta - p.epsilon) < 1e-6:
            monotone += 1
            continue
        th = cycle.relaxation_degree(p, taus)
        monotone += bool(np.all(np.diff(th) >= -1e-12))
    print(f"theta monotone in tau for {monotone}/{len(params)} draws")


@pytest.mark.parametrize("delta, mode", [(0.8, Mode.REFRIGERATOR), (0.0, Mode.ERASER),
                                         (-0.8, Mode.DISSIPATIVE)])
def test_classify_examples(delta, mode):
    p = Params.from_epsilon(0.4, 0.5, delta=delta)
    assert cycle.observables(p, 1.0).mode is mode


def test_classify_tolerance():
    f = cycle._Flux
    assert cycle.classify_mode(f(5e-13, 1.0)) is Mode.NEUTRAL
    assert cycle.classify_mode(f(1e-9, 1e-9)) is Mode.REFRIGERATOR
    assert cycle.classify_mode(f(-1e-9, -1e-9)) is Mode.ERASER
    assert cycle.classify_mode(f(-1e-9, 0.0)) is Mode.DISSIPATIVE
    assert cycle.classify_mode(f(1e-9, -1e-9)) is Mode.DISSIPATIVE


def test_refrigerator_dissipation_cap(rng):
    worst = 0.0
    for p in random_physical(rng, 2000):
        obs = cycle.observables(p, 10 ** rng.uniform(-2, 2))
        if obs.mode is Mode.REFRIGERATOR:
            worst = max(worst, obs.sigma_tau)
    print(f"largest refrigerator entropy production: {worst:.4f} nats")
    assert 0 < worst <= math.log(2)


@pytest.mark.parametrize("preset", [
    dict(sigma=0.1, omega=0.9, gamma=0.5, p0=0.2),
    dict(sigma=0.2, omega=0.5, gamma=1.0, p0=0.95),
    dict(sigma=0.2, omega=0.5, gamma=2.0, p0=0.5),
])
def test_relaxation_rate_is_twice_an_eigenvalue(preset):
    p = Params.resolve(**preset)
    fit = cycle.relaxation_decay(p)
    lam = markov.eigen_spectrum(markov.build_rate_matrix(p)).values
    assert fit.slope == pytest.approx(2 * lam[fit.eigen_index], rel=0.01)
    assert fit.taus[-1] / fit.taus[0] >= 2


def test_relaxation_refuses_bad_grids(ref_machine):
    with pytest.raises(cycle.DecayFitError):
        cycle.relaxation_decay(ref_machine, np.linspace(200, 300, 10))
    with pytest.raises(cycle.DecayFitError):
        cycle.relaxation_decay(ref_machine, [1.0, 2.0])


def test_observables_curve_matches_pointwise(ref_machine):
    taus = [0.1, 1.0, 7.0]
    curve = cycle.observables_curve(ref_machine, taus)
    for t, obs in zip(taus, curve):
        single = cycle.observables(ref_machine, t)
        assert single.mode is obs.mode
        for key, value in single.as_dict().items():
            if isinstance(value, float):
                assert obs.as_dict()[key] == pytest.approx(value, rel=1e-13, abs=1e-16)
